#pragma once

// Year-sliced paper-centric co-authorship layer, social distances and
// knowledge-flow labels.
//
// The co-authorship layer (papers adjacent iff they share an author) is never
// materialized. Papers and authors form a bipartite graph; a path of 2k
// bipartite edges between two papers is a path of k co-authorship edges, i.e.
// k - 1 intermediate papers.

#include <algorithm>
#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "knowflow/common.hpp"
#include "knowflow/corpus.hpp"

namespace knowflow::graph {

/// Social distance counted in intermediate papers on a shortest path.
class Distance {
 public:
  enum class Kind : std::uint8_t { finite, beyond_horizon, infinite };

  static constexpr Distance finite(int intermediate) { return {Kind::finite, intermediate}; }
  static constexpr Distance beyond_horizon(int max_depth) { return {Kind::beyond_horizon, max_depth}; }
  static constexpr Distance infinite() { return {Kind::infinite, 0}; }

  constexpr Kind kind() const { return kind_; }
  constexpr bool is_finite() const { return kind_ == Kind::finite; }
  constexpr bool is_finite(int k) const { return kind_ == Kind::finite && value_ == k; }
  /// Intermediate-node count for finite distances, the horizon for beyond_horizon.
  constexpr int value() const { return value_; }
  /// External class code: k for finite, -1 for beyond/infinite.
  constexpr int class_code() const { return kind_ == Kind::finite ? value_ : -1; }

  constexpr bool operator==(const Distance&) const = default;

  std::string to_string() const;

 private:
  constexpr Distance(Kind kind, int value) : kind_(kind), value_(value) {}

  Kind kind_;
  int value_;
};

// Compact per-pair storage codes used by the batch engine and the binary
// observation file. Non-negative codes are finite distances.
inline constexpr std::int8_t kCodeInfinite = -1;
inline constexpr std::int8_t kCodeBeyondHorizon = -2;
inline constexpr int kMaxSupportedDepth = 120;

std::int8_t to_code(const Distance& d);
Distance from_code(std::int8_t code, int max_depth);

enum class FlowMode { strict, relaxed };

FlowMode parse_flow_mode(std::string_view name);
std::string_view to_string(FlowMode mode);

struct PairObservation {
  PaperId x_id = 0;  // x_id < y_id
  PaperId y_id = 0;
  int eval_year = 0;
  Distance distance = Distance::infinite();
  bool flow = false;
  std::optional<bool> same_country;
  std::optional<bool> same_region;

  bool operator==(const PairObservation&) const = default;
};

/// Flow between two author sets given which citation directions exist.
/// Strict: a citation exists and the sets are disjoint. Relaxed: strict, or
/// the citing set holds an author absent from the cited set.
template <typename SortedRange>
bool flow_between(const SortedRange& a, const SortedRange& b, bool a_cites_b, bool b_cites_a,
                  FlowMode mode) {
  if (!a_cites_b && !b_cites_a) return false;
  auto ia = std::begin(a), ib = std::begin(b);
  bool disjoint = true;
  while (ia != std::end(a) && ib != std::end(b)) {
    if (*ia < *ib) {
      ++ia;
    } else if (*ib < *ia) {
      ++ib;
    } else {
      disjoint = false;
      break;
    }
  }
  if (disjoint || mode == FlowMode::strict) return disjoint;
  auto has_new_author = [](const SortedRange& citing, const SortedRange& cited) {
    return !std::includes(std::begin(cited), std::end(cited), std::begin(citing), std::end(citing));
  };
  return (a_cites_b && has_new_author(a, b)) || (b_cites_a && has_new_author(b, a));
}

/// y(X, Y) evaluated in both citation directions.
bool knowledge_flow(const corpus::PaperRecord& x, const corpus::PaperRecord& y, FlowMode mode);

/// Bipartite paper-author index that grows one publication year at a time.
class MultiplexGraph {
 public:
  explicit MultiplexGraph(const corpus::Corpus& corpus);

  /// Admits every paper published in `year`. Years must be strictly
  /// increasing and no year holding papers may be skipped.
  void admit_year(int year);

  std::span<const int> admitted_years() const { return admitted_years_; }
  bool is_admitted(PaperId paper) const;
  std::size_t paper_count() const { return position_.size(); }
  std::size_t admitted_count() const { return order_.size(); }
  std::size_t author_count() const { return author_offsets_.size() - 1; }
  /// Admitted paper-author incidences (bipartite edges).
  std::size_t incidence_count() const { return pos_authors_.size(); }

  /// Admitted papers in admission order: by year, then paper_id.
  std::span<const PaperId> admission_order() const { return order_; }
  std::uint32_t position_of(PaperId paper) const;
  /// Sorted author indices of the paper at an admission position.
  std::span<const std::uint32_t> authors_at(std::uint32_t position) const;
  std::uint32_t component_at(std::uint32_t position) const { return component_[position]; }

  /// Single-pair breadth-first search on the current slice.
  Distance social_distance(PaperId x, PaperId y, int max_depth) const;

  /// Distance codes from up to kBatchLanes sources to every admitted paper.
  /// `out` is source-major: out[s * admitted_count() + position]. The entry
  /// of a source for itself is 0.
  static constexpr std::size_t kBatchLanes = 256;
  void batch_distance_codes(std::span<const std::uint32_t> source_positions, int max_depth,
                            std::span<std::int8_t> out) const;

 private:
  static constexpr std::uint32_t kNotAdmitted = UINT32_MAX;

  std::uint32_t find_root(std::uint32_t node);

  std::vector<std::optional<int>> years_;      // by paper id
  std::vector<std::uint32_t> id_author_offsets_;  // by paper id, all papers
  std::vector<std::uint32_t> id_authors_;

  std::vector<PaperId> order_;
  std::vector<std::uint32_t> position_;  // by paper id
  std::vector<std::uint32_t> pos_author_offsets_{0};
  std::vector<std::uint32_t> pos_authors_;
  std::vector<std::uint32_t> author_offsets_;  // author -> admitted positions (CSR)
  std::vector<std::uint32_t> author_positions_;

  std::vector<std::uint32_t> dsu_parent_;  // positions, then authors at offset paper_count()
  std::vector<std::uint32_t> component_;   // by position
  std::vector<int> admitted_years_;
};

struct YearRange {
  int year;
  std::uint32_t begin;  // admission positions [begin, end)
  std::uint32_t end;

  bool operator==(const YearRange&) const = default;
};

/// Admission-order paper table: everything needed to turn observation blocks
/// back into PairObservation values.
struct PaperTable {
  std::vector<PaperId> paper_ids;  // by position
  std::vector<int> years;
  std::vector<std::int32_t> country;  // index into countries, -1 absent
  std::vector<std::int32_t> region;   // index into regions, -1 absent
  std::vector<std::string> countries;
  std::vector<std::string> regions;  // "country\x1fregion" so equal names in different countries differ
  std::vector<YearRange> year_ranges;
  int max_depth = 10;
  FlowMode flow_mode = FlowMode::strict;

  static PaperTable build(const corpus::Corpus& corpus, std::span<const PaperId> admission_order,
                          int max_depth, FlowMode mode);

  std::size_t size() const { return paper_ids.size(); }
  const YearRange& range_of(std::uint32_t position) const;
  /// Targets of a source: all earlier-year papers, then same-year papers
  /// later in admission order.
  std::uint32_t target_count(std::uint32_t source) const;
  std::uint32_t target_position(std::uint32_t source, std::uint32_t target_index) const;
  /// Inverse of target_position; nullopt when the position is not a target.
  std::optional<std::uint32_t> target_index(std::uint32_t source, std::uint32_t position) const;

  bool operator==(const PaperTable&) const = default;
};

/// One source paper's observations against its target sequence.
struct ObservationBlock {
  std::uint32_t source_position = 0;
  std::span<const std::int8_t> distance_codes;   // one per target
  std::span<const std::uint32_t> flow_targets;   // ascending target indices with flow
};

template <typename Visitor>
void expand_block(const PaperTable& table, const ObservationBlock& block, Visitor&& visit) {
  const std::uint32_t src = block.source_position;
  const auto& range = table.range_of(src);
  const PaperId src_id = table.paper_ids[src];
  auto flow_it = block.flow_targets.begin();
  PairObservation obs;
  obs.eval_year = range.year;
  for (std::uint32_t t = 0; t < block.distance_codes.size(); ++t) {
    const std::uint32_t pos = t < range.begin ? t : src + 1 + (t - range.begin);
    const PaperId other = table.paper_ids[pos];
    obs.x_id = std::min(src_id, other);
    obs.y_id = std::max(src_id, other);
    obs.distance = from_code(block.distance_codes[t], table.max_depth);
    obs.flow = flow_it != block.flow_targets.end() && *flow_it == t;
    if (obs.flow) ++flow_it;
    const auto cs = table.country[src], co = table.country[pos];
    obs.same_country = (cs < 0 || co < 0) ? std::nullopt : std::optional<bool>(cs == co);
    const auto rs = table.region[src], ro = table.region[pos];
    obs.same_region = (rs < 0 || ro < 0) ? std::nullopt : std::optional<bool>(rs == ro);
    visit(static_cast<const PairObservation&>(obs));
  }
}

struct EnumerationOptions {
  int max_depth = 10;
  FlowMode flow_mode = FlowMode::strict;
  int threads = 0;  // 0: runtime default
};

struct YearSummary {
  int year = 0;
  std::size_t new_papers = 0;
  std::size_t admitted_papers = 0;
  std::size_t incidences = 0;       // paper-author links in the slice
  std::size_t coauthor_edges = 0;   // implied paper-paper edges in the slice
  std::uint64_t observations = 0;
  std::uint64_t flow_events = 0;
};

struct EnumerationSummary {
  std::vector<YearSummary> years;
  std::size_t papers_without_year = 0;
  std::uint64_t observations = 0;
  std::uint64_t flow_events = 0;

  nlohmann::json to_json() const;
};

/// Algorithm driver: admits years in order and, per year, computes the
/// distances from every new paper to all admitted papers with a batched
/// multi-source BFS. Blocks are delivered in admission order.
class PairEnumerator {
 public:
  PairEnumerator(const corpus::Corpus& corpus, EnumerationOptions options);

  const PaperTable& table() const { return table_; }

  EnumerationSummary run(const std::function<void(const ObservationBlock&)>& sink);

 private:
  const corpus::Corpus& corpus_;
  EnumerationOptions options_;
  PaperTable table_;
  std::vector<std::vector<PaperId>> citers_;  // reverse citation index
  std::size_t papers_without_year_ = 0;
};

/// Throws Error when no paper has a publication year.
EnumerationSummary enumerate_pairs(const corpus::Corpus& corpus, const EnumerationOptions& options,
                                   const std::function<void(const PairObservation&)>& visit);

std::vector<PairObservation> collect_pairs(const corpus::Corpus& corpus,
                                           const EnumerationOptions& options);

enum class Cohort { all, same_country, diff_country, same_region, diff_region };

inline constexpr std::array<Cohort, 5> kAllCohorts = {Cohort::all, Cohort::same_country,
                                                      Cohort::diff_country, Cohort::same_region,
                                                      Cohort::diff_region};

std::string_view to_string(Cohort cohort);
bool in_cohort(const PairObservation& obs, Cohort cohort);

/// Counts per distance class split by flow label. Row i - 1 holds Finite(i)
/// for 1 <= i <= max_depth; the last row holds beyond-horizon and infinite
/// pairs (and any finite distance above max_depth).
struct DistanceHistogram {
  Cohort cohort = Cohort::all;
  int max_depth = 10;
  std::vector<std::array<std::uint64_t, 2>> counts;
  std::uint64_t excluded_zero = 0;
  std::uint64_t excluded_geo = 0;

  DistanceHistogram(Cohort cohort, int max_depth);

  void add(const PairObservation& obs);
  std::uint64_t total() const;
  bool operator==(const DistanceHistogram&) const = default;
};

DistanceHistogram distance_histogram(std::span<const PairObservation> observations, Cohort cohort,
                                     int max_depth);

/// CSV columns: cohort,distance_class,count_flow0,count_flow1 (-1 = unreachable).
void write_histograms_csv(std::span<const DistanceHistogram> histograms, std::ostream& out);

}  // namespace knowflow::graph
