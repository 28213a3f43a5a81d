#include "knowflow/graph.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <deque>
#include <exception>
#include <map>
#include <ostream>

#ifdef _OPENMP
#include <omp.h>
#endif

#include <spdlog/spdlog.h>

namespace knowflow::graph {

std::string Distance::to_string() const {
  switch (kind_) {
    case Kind::finite:
      return "Finite(" + std::to_string(value_) + ")";
    case Kind::beyond_horizon:
      return "BeyondHorizon(" + std::to_string(value_) + ")";
    case Kind::infinite:
      break;
  }
  return "Infinite";
}

std::int8_t to_code(const Distance& d) {
  switch (d.kind()) {
    case Distance::Kind::finite:
      if (d.value() < 0 || d.value() > kMaxSupportedDepth) {
        throw ContractViolation("distance out of storable range");
      }
      return static_cast<std::int8_t>(d.value());
    case Distance::Kind::beyond_horizon:
      return kCodeBeyondHorizon;
    case Distance::Kind::infinite:
      break;
  }
  return kCodeInfinite;
}

Distance from_code(std::int8_t code, int max_depth) {
  if (code >= 0) return Distance::finite(code);
  if (code == kCodeInfinite) return Distance::infinite();
  if (code == kCodeBeyondHorizon) return Distance::beyond_horizon(max_depth);
  throw Error("invalid distance code " + std::to_string(code));
}

FlowMode parse_flow_mode(std::string_view name) {
  if (name == "strict") return FlowMode::strict;
  if (name == "relaxed") return FlowMode::relaxed;
  throw Error("unknown flow mode: " + std::string(name));
}

std::string_view to_string(FlowMode mode) {
  return mode == FlowMode::strict ? "strict" : "relaxed";
}

bool knowledge_flow(const corpus::PaperRecord& x, const corpus::PaperRecord& y, FlowMode mode) {
  const bool x_cites_y = std::binary_search(x.cited_ids.begin(), x.cited_ids.end(), y.paper_id);
  const bool y_cites_x = std::binary_search(y.cited_ids.begin(), y.cited_ids.end(), x.paper_id);
  return flow_between(x.author_keys, y.author_keys, x_cites_y, y_cites_x, mode);
}

// ---------------------------------------------------------------------------
// MultiplexGraph

MultiplexGraph::MultiplexGraph(const corpus::Corpus& corpus) {
  const auto& papers = corpus.papers;
  std::vector<const std::string*> keys;
  for (const auto& p : papers) {
    for (const auto& k : p.author_keys) keys.push_back(&k.canonical);
  }
  std::sort(keys.begin(), keys.end(), [](auto* a, auto* b) { return *a < *b; });
  keys.erase(std::unique(keys.begin(), keys.end(), [](auto* a, auto* b) { return *a == *b; }),
             keys.end());

  years_.reserve(papers.size());
  id_author_offsets_.reserve(papers.size() + 1);
  id_author_offsets_.push_back(0);
  for (const auto& p : papers) {
    years_.push_back(p.year);
    for (const auto& k : p.author_keys) {
      auto it = std::lower_bound(keys.begin(), keys.end(), &k.canonical,
                                 [](auto* a, auto* b) { return *a < *b; });
      id_authors_.push_back(static_cast<std::uint32_t>(it - keys.begin()));
    }
    std::sort(id_authors_.begin() + id_author_offsets_.back(), id_authors_.end());
    id_authors_.erase(std::unique(id_authors_.begin() + id_author_offsets_.back(), id_authors_.end()),
                      id_authors_.end());
    id_author_offsets_.push_back(static_cast<std::uint32_t>(id_authors_.size()));
  }

  position_.assign(papers.size(), kNotAdmitted);
  author_offsets_.assign(keys.size() + 1, 0);
  dsu_parent_.resize(papers.size() + keys.size());
  for (std::uint32_t i = 0; i < dsu_parent_.size(); ++i) dsu_parent_[i] = i;
}

std::uint32_t MultiplexGraph::find_root(std::uint32_t node) {
  while (dsu_parent_[node] != node) {
    dsu_parent_[node] = dsu_parent_[dsu_parent_[node]];
    node = dsu_parent_[node];
  }
  return node;
}

void MultiplexGraph::admit_year(int year) {
  const bool has_previous = !admitted_years_.empty();
  if (has_previous && year <= admitted_years_.back()) {
    throw ContractViolation("year " + std::to_string(year) + " admitted out of order");
  }
  std::vector<PaperId> fresh;
  for (PaperId id = 0; id < years_.size(); ++id) {
    if (!years_[id]) continue;
    const int y = *years_[id];
    if (y == year) {
      fresh.push_back(id);
    } else if (y < year && (!has_previous || y > admitted_years_.back())) {
      throw ContractViolation("year " + std::to_string(y) + " skipped before admitting " +
                              std::to_string(year));
    }
  }
  admitted_years_.push_back(year);

  const std::uint32_t author_base = static_cast<std::uint32_t>(paper_count());
  for (PaperId id : fresh) {
    const auto pos = static_cast<std::uint32_t>(order_.size());
    order_.push_back(id);
    position_[id] = pos;
    for (auto i = id_author_offsets_[id]; i < id_author_offsets_[id + 1]; ++i) {
      const std::uint32_t a = id_authors_[i];
      pos_authors_.push_back(a);
      // Positions share the DSU index space with paper ids; both are < paper_count().
      const auto ra = find_root(pos), rb = find_root(author_base + a);
      if (ra != rb) dsu_parent_[ra] = rb;
    }
    pos_author_offsets_.push_back(static_cast<std::uint32_t>(pos_authors_.size()));
  }

  std::fill(author_offsets_.begin(), author_offsets_.end(), 0);
  for (auto a : pos_authors_) ++author_offsets_[a + 1];
  for (std::size_t a = 1; a < author_offsets_.size(); ++a) author_offsets_[a] += author_offsets_[a - 1];
  author_positions_.resize(pos_authors_.size());
  std::vector<std::uint32_t> cursor(author_offsets_.begin(), author_offsets_.end() - 1);
  for (std::uint32_t pos = 0; pos < order_.size(); ++pos) {
    for (auto a : authors_at(pos)) author_positions_[cursor[a]++] = pos;
  }

  component_.resize(order_.size());
  for (std::uint32_t pos = 0; pos < order_.size(); ++pos) component_[pos] = find_root(pos);
}

bool MultiplexGraph::is_admitted(PaperId paper) const {
  return paper < position_.size() && position_[paper] != kNotAdmitted;
}

std::uint32_t MultiplexGraph::position_of(PaperId paper) const {
  if (!is_admitted(paper)) {
    throw ContractViolation("paper " + std::to_string(paper) + " is not admitted");
  }
  return position_[paper];
}

std::span<const std::uint32_t> MultiplexGraph::authors_at(std::uint32_t position) const {
  return {pos_authors_.data() + pos_author_offsets_[position],
          pos_authors_.data() + pos_author_offsets_[position + 1]};
}

Distance MultiplexGraph::social_distance(PaperId x, PaperId y, int max_depth) const {
  if (x == y) throw ContractViolation("social_distance requires two distinct papers");
  if (max_depth < 0) throw ContractViolation("max_depth must be non-negative");
  const auto src = position_of(x), dst = position_of(y);

  std::vector<int> level(order_.size(), -1);
  std::vector<bool> author_seen(author_count(), false);
  std::deque<std::uint32_t> queue{src};
  level[src] = 0;
  while (!queue.empty()) {
    const auto p = queue.front();
    queue.pop_front();
    // Papers at co-authorship hop L sit L - 1 intermediates away.
    if (level[p] > max_depth) break;
    for (auto a : authors_at(p)) {
      if (author_seen[a]) continue;
      author_seen[a] = true;
      for (auto i = author_offsets_[a]; i < author_offsets_[a + 1]; ++i) {
        const auto q = author_positions_[i];
        if (level[q] >= 0) continue;
        level[q] = level[p] + 1;
        if (q == dst) return Distance::finite(level[q] - 1);
        queue.push_back(q);
      }
    }
  }
  return component_[src] == component_[dst] ? Distance::beyond_horizon(max_depth)
                                            : Distance::infinite();
}

namespace {

constexpr std::int8_t kCodeUnset = -3;

// Bit-parallel BFS: lane s of every mask tracks source s.
template <std::size_t Words>
void multi_source_bfs(std::span<const std::uint32_t> sources, int max_depth,
                      std::span<const std::uint32_t> pos_offsets,
                      std::span<const std::uint32_t> pos_authors,
                      std::span<const std::uint32_t> author_offsets,
                      std::span<const std::uint32_t> author_positions, std::size_t n_positions,
                      std::span<std::int8_t> position_major) {
  using Mask = std::array<std::uint64_t, Words>;
  const std::size_t lanes = sources.size();
  const std::size_t n_authors = author_offsets.size() - 1;
  std::vector<Mask> visited(n_positions, Mask{});
  std::vector<Mask> frontier(n_positions, Mask{});
  std::vector<Mask> next(n_positions, Mask{});
  std::vector<Mask> author_mask(n_authors, Mask{});
  auto is_zero = [](const Mask& m) {
    std::uint64_t acc = 0;
    for (auto w : m) acc |= w;
    return acc == 0;
  };

  std::vector<std::uint32_t> active;
  for (std::size_t s = 0; s < lanes; ++s) {
    const auto p = sources[s];
    if (is_zero(frontier[p])) active.push_back(p);
    visited[p][s / 64] |= std::uint64_t{1} << (s % 64);
    frontier[p][s / 64] |= std::uint64_t{1} << (s % 64);
    position_major[p * lanes + s] = 0;
  }

  std::vector<std::uint32_t> touched_authors, discovered;
  for (int hop = 1; hop <= max_depth + 1 && !active.empty(); ++hop) {
    touched_authors.clear();
    for (auto p : active) {
      const Mask& f = frontier[p];
      for (auto i = pos_offsets[p]; i < pos_offsets[p + 1]; ++i) {
        Mask& am = author_mask[pos_authors[i]];
        if (is_zero(am)) touched_authors.push_back(pos_authors[i]);
        for (std::size_t w = 0; w < Words; ++w) am[w] |= f[w];
      }
      frontier[p] = Mask{};
    }
    discovered.clear();
    for (auto a : touched_authors) {
      const Mask& am = author_mask[a];
      for (auto i = author_offsets[a]; i < author_offsets[a + 1]; ++i) {
        const auto q = author_positions[i];
        Mask& nq = next[q];
        const bool was_zero = is_zero(nq);
        for (std::size_t w = 0; w < Words; ++w) nq[w] |= am[w] & ~visited[q][w];
        if (was_zero && !is_zero(nq)) discovered.push_back(q);
      }
      author_mask[a] = Mask{};
    }
    const auto code = static_cast<std::int8_t>(hop - 1);
    for (auto q : discovered) {
      Mask& nq = next[q];
      std::int8_t* row = position_major.data() + std::size_t{q} * lanes;
      for (std::size_t w = 0; w < Words; ++w) {
        visited[q][w] |= nq[w];
        for (std::uint64_t bits = nq[w]; bits != 0; bits &= bits - 1) {
          row[w * 64 + static_cast<std::size_t>(std::countr_zero(bits))] = code;
        }
      }
      frontier[q] = nq;
      nq = Mask{};
    }
    active.swap(discovered);
  }
}

}  // namespace

void MultiplexGraph::batch_distance_codes(std::span<const std::uint32_t> source_positions,
                                          int max_depth, std::span<std::int8_t> out) const {
  const std::size_t lanes = source_positions.size();
  const std::size_t n = admitted_count();
  if (lanes == 0) return;
  if (lanes > kBatchLanes) throw ContractViolation("too many sources in one batch");
  if (max_depth < 0 || max_depth > kMaxSupportedDepth) throw ContractViolation("max_depth out of range");
  if (out.size() != lanes * n) throw ContractViolation("output buffer has the wrong size");
  for (auto s : source_positions) {
    if (s >= n) throw ContractViolation("source position not admitted");
  }

  std::vector<std::int8_t> position_major(lanes * n, kCodeUnset);
  const std::span<const std::uint32_t> po(pos_author_offsets_), pa(pos_authors_),
      ao(author_offsets_), ap(author_positions_);
  switch ((lanes + 63) / 64) {
    case 1:
      multi_source_bfs<1>(source_positions, max_depth, po, pa, ao, ap, n, position_major);
      break;
    case 2:
      multi_source_bfs<2>(source_positions, max_depth, po, pa, ao, ap, n, position_major);
      break;
    case 3:
      multi_source_bfs<3>(source_positions, max_depth, po, pa, ao, ap, n, position_major);
      break;
    default:
      multi_source_bfs<4>(source_positions, max_depth, po, pa, ao, ap, n, position_major);
      break;
  }

  // Transpose to source-major, resolving unreached entries by component.
  constexpr std::size_t kTile = 64;
  for (std::size_t q0 = 0; q0 < n; q0 += kTile) {
    const std::size_t q1 = std::min(n, q0 + kTile);
    for (std::size_t s = 0; s < lanes; ++s) {
      const auto src_component = component_[source_positions[s]];
      std::int8_t* row = out.data() + s * n;
      for (std::size_t q = q0; q < q1; ++q) {
        std::int8_t code = position_major[q * lanes + s];
        if (code == kCodeUnset) {
          code = component_[q] == src_component ? kCodeBeyondHorizon : kCodeInfinite;
        }
        row[q] = code;
      }
    }
  }
}

// ---------------------------------------------------------------------------
// PaperTable

PaperTable PaperTable::build(const corpus::Corpus& corpus, std::span<const PaperId> admission_order,
                             int max_depth, FlowMode mode) {
  PaperTable table;
  table.max_depth = max_depth;
  table.flow_mode = mode;
  std::map<std::string, std::int32_t> country_index, region_index;
  auto intern = [](std::map<std::string, std::int32_t>& index, std::vector<std::string>& pool,
                   const std::string& value) {
    auto [it, inserted] = index.try_emplace(value, static_cast<std::int32_t>(pool.size()));
    if (inserted) pool.push_back(value);
    return it->second;
  };
  for (std::uint32_t pos = 0; pos < admission_order.size(); ++pos) {
    const auto& paper = corpus.papers.at(admission_order[pos]);
    if (!paper.year) throw ContractViolation("admitted paper without year");
    table.paper_ids.push_back(paper.paper_id);
    table.years.push_back(*paper.year);
    table.country.push_back(paper.country ? intern(country_index, table.countries, *paper.country) : -1);
    table.region.push_back(
        paper.region
            ? intern(region_index, table.regions, paper.country.value_or("") + '\x1f' + *paper.region)
            : -1);
    if (table.year_ranges.empty() || table.year_ranges.back().year != *paper.year) {
      if (!table.year_ranges.empty() && table.year_ranges.back().year > *paper.year) {
        throw ContractViolation("admission order is not sorted by year");
      }
      table.year_ranges.push_back({*paper.year, pos, pos});
    }
    table.year_ranges.back().end = pos + 1;
  }
  return table;
}

const YearRange& PaperTable::range_of(std::uint32_t position) const {
  auto it = std::upper_bound(year_ranges.begin(), year_ranges.end(), position,
                             [](std::uint32_t p, const YearRange& r) { return p < r.begin; });
  if (it == year_ranges.begin() || position >= size()) throw ContractViolation("position out of range");
  return *std::prev(it);
}

std::uint32_t PaperTable::target_count(std::uint32_t source) const {
  const auto& r = range_of(source);
  return r.begin + (r.end - source - 1);
}

std::uint32_t PaperTable::target_position(std::uint32_t source, std::uint32_t target_index) const {
  const auto& r = range_of(source);
  return target_index < r.begin ? target_index : source + 1 + (target_index - r.begin);
}

std::optional<std::uint32_t> PaperTable::target_index(std::uint32_t source,
                                                      std::uint32_t position) const {
  const auto& r = range_of(source);
  if (position < r.begin) return position;
  if (position > source && position < r.end) return r.begin + (position - source - 1);
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Enumeration

nlohmann::json EnumerationSummary::to_json() const {
  nlohmann::json per_year = nlohmann::json::array();
  for (const auto& y : years) {
    per_year.push_back({{"year", y.year},
                        {"new_papers", y.new_papers},
                        {"admitted_papers", y.admitted_papers},
                        {"incidences", y.incidences},
                        {"coauthor_edges", y.coauthor_edges},
                        {"observations", y.observations},
                        {"flow_events", y.flow_events}});
  }
  return {{"years", std::move(per_year)},
          {"papers_without_year", papers_without_year},
          {"observations", observations},
          {"flow_events", flow_events}};
}

PairEnumerator::PairEnumerator(const corpus::Corpus& corpus, EnumerationOptions options)
    : corpus_(corpus), options_(options) {
  if (options_.max_depth < 0 || options_.max_depth > kMaxSupportedDepth) {
    throw Error("max_depth must be within [0, " + std::to_string(kMaxSupportedDepth) + "]");
  }
  std::vector<PaperId> order;
  for (const auto& p : corpus.papers) {
    if (p.year) {
      order.push_back(p.paper_id);
    } else {
      ++papers_without_year_;
    }
  }
  std::stable_sort(order.begin(), order.end(), [&](PaperId a, PaperId b) {
    return *corpus.papers[a].year < *corpus.papers[b].year;
  });
  table_ = PaperTable::build(corpus, order, options_.max_depth, options_.flow_mode);

  citers_.resize(corpus.papers.size());
  for (const auto& p : corpus.papers) {
    for (PaperId c : p.cited_ids) citers_.at(c).push_back(p.paper_id);
  }
}

EnumerationSummary PairEnumerator::run(const std::function<void(const ObservationBlock&)>& sink) {
  EnumerationSummary summary;
  summary.papers_without_year = papers_without_year_;
  MultiplexGraph graph(corpus_);

  int threads = options_.threads;
#ifdef _OPENMP
  if (threads <= 0) threads = omp_get_max_threads();
#endif
  threads = std::max(threads, 1);

  struct BatchResult {
    std::vector<std::uint32_t> sources;
    std::vector<std::int8_t> codes;
    std::vector<std::vector<std::uint32_t>> flows;
  };

  std::size_t coauthor_edges = 0;
  for (const auto& range : table_.year_ranges) {
    graph.admit_year(range.year);
    const std::size_t n = graph.admitted_count();
    YearSummary ys;
    ys.year = range.year;
    ys.new_papers = range.end - range.begin;
    ys.admitted_papers = n;
    ys.incidences = graph.incidence_count();

    std::vector<std::vector<std::uint32_t>> batches;
    for (std::uint32_t s = range.begin; s < range.end; s += MultiplexGraph::kBatchLanes) {
      std::vector<std::uint32_t> b;
      for (std::uint32_t p = s; p < std::min<std::uint32_t>(range.end, s + MultiplexGraph::kBatchLanes); ++p) {
        b.push_back(p);
      }
      batches.push_back(std::move(b));
    }

    const std::size_t window = static_cast<std::size_t>(threads);
    for (std::size_t w0 = 0; w0 < batches.size(); w0 += window) {
      const std::size_t w1 = std::min(batches.size(), w0 + window);
      std::vector<BatchResult> results(w1 - w0);
      std::vector<std::exception_ptr> failures(w1 - w0);
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
      for (std::size_t bi = w0; bi < w1; ++bi) {
        auto& res = results[bi - w0];
        try {
          res.sources = batches[bi];
          res.codes.resize(res.sources.size() * n);
          graph.batch_distance_codes(res.sources, options_.max_depth, res.codes);
          res.flows.resize(res.sources.size());
          for (std::size_t s = 0; s < res.sources.size(); ++s) {
            const auto src = res.sources[s];
            const auto& paper = corpus_.papers[table_.paper_ids[src]];
            const auto& cited = paper.cited_ids;
            const auto& citing = citers_[paper.paper_id];
            auto& flows = res.flows[s];
            auto consider = [&](PaperId other, bool src_cites, bool other_cites) {
              if (!graph.is_admitted(other)) return;
              const auto pos = graph.position_of(other);
              const auto t = table_.target_index(src, pos);
              if (!t) return;
              if (flow_between(graph.authors_at(src), graph.authors_at(pos), src_cites, other_cites,
                               options_.flow_mode)) {
                flows.push_back(*t);
              }
            };
            std::size_t i = 0, j = 0;
            while (i < cited.size() || j < citing.size()) {
              if (j == citing.size() || (i < cited.size() && cited[i] < citing[j])) {
                consider(cited[i++], true, false);
              } else if (i == cited.size() || citing[j] < cited[i]) {
                consider(citing[j++], false, true);
              } else {
                consider(cited[i], true, true);
                ++i;
                ++j;
              }
            }
            std::sort(flows.begin(), flows.end());
          }
        } catch (...) {
          failures[bi - w0] = std::current_exception();
        }
      }
      for (const auto& f : failures) {
        if (f) std::rethrow_exception(f);
      }

      for (auto& res : results) {
        for (std::size_t s = 0; s < res.sources.size(); ++s) {
          const auto src = res.sources[s];
          std::int8_t* row = res.codes.data() + s * n;
          // Compact the row to the target sequence: [0, begin) then (src, end).
          const std::size_t tail = range.end - src - 1;
          std::memmove(row + range.begin, row + src + 1, tail);
          const std::size_t count = range.begin + tail;
          ObservationBlock block{src, {row, count}, res.flows[s]};
          ys.observations += count;
          ys.flow_events += res.flows[s].size();
          coauthor_edges += static_cast<std::size_t>(std::count(row, row + count, std::int8_t{0}));
          sink(block);
        }
      }
    }
    ys.coauthor_edges = coauthor_edges;
    summary.observations += ys.observations;
    summary.flow_events += ys.flow_events;
    spdlog::info("year {}: {} new papers, {} admitted, {} observations, {} flow events", ys.year,
                 ys.new_papers, ys.admitted_papers, ys.observations, ys.flow_events);
    summary.years.push_back(ys);
  }
  return summary;
}

EnumerationSummary enumerate_pairs(const corpus::Corpus& corpus, const EnumerationOptions& options,
                                   const std::function<void(const PairObservation&)>& visit) {
  const bool any_year = std::any_of(corpus.papers.begin(), corpus.papers.end(),
                                    [](const auto& p) { return p.year.has_value(); });
  if (!corpus.papers.empty() && !any_year) throw Error("corpus has no publication years");
  PairEnumerator enumerator(corpus, options);
  const auto& table = enumerator.table();
  return enumerator.run([&](const ObservationBlock& block) { expand_block(table, block, visit); });
}

std::vector<PairObservation> collect_pairs(const corpus::Corpus& corpus,
                                           const EnumerationOptions& options) {
  std::vector<PairObservation> out;
  enumerate_pairs(corpus, options, [&](const PairObservation& o) { out.push_back(o); });
  return out;
}

// ---------------------------------------------------------------------------
// Histograms

std::string_view to_string(Cohort cohort) {
  switch (cohort) {
    case Cohort::all:
      return "all";
    case Cohort::same_country:
      return "same_country";
    case Cohort::diff_country:
      return "diff_country";
    case Cohort::same_region:
      return "same_region";
    case Cohort::diff_region:
      break;
  }
  return "diff_region";
}

bool in_cohort(const PairObservation& obs, Cohort cohort) {
  switch (cohort) {
    case Cohort::all:
      return true;
    case Cohort::same_country:
      return obs.same_country.value_or(false);
    case Cohort::diff_country:
      return obs.same_country.has_value() && !*obs.same_country;
    case Cohort::same_region:
      return obs.same_region.value_or(false);
    case Cohort::diff_region:
      break;
  }
  return obs.same_region.has_value() && !*obs.same_region;
}

DistanceHistogram::DistanceHistogram(Cohort c, int depth)
    : cohort(c), max_depth(depth), counts(static_cast<std::size_t>(depth) + 1, {0, 0}) {
  if (depth < 0) throw ContractViolation("negative max_depth");
}

void DistanceHistogram::add(const PairObservation& obs) {
  const bool country_cohort = cohort == Cohort::same_country || cohort == Cohort::diff_country;
  const bool region_cohort = cohort == Cohort::same_region || cohort == Cohort::diff_region;
  if ((country_cohort && !obs.same_country) || (region_cohort && !obs.same_region)) {
    ++excluded_geo;
    return;
  }
  if (!in_cohort(obs, cohort)) return;
  if (obs.distance.is_finite(0)) {
    ++excluded_zero;
    return;
  }
  const int k = obs.distance.is_finite() ? obs.distance.value() : -1;
  const std::size_t row = (k >= 1 && k <= max_depth) ? static_cast<std::size_t>(k - 1)
                                                     : static_cast<std::size_t>(max_depth);
  ++counts[row][obs.flow ? 1 : 0];
}

std::uint64_t DistanceHistogram::total() const {
  std::uint64_t t = 0;
  for (const auto& c : counts) t += c[0] + c[1];
  return t;
}

DistanceHistogram distance_histogram(std::span<const PairObservation> observations, Cohort cohort,
                                     int max_depth) {
  DistanceHistogram h(cohort, max_depth);
  for (const auto& o : observations) h.add(o);
  return h;
}

void write_histograms_csv(std::span<const DistanceHistogram> histograms, std::ostream& out) {
  out << "cohort,distance_class,count_flow0,count_flow1\n";
  for (const auto& h : histograms) {
    for (std::size_t row = 0; row < h.counts.size(); ++row) {
      const int cls = row + 1 < h.counts.size() ? static_cast<int>(row) + 1 : -1;
      out << to_string(h.cohort) << ',' << cls << ',' << h.counts[row][0] << ','
          << h.counts[row][1] << '\n';
    }
  }
}

}  // namespace knowflow::graph
