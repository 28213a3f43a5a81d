#pragma once

// Synthetic corpora with known ground truth, and brute-force oracles that
// share no code with the optimized distance and regression paths.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "knowflow/corpus.hpp"
#include "knowflow/graph.hpp"
#include "knowflow/regress.hpp"
#include "knowflow/sample.hpp"

namespace knowflow::synth {

/// Citation logit as a function of the realized pair: intercept plus the
/// effect of distance class i (1-based) plus geography effects.
struct PlantedLogit {
  double intercept = -6.0;
  std::vector<double> distance_effects;
  double same_country = 0.0;
  double same_region = 0.0;

  double logit(const graph::PairObservation& obs) const;
};

struct GeneratorParams {
  std::size_t n_papers = 1000;
  int first_year = 2006;
  int n_years = 5;
  double authors_mean = 6.8;
  int authors_max = 40;
  std::size_t author_pool = 5000;
  double repeat_collaboration = 0.5;  // chance a team slot reuses a prior collaborator
  double citations_mean = 43.3;
  int citations_max = 400;
  /// When set, citations are redrawn per pair from the planted logit of the
  /// pair's contextualized distance instead of uniformly.
  std::optional<PlantedLogit> planted;
  int planted_max_depth = 10;
  std::vector<std::string> countries = {"BR", "US", "FR", "DE", "CN", "JP", "GB", "IN"};
  int regions_per_country = 4;
  double geo_probability = 0.9;  // chance an author slot carries geography

  /// Throws Error for out-of-range values or infeasible citation counts.
  void validate() const;
  nlohmann::json to_json() const;
  /// Missing keys keep their defaults.
  static GeneratorParams from_json(const nlohmann::json& j);
};

struct GeneratorStats {
  std::size_t papers = 0;
  std::size_t author_slots = 0;
  std::size_t citations = 0;
  std::size_t distinct_authors = 0;
  double mean_authors = 0.0;
  double mean_citations = 0.0;

  nlohmann::json to_json() const;
};

struct SynthCorpus {
  std::vector<corpus::RawRecord> records;  // what `synth` writes as JSONL
  corpus::Corpus corpus;                   // resolve_papers(records)
  GeneratorStats stats;
};

/// Deterministic in (params, seed). Paper i is the i-th in publication order.
SynthCorpus generate(const GeneratorParams& params, std::uint64_t seed);

void write_jsonl(const std::vector<corpus::RawRecord>& records, std::ostream& out);

struct OracleResult {
  int year = 0;
  std::vector<PaperId> papers;  // papers published up to `year`, ascending id
  Eigen::MatrixXi distances;    // intermediate papers; -1 when disconnected; diagonal unused
  Eigen::MatrixXi flow;         // y(X, Y) per pair; diagonal unused

  /// nullopt when disconnected. Throws ContractViolation for unknown papers.
  std::optional<int> distance(PaperId a, PaperId b) const;
  int index_of(PaperId paper) const;
};

inline constexpr std::size_t kOracleMaxPapers = 2000;

/// Materializes the paper-paper co-authorship graph of the slice and runs
/// BFS from every paper. Refuses slices above kOracleMaxPapers.
OracleResult oracle_distances(const corpus::Corpus& corpus, int year,
                              graph::FlowMode mode = graph::FlowMode::strict);

/// Exhaustive pair stream built from oracle_distances, in the same pairing
/// convention as graph::enumerate_pairs. Unreachable pairs are Infinite.
std::vector<graph::PairObservation> oracle_pairs(const corpus::Corpus& corpus, graph::FlowMode mode);

/// Weighted logistic fit by plain gradient ascent with backtracking line
/// search on per-observation rows.
regress::RegressionModel oracle_fit(const sample::WeightedSample& sample,
                                    const regress::CohortSpec& spec, int d_max,
                                    const regress::SolverConfig& config);

}  // namespace knowflow::synth
