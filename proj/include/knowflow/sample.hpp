#pragma once

// Endogenous stratified sampling with inverse-probability weights. Every flow
// pair is kept with probability alpha and every non-flow pair with
// probability beta; kept pairs carry weight 1/alpha or 1/beta.

#include <cstdint>
#include <span>
#include <vector>

#include <json.hpp>

#include "knowflow/graph.hpp"

namespace knowflow::sample {

struct SamplingPlan {
  double alpha = 1.0;
  double beta = 1.0;
  std::uint64_t seed = 0;

  /// Throws Error unless 0 < alpha <= 1 and 0 < beta <= 1.
  void validate() const;
  nlohmann::json to_json() const;
};

/// Beta that balances the strata with alpha = 1, clamped to 1.
/// Throws Error when there are no flow records or no non-flow records.
double auto_beta(std::uint64_t records_y1, std::uint64_t records_y0);

/// Keep decision: a pure function of (seed, x_id, y_id) and the stratum rate.
bool keep(const SamplingPlan& plan, const graph::PairObservation& obs);

struct StratumCounts {
  std::uint64_t records_y1 = 0;
  std::uint64_t records_y0 = 0;
  std::uint64_t sampled_y1 = 0;
  std::uint64_t sampled_y0 = 0;

  StratumCounts& operator+=(const StratumCounts& other);
  bool operator==(const StratumCounts&) const = default;
};

struct WeightedSample {
  std::vector<graph::PairObservation> observations;
  std::vector<double> weights;
  StratumCounts counts;
};

/// Streaming form: offer() every observation, then take() the sample.
class StratifiedSampler {
 public:
  explicit StratifiedSampler(SamplingPlan plan);

  void offer(const graph::PairObservation& obs);
  const StratumCounts& counts() const { return sample_.counts; }
  WeightedSample take();

 private:
  SamplingPlan plan_;
  double weight_y1_;
  double weight_y0_;
  WeightedSample sample_;
};

WeightedSample stratified_sample(std::span<const graph::PairObservation> observations,
                                 const SamplingPlan& plan);

/// Unit-weight sample holding every observation.
WeightedSample full_sample(std::span<const graph::PairObservation> observations);

}  // namespace knowflow::sample
