#include "knowflow/sample.hpp"

#include <algorithm>
#include <string>

namespace knowflow::sample {

void SamplingPlan::validate() const {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw Error("alpha must lie in (0, 1]");
  if (!(beta > 0.0 && beta <= 1.0)) throw Error("beta must lie in (0, 1]");
}

nlohmann::json SamplingPlan::to_json() const {
  return {{"alpha", alpha}, {"beta", beta}, {"seed", seed}};
}

double auto_beta(std::uint64_t records_y1, std::uint64_t records_y0) {
  if (records_y1 == 0) throw Error("no flow events; regression undefined");
  if (records_y0 == 0) throw Error("no non-flow records; regression undefined");
  return std::min(1.0, static_cast<double>(records_y1) / static_cast<double>(records_y0));
}

bool keep(const SamplingPlan& plan, const graph::PairObservation& obs) {
  const double rate = obs.flow ? plan.alpha : plan.beta;
  if (rate >= 1.0) return true;
  return pair_uniform(plan.seed, obs.x_id, obs.y_id) < rate;
}

StratumCounts& StratumCounts::operator+=(const StratumCounts& other) {
  records_y1 += other.records_y1;
  records_y0 += other.records_y0;
  sampled_y1 += other.sampled_y1;
  sampled_y0 += other.sampled_y0;
  return *this;
}

StratifiedSampler::StratifiedSampler(SamplingPlan plan)
    : plan_(plan), weight_y1_(1.0 / plan.alpha), weight_y0_(1.0 / plan.beta) {
  plan_.validate();
}

void StratifiedSampler::offer(const graph::PairObservation& obs) {
  auto& c = sample_.counts;
  ++(obs.flow ? c.records_y1 : c.records_y0);
  if (!keep(plan_, obs)) return;
  ++(obs.flow ? c.sampled_y1 : c.sampled_y0);
  sample_.observations.push_back(obs);
  sample_.weights.push_back(obs.flow ? weight_y1_ : weight_y0_);
}

WeightedSample StratifiedSampler::take() { return std::move(sample_); }

WeightedSample stratified_sample(std::span<const graph::PairObservation> observations,
                                 const SamplingPlan& plan) {
  StratifiedSampler sampler(plan);
  for (const auto& o : observations) sampler.offer(o);
  return sampler.take();
}

WeightedSample full_sample(std::span<const graph::PairObservation> observations) {
  return stratified_sample(observations, SamplingPlan{1.0, 1.0, 0});
}

}  // namespace knowflow::sample
