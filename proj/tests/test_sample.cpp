#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "knowflow/sample.hpp"

using namespace knowflow;
using namespace knowflow::sample;
using graph::Distance;
using graph::PairObservation;

namespace {

// Fixed synthetic stream: n pairs, one in `every` a flow event.
std::vector<PairObservation> stream(std::size_t n, std::size_t every) {
  std::vector<PairObservation> out;
  for (std::size_t i = 0; i < n; ++i) {
    PairObservation o;
    o.x_id = static_cast<PaperId>(i / 97);
    o.y_id = static_cast<PaperId>(100000 + i);
    o.eval_year = 2000 + static_cast<int>(i % 5);
    o.distance = i % 4 == 3 ? Distance::infinite() : Distance::finite(static_cast<int>(i % 4) + 1);
    o.flow = i % every == 0;
    out.push_back(o);
  }
  return out;
}

}  // namespace

TEST_SUITE("auto_beta") {
  TEST_CASE("ratio and clamp") {
    CHECK(auto_beta(1000, 1000000) == doctest::Approx(0.001));
    CHECK(auto_beta(500, 400) == 1.0);
  }

  TEST_CASE("no flow events") {
    CHECK_THROWS_WITH_AS(auto_beta(0, 10), "no flow events; regression undefined", Error);
  }

  TEST_CASE("paper-scale corpus lands near citations over papers squared") {
    const double papers = 152406, citations = 6294099;
    const double pairs = papers * (papers - 1) / 2;
    const double beta = auto_beta(static_cast<std::uint64_t>(citations),
                                  static_cast<std::uint64_t>(pairs - citations));
    const double approx = citations / (papers * papers);
    // unordered pairs number papers^2 / 2, hence the factor of two
    CHECK(beta / approx == doctest::Approx(2.0).epsilon(0.01));
  }
}

TEST_SUITE("stratified sampling") {
  TEST_CASE("plan validation") {
    CHECK_THROWS_AS((SamplingPlan{0.0, 0.5, 1}.validate()), Error);
    CHECK_THROWS_AS((SamplingPlan{1.0, 1.5, 1}.validate()), Error);
    CHECK_THROWS_AS(StratifiedSampler(SamplingPlan{1.0, 0.0, 1}), Error);
    CHECK_NOTHROW((SamplingPlan{1.0, 1.0, 1}.validate()));
  }

  TEST_CASE("alpha one keeps every flow pair; weights follow the stratum") {
    const auto obs = stream(100000, 50);
    const auto s = stratified_sample(obs, {1.0, 0.01, 42});
    CHECK(s.counts.records_y1 == 2000);
    CHECK(s.counts.sampled_y1 == 2000);
    CHECK(s.counts.records_y0 == 98000);
    const double n = 98000, sigma = std::sqrt(n * 0.01 * 0.99);
    CHECK(std::abs(static_cast<double>(s.counts.sampled_y0) - 0.01 * n) <= 3 * sigma);
    REQUIRE(s.weights.size() == s.observations.size());
    for (std::size_t i = 0; i < s.weights.size(); ++i) {
      CHECK(s.weights[i] == (s.observations[i].flow ? 1.0 : 100.0));
    }
    CHECK(s.counts.sampled_y0 <= s.counts.records_y0);
  }

  TEST_CASE("sample sizes concentrate binomially") {
    const auto obs = stream(100000, 1000000);  // a single flow event
    const double n = 99999, beta = 0.05, sigma = std::sqrt(n * beta * (1 - beta));
    int within = 0;
    double mean = 0.0;
    const int seeds = 40;
    for (int seed = 0; seed < seeds; ++seed) {
      const auto s = stratified_sample(obs, {1.0, beta, static_cast<std::uint64_t>(seed)});
      const double dev = static_cast<double>(s.counts.sampled_y0) - n * beta;
      within += std::abs(dev) <= 3 * sigma;
      mean += static_cast<double>(s.counts.sampled_y0) / seeds;
    }
    CHECK(within >= seeds - 1);
    CHECK(std::abs(mean - n * beta) <= 3 * sigma / std::sqrt(double(seeds)));
  }

  TEST_CASE("Horvitz-Thompson sums are unbiased") {
    const auto obs = stream(20000, 20);
    auto g = [](const PairObservation& o) {
      return (o.distance.is_finite() ? o.distance.value() : 0.5) + (o.flow ? 3.0 : 0.0);
    };
    double truth = 0.0;
    for (const auto& o : obs) truth += g(o);
    double average = 0.0;
    const int seeds = 1000;
    for (int seed = 0; seed < seeds; ++seed) {
      const auto s = stratified_sample(obs, {0.5, 0.05, static_cast<std::uint64_t>(seed) * 7919});
      double estimate = 0.0;
      for (std::size_t i = 0; i < s.observations.size(); ++i) estimate += s.weights[i] * g(s.observations[i]);
      average += estimate / seeds;
    }
    CHECK(std::abs(average - truth) / truth < 0.01);
  }

  TEST_CASE("sample does not depend on arrival order") {
    auto obs = stream(5000, 10);
    const SamplingPlan plan{0.7, 0.2, 99};
    auto sorted = [](WeightedSample s) {
      std::vector<std::pair<PairObservation, double>> v;
      for (std::size_t i = 0; i < s.observations.size(); ++i) v.emplace_back(s.observations[i], s.weights[i]);
      std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) {
        return std::pair(a.first.x_id, a.first.y_id) < std::pair(b.first.x_id, b.first.y_id);
      });
      return v;
    };
    const auto first = sorted(stratified_sample(obs, plan));
    std::mt19937_64 rng(1);
    std::shuffle(obs.begin(), obs.end(), rng);
    const auto second = stratified_sample(obs, plan);
    CHECK(sorted(second) == first);
    CHECK(second.counts.sampled_y1 + second.counts.sampled_y0 == first.size());
  }

  TEST_CASE("parallel partitions merge to the same counts") {
    const auto obs = stream(9000, 7);
    const SamplingPlan plan{1.0, 0.3, 5};
    StratumCounts merged;
    for (std::size_t part = 0; part < 3; ++part) {
      merged += stratified_sample(std::span(obs).subspan(part * 3000, 3000), plan).counts;
    }
    CHECK(merged == stratified_sample(obs, plan).counts);
  }

  TEST_CASE("full sample keeps everything at unit weight") {
    const auto obs = stream(1000, 3);
    const auto s = full_sample(obs);
    CHECK(s.observations == obs);
    CHECK(std::all_of(s.weights.begin(), s.weights.end(), [](double w) { return w == 1.0; }));
  }
}
