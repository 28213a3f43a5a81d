#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <sstream>

#include "fixtures.hpp"
#include "knowflow/regress.hpp"
#include "knowflow/synth.hpp"

using namespace knowflow;
using namespace knowflow::regress;
using graph::Cohort;
using graph::Distance;
using graph::PairObservation;

namespace {

PairObservation obs(Distance d, bool flow, std::optional<bool> country = {}, std::optional<bool> region = {}) {
  static PaperId next = 0;
  PairObservation o;
  o.x_id = next++;
  o.y_id = next++;
  o.eval_year = 2000;
  o.distance = d;
  o.flow = flow;
  o.same_country = country;
  o.same_region = region;
  return o;
}

sample::WeightedSample unit_weights(std::vector<PairObservation> v) {
  sample::WeightedSample s;
  s.weights.assign(v.size(), 1.0);
  s.observations = std::move(v);
  return s;
}

// Logit data with distances 1..4 or unreachable and a country flag.
sample::WeightedSample random_dataset(std::uint64_t seed, std::size_t n, bool random_weights) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double b = -1.0 - u(rng);
  const double w[4] = {2.0 * u(rng), 1.5 * u(rng), u(rng), 0.5 * u(rng) - 0.25};
  const double g = u(rng) - 0.5;
  sample::WeightedSample s;
  for (std::size_t i = 0; i < n; ++i) {
    const int k = static_cast<int>(rng() % 5);
    const bool country = u(rng) < 0.4;
    const double z = b + (k < 4 ? w[k] : 0.0) + (country ? g : 0.0);
    const bool flow = u(rng) < 1.0 / (1.0 + std::exp(-z));
    const auto d = k < 4 ? Distance::finite(k + 1) : Distance::infinite();
    s.observations.push_back(obs(d, flow, country, u(rng) < 0.5 ? std::optional<bool>() : std::optional<bool>(country)));
    s.weights.push_back(random_weights ? (flow ? 1.0 : 1.0 + 9.0 * u(rng)) : 1.0);
  }
  return s;
}

double logit(double p) { return std::log(p / (1.0 - p)); }

}  // namespace

TEST_SUITE("encode") {
  TEST_CASE("examples") {
    const auto x = encode(obs(Distance::finite(2), false), 9, GeoDummy::none);
    REQUIRE(x);
    Vector<double> expected = Vector<double>::Zero(9);
    expected(1) = 1.0;
    CHECK(*x == expected);
    CHECK(encode(obs(Distance::infinite(), false), 9, GeoDummy::none)->isZero());
    CHECK(encode(obs(Distance::beyond_horizon(10), false), 9, GeoDummy::none)->isZero());
    CHECK(encode(obs(Distance::finite(12), false), 9, GeoDummy::none)->isZero());
    const auto g = encode(obs(Distance::finite(1), false, true), 9, GeoDummy::country);
    REQUIRE(g);
    CHECK(g->size() == 10);
    CHECK((*g)(0) == 1.0);
    CHECK((*g)(9) == 1.0);
    CHECK(g->sum() == 2.0);
  }

  TEST_CASE("distance zero never reaches encoding") {
    CHECK_THROWS_AS(encode(obs(Distance::finite(0), false), 9, GeoDummy::none), ContractViolation);
  }

  TEST_CASE("absent geo flag rejects the observation") {
    CHECK_FALSE(encode(obs(Distance::finite(1), false, std::nullopt, true), 9, GeoDummy::country));
    CHECK(encode(obs(Distance::finite(1), false, std::nullopt, true), 9, GeoDummy::region));
  }
}

TEST_SUITE("fit") {
  TEST_CASE("intercept-only fit equals the weighted log-odds") {
    auto s = random_dataset(1, 3000, true);
    double pos = 0, total = 0;
    for (std::size_t i = 0; i < s.weights.size(); ++i) {
      total += s.weights[i];
      if (s.observations[i].flow) pos += s.weights[i];
    }
    const double pbar = pos / total;
    const auto m = fit(s, CohortSpec::distance_only(Cohort::all), 0, {});
    CHECK(std::abs(m.intercept - logit(pbar)) < 1e-9);
    const auto o = synth::oracle_fit(s, CohortSpec::distance_only(Cohort::all), 0, {});
    CHECK(std::abs(o.intercept - logit(pbar)) < 1e-9);
  }

  TEST_CASE("hand-built saturated data matches closed form") {
    // unreachable: one flow of three; distance 1: two flows of three
    std::vector<PairObservation> v = {obs(Distance::infinite(), true),  obs(Distance::infinite(), false),
                                      obs(Distance::infinite(), false), obs(Distance::finite(1), true),
                                      obs(Distance::finite(1), true),   obs(Distance::finite(1), false)};
    const auto m = fit(unit_weights(v), CohortSpec::distance_only(Cohort::all), 1, {1e-14, 100, 0.0});
    CHECK(m.intercept == doctest::Approx(std::log(0.5)).epsilon(1e-12));
    CHECK(*m.distance[0] == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-12));
    CHECK(m.diagnostics.n_included == 6);
  }

  TEST_CASE("distance-only fits are saturated: coefficients are group log-odds contrasts") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto s = random_dataset(seed + 10, 4000, true);
      std::map<int, std::pair<double, double>> groups;  // class -> (pos, total)
      for (std::size_t i = 0; i < s.weights.size(); ++i) {
        const auto& o = s.observations[i];
        auto& g = groups[o.distance.is_finite() ? o.distance.value() : 0];
        g.second += s.weights[i];
        if (o.flow) g.first += s.weights[i];
      }
      const auto m = fit(s, CohortSpec::distance_only(Cohort::all), 4, {1e-13, 100, 0.0});
      const double base = logit(groups[0].first / groups[0].second);
      CHECK(std::abs(m.intercept - base) < 1e-9);
      for (int k = 1; k <= 4; ++k) {
        const double expected = logit(groups[k].first / groups[k].second) - base;
        CHECK(std::abs(*m.distance[static_cast<std::size_t>(k - 1)] - expected) < 1e-8);
      }
    }
  }

  TEST_CASE("IRLS agrees with the gradient-ascent oracle") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto s = random_dataset(seed + 100, 2500, seed % 2 == 0);
      for (const auto& spec : {CohortSpec::joint_country(), CohortSpec::distance_only(Cohort::diff_country)}) {
        CAPTURE(seed);
        CAPTURE(spec.name());
        const auto a = fit(s, spec, 4, {});
        const auto b = synth::oracle_fit(s, spec, 4, {});
        CHECK(std::abs(a.intercept - b.intercept) < 1e-5);
        for (std::size_t k = 0; k < 4; ++k) CHECK(std::abs(*a.distance[k] - *b.distance[k]) < 1e-5);
        if (spec.geo() != GeoDummy::none) CHECK(std::abs(*a.geo - *b.geo) < 1e-5);
        CHECK(a.diagnostics.n_included == b.diagnostics.n_included);
        CHECK(a.diagnostics.n_rejected == b.diagnostics.n_rejected);
        CHECK(a.diagnostics.grad_norm <= 1e-8);
      }
    }
  }

  TEST_CASE("cohort filters and diagnostics") {
    std::vector<PairObservation> v = {
        obs(Distance::finite(0), true, true),      obs(Distance::finite(1), true, true),
        obs(Distance::finite(1), false, true),     obs(Distance::infinite(), true, false),
        obs(Distance::infinite(), false, false),   obs(Distance::finite(15), false, false),
        obs(Distance::finite(2), true),            obs(Distance::finite(1), false, false),
        obs(Distance::finite(1), true, false),     obs(Distance::infinite(), true, true),
        obs(Distance::infinite(), false, true),
    };
    const auto m = fit(unit_weights(v), CohortSpec::joint_country(), 3, {1e-10, 100, 0.0});
    CHECK(m.diagnostics.n_zero_distance == 1);
    CHECK(m.diagnostics.n_rejected == 1);
    CHECK(m.diagnostics.n_folded == 1);
    CHECK(m.diagnostics.n_included == 9);
    CHECK_FALSE(m.distance[1].has_value());  // distance 2 only seen without a flag
    CHECK_FALSE(m.distance[2].has_value());
    CHECK(m.geo.has_value());
    const auto json = m.to_json();
    CHECK(json["coefficients"]["d2"].is_null());
    CHECK(json["coefficients"].contains("is_same_country"));
  }

  TEST_CASE("weight k equals k unit copies") {
    const auto s = random_dataset(7, 1500, false);
    sample::WeightedSample copies, weighted;
    std::mt19937_64 rng(3);
    for (std::size_t i = 0; i < s.observations.size(); ++i) {
      const int k = 1 + static_cast<int>(rng() % 4);
      weighted.observations.push_back(s.observations[i]);
      weighted.weights.push_back(k);
      for (int c = 0; c < k; ++c) {
        copies.observations.push_back(s.observations[i]);
        copies.weights.push_back(1.0);
      }
    }
    const auto a = fit(weighted, CohortSpec::joint_country(), 4, {});
    const auto b = fit(copies, CohortSpec::joint_country(), 4, {});
    CHECK(std::abs(a.intercept - b.intercept) < 1e-8);
    for (std::size_t k = 0; k < 4; ++k) CHECK(std::abs(*a.distance[k] - *b.distance[k]) < 1e-8);
    CHECK(std::abs(*a.geo - *b.geo) < 1e-8);
  }

  TEST_CASE("observation order does not matter") {
    auto s = random_dataset(8, 2000, true);
    const auto a = fit(s, CohortSpec::joint_country(), 4, {});
    std::vector<std::size_t> idx(s.observations.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::mt19937_64 rng(4);
    std::shuffle(idx.begin(), idx.end(), rng);
    sample::WeightedSample t;
    for (auto i : idx) {
      t.observations.push_back(s.observations[i]);
      t.weights.push_back(s.weights[i]);
    }
    const auto b = fit(t, CohortSpec::joint_country(), 4, {});
    CHECK(std::abs(a.intercept - b.intercept) < 1e-8);
    CHECK(std::abs(*a.geo - *b.geo) < 1e-8);
  }

  TEST_CASE("failure kinds") {
    const CohortSpec all = CohortSpec::distance_only(Cohort::all);
    auto kind_of = [&](const sample::WeightedSample& s, int d_max, SolverConfig c = {}) {
      try {
        fit(s, all, d_max, c);
      } catch (const FitError& e) {
        return std::optional<FitFailure>(e.kind());
      }
      return std::optional<FitFailure>();
    };
    CHECK(kind_of(unit_weights({}), 2) == FitFailure::empty);
    CHECK(kind_of(unit_weights({obs(Distance::finite(0), true)}), 2) == FitFailure::empty);
    CHECK(kind_of(unit_weights({obs(Distance::finite(1), true), obs(Distance::infinite(), true)}), 2) ==
          FitFailure::degenerate_cohort);

    // every distance-1 pair flows: quasi-separation
    const auto separated = unit_weights({obs(Distance::finite(1), true), obs(Distance::finite(1), true),
                                         obs(Distance::infinite(), true), obs(Distance::infinite(), false)});
    CHECK(kind_of(separated, 2) == FitFailure::separation);
    CHECK_FALSE(kind_of(separated, 2, {1e-8, 100, 1e-6}).has_value());
    const auto ridge = fit(separated, all, 2, {1e-8, 100, 1e-6});
    CHECK(std::isfinite(*ridge.distance[0]));
    CHECK(*ridge.distance[0] > 5.0);

    const auto s = random_dataset(9, 500, false);
    CHECK(kind_of(s, 4, {1e-8, 0, 0.0}) == FitFailure::non_convergence);
  }

  TEST_CASE("constant and diverging columns in the core solver") {
    Matrix<double> X(3, 1);
    X << 1, 1, 1;
    Vector<double> wp(3), wn(3);
    wp << 1, 2, 1;
    wn << 2, 1, 1;
    CHECK_THROWS_AS(fit_irls(X, wp, wn, SolverConfig{}), FitError);
    try {
      fit_irls(X, wp, wn, SolverConfig{});
    } catch (const FitError& e) {
      CHECK(e.kind() == FitFailure::singular);
    }
    Matrix<double> Y(3, 1);
    Y << 0.5, 1.5, 3.0;  // non-binary, separated along a continuous column
    Vector<double> p(3), n(3);
    p << 0, 0, 1;
    n << 1, 1, 0;
    try {
      fit_irls(Y, p, n, SolverConfig{0.0, 100, 0.0});
      FAIL("expected failure");
    } catch (const FitError& e) {
      CHECK(e.kind() == FitFailure::separation);
    }
  }
}

TEST_SUITE("likelihood core") {
  TEST_CASE("analytic gradient matches finite differences") {
    std::mt19937_64 rng(21);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
      const Eigen::Index n = 40, p = 3;
      Matrix<double> X(n, p);
      Vector<double> wp(n), wn(n), theta(p + 1);
      for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < p; ++j) X(i, j) = normal(rng);
        wp(i) = std::abs(normal(rng));
        wn(i) = std::abs(normal(rng));
      }
      for (Eigen::Index j = 0; j <= p; ++j) theta(j) = normal(rng);
      const auto g = weighted_gradient(X, wp, wn, theta);
      for (Eigen::Index j = 0; j <= p; ++j) {
        const double h = 1e-6;
        Vector<double> up = theta, down = theta;
        up(j) += h;
        down(j) -= h;
        const double fd = (weighted_log_likelihood(X, wp, wn, up) - weighted_log_likelihood(X, wp, wn, down)) / (2 * h);
        CHECK(std::abs(fd - g(j)) <= 1e-5 * std::max(1.0, std::abs(g(j))));
      }
    }
  }

  TEST_CASE("objective never decreases across iterations") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      std::mt19937_64 rng(seed);
      std::normal_distribution<double> normal(0.0, 1.0);
      const Eigen::Index n = 200, p = 4;
      Matrix<double> X(n, p);
      Vector<double> wp(n), wn(n);
      for (Eigen::Index i = 0; i < n; ++i) {
        double z = -1.0;
        for (Eigen::Index j = 0; j < p; ++j) {
          X(i, j) = normal(rng) * 2.0;
          z += X(i, j) * (j + 1) * 0.7;
        }
        const bool y = std::uniform_real_distribution<double>(0, 1)(rng) < 1 / (1 + std::exp(-z));
        wp(i) = y ? 1.5 : 0.0;
        wn(i) = y ? 0.0 : 0.5;
      }
      const auto fit = fit_irls(X, wp, wn, SolverConfig{});
      for (std::size_t k = 1; k < fit.objective_trace.size(); ++k) {
        const double f0 = fit.objective_trace[k - 1];
        CHECK(fit.objective_trace[k] >= f0 - 1e-12 * (std::abs(f0) + 1));
      }
      const auto g = weighted_gradient(X, wp, wn, fit.theta);
      CHECK(g.cwiseAbs().maxCoeff() / (wp.sum() + wn.sum()) <= 1e-8);
    }
  }

  TEST_CASE("scalar type is a template parameter") {
    Matrix<long double> X(4, 1);
    X << 0, 0, 1, 1;
    Vector<long double> wp(4), wn(4);
    wp << 1, 0, 2, 0;
    wn << 0, 3, 0, 1;
    const auto f = fit_irls(X, wp, wn, SolverConfig{});
    CHECK(static_cast<double>(f.theta(0)) == doctest::Approx(std::log(1.0 / 3.0)));
    CHECK(static_cast<double>(f.theta(1)) == doctest::Approx(std::log(2.0) - std::log(1.0 / 3.0)));
  }
}

TEST_SUITE("cohort suite") {
  TEST_CASE("corpus without geography fits only the unrestricted cohort") {
    auto s = random_dataset(5, 3000, false);
    for (auto& o : s.observations) {
      o.same_country.reset();
      o.same_region.reset();
    }
    const ObservationSource source = [&](const auto& visit) {
      for (const auto& o : s.observations) visit(o);
    };
    const auto outcomes = cohort_suite(source, {1.0, std::nullopt, 3}, 4, {});
    REQUIRE(outcomes.size() == 7);
    CHECK(outcomes[0].spec.name() == "all");
    CHECK(outcomes[0].model.has_value());
    for (std::size_t i = 1; i < outcomes.size(); ++i) {
      CHECK_FALSE(outcomes[i].model.has_value());
      CHECK(outcomes[i].failure == FitFailure::degenerate_cohort);
    }
    CHECK(outcomes[5].spec.name() == "joint_country");
    CHECK(outcomes[6].spec.name() == "joint_region");
  }

  TEST_CASE("auto beta balances each cohort") {
    const auto s = random_dataset(6, 5000, false);
    const ObservationSource source = [&](const auto& visit) {
      for (const auto& o : s.observations) visit(o);
    };
    const auto outcomes = cohort_suite(source, {1.0, std::nullopt, 3}, 4, {});
    for (const auto& o : outcomes) {
      REQUIRE(o.model.has_value());
      CHECK(o.plan.beta == doctest::Approx(double(o.counts.records_y1) / double(o.counts.records_y0)));
      CHECK(o.counts.sampled_y1 == o.counts.records_y1);
    }
    std::ostringstream csv;
    write_coefficients_csv(outcomes, csv);
    const auto text = csv.str();
    CHECK(text.rfind("cohort,variable,distance_index,coefficient\nall,intercept,,", 0) == 0);
    CHECK(text.find("joint_region,is_same_region,,") != std::string::npos);
    CHECK(std::count(text.begin(), text.end(), '\n') == 1 + 5 * 5 + 2 * 6);
  }

  TEST_CASE("the five-paper corpus reports failures instead of crashing") {
    const auto pairs = graph::collect_pairs(fixtures::figure1(), {});
    const ObservationSource source = [&](const auto& visit) {
      for (const auto& o : pairs) visit(o);
    };
    const auto outcomes = cohort_suite(source, {1.0, std::nullopt, 1}, 9, {});
    for (const auto& o : outcomes) {
      CHECK_FALSE(o.model.has_value());
      CHECK_FALSE(o.error.empty());
    }
  }
}
