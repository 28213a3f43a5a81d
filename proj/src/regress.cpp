#include "knowflow/regress.hpp"

#include <map>
#include <ostream>
#include <sstream>

#include <spdlog/spdlog.h>

namespace knowflow::regress {

nlohmann::json SolverConfig::to_json() const {
  return {{"tolerance", tolerance}, {"max_iterations", max_iterations}, {"ridge", ridge}};
}

std::string_view to_string(FitFailure failure) {
  switch (failure) {
    case FitFailure::empty:
      return "empty";
    case FitFailure::degenerate_cohort:
      return "degenerate_cohort";
    case FitFailure::separation:
      return "separation";
    case FitFailure::singular:
      return "singular";
    case FitFailure::non_convergence:
      break;
  }
  return "non_convergence";
}

std::optional<Vector<double>> encode(const graph::PairObservation& obs, int d_max, GeoDummy geo) {
  if (obs.distance.is_finite(0)) {
    throw ContractViolation("pairs at distance 0 are excluded before encoding");
  }
  if (d_max < 0) throw ContractViolation("negative d_max");
  std::optional<bool> flag;
  if (geo == GeoDummy::country) {
    if (!obs.same_country) return std::nullopt;
    flag = obs.same_country;
  } else if (geo == GeoDummy::region) {
    if (!obs.same_region) return std::nullopt;
    flag = obs.same_region;
  }
  Vector<double> x = Vector<double>::Zero(d_max + (flag ? 1 : 0));
  if (obs.distance.is_finite() && obs.distance.value() <= d_max) x(obs.distance.value() - 1) = 1.0;
  if (flag) x(d_max) = *flag ? 1.0 : 0.0;
  return x;
}

std::vector<CohortSpec> CohortSpec::suite() {
  std::vector<CohortSpec> specs;
  for (auto c : graph::kAllCohorts) specs.push_back(distance_only(c));
  specs.push_back(joint_country());
  specs.push_back(joint_region());
  return specs;
}

GeoDummy CohortSpec::geo() const {
  switch (kind) {
    case Kind::joint_country:
      return GeoDummy::country;
    case Kind::joint_region:
      return GeoDummy::region;
    case Kind::distance_only:
      break;
  }
  return GeoDummy::none;
}

std::string CohortSpec::name() const {
  switch (kind) {
    case Kind::joint_country:
      return "joint_country";
    case Kind::joint_region:
      return "joint_region";
    case Kind::distance_only:
      break;
  }
  return std::string(graph::to_string(cohort));
}

bool CohortSpec::has_required_flags(const graph::PairObservation& obs) const {
  using graph::Cohort;
  if (kind == Kind::joint_country) return obs.same_country.has_value();
  if (kind == Kind::joint_region) return obs.same_region.has_value();
  switch (cohort) {
    case Cohort::same_country:
    case Cohort::diff_country:
      return obs.same_country.has_value();
    case Cohort::same_region:
    case Cohort::diff_region:
      return obs.same_region.has_value();
    case Cohort::all:
      break;
  }
  return true;
}

bool CohortSpec::includes(const graph::PairObservation& obs) const {
  if (!has_required_flags(obs)) return false;
  return kind != Kind::distance_only || graph::in_cohort(obs, cohort);
}

std::string RegressionModel::geo_name() const {
  switch (spec.geo()) {
    case GeoDummy::country:
      return "is_same_country";
    case GeoDummy::region:
      return "is_same_region";
    case GeoDummy::none:
      break;
  }
  return {};
}

nlohmann::json RegressionModel::to_json() const {
  nlohmann::json coefficients = {{"intercept", intercept}};
  for (int i = 1; i <= d_max; ++i) {
    const auto& c = distance[static_cast<std::size_t>(i - 1)];
    coefficients["d" + std::to_string(i)] = c ? nlohmann::json(*c) : nlohmann::json(nullptr);
  }
  if (spec.geo() != GeoDummy::none) {
    coefficients[geo_name()] = geo ? nlohmann::json(*geo) : nlohmann::json(nullptr);
  }
  return {{"cohort", spec.name()},
          {"coefficients", std::move(coefficients)},
          {"diagnostics",
           {{"iterations", diagnostics.iterations},
            {"loglik", diagnostics.log_likelihood},
            {"grad_norm", diagnostics.grad_norm},
            {"n_included", diagnostics.n_included},
            {"n_rejected", diagnostics.n_rejected},
            {"n_zero_distance", diagnostics.n_zero_distance},
            {"n_folded", diagnostics.n_folded},
            {"weight_total", diagnostics.weight_total}}}};
}

RegressionModel fit(const sample::WeightedSample& sample, const CohortSpec& spec, int d_max,
                    const SolverConfig& config) {
  if (sample.observations.size() != sample.weights.size()) {
    throw ContractViolation("sample weights do not match observations");
  }
  const GeoDummy geo = spec.geo();
  const int width = d_max + (geo == GeoDummy::none ? 0 : 1);

  RegressionModel model;
  model.spec = spec;
  model.d_max = d_max;
  auto& diag = model.diagnostics;

  // Pattern (distance slot, geo flag) -> (positive weight, negative weight).
  // Slot 0 is the unreachable baseline.
  std::map<std::pair<int, int>, std::pair<double, double>> patterns;
  for (std::size_t i = 0; i < sample.observations.size(); ++i) {
    const auto& obs = sample.observations[i];
    if (!spec.has_required_flags(obs)) {
      ++diag.n_rejected;
      continue;
    }
    if (!spec.includes(obs)) continue;
    if (obs.distance.is_finite(0)) {
      ++diag.n_zero_distance;
      continue;
    }
    const auto x = encode(obs, d_max, geo);
    if (!x) {
      ++diag.n_rejected;
      continue;
    }
    int slot = 0;
    for (int k = 0; k < d_max; ++k) {
      if ((*x)(k) != 0.0) slot = k + 1;
    }
    if (obs.distance.is_finite() && obs.distance.value() > d_max) ++diag.n_folded;
    const int flag = geo == GeoDummy::none ? 0 : static_cast<int>((*x)(d_max));
    auto& w = patterns[{slot, flag}];
    (obs.flow ? w.first : w.second) += sample.weights[i];
    ++diag.n_included;
  }

  // Features that never fire are not identifiable; solve without them.
  std::vector<bool> active(static_cast<std::size_t>(width), false);
  for (const auto& [key, w] : patterns) {
    if (key.first > 0) active[static_cast<std::size_t>(key.first - 1)] = true;
    if (geo != GeoDummy::none && key.second == 1) active[static_cast<std::size_t>(d_max)] = true;
  }
  std::vector<int> columns;
  for (int j = 0; j < width; ++j) {
    if (active[static_cast<std::size_t>(j)]) columns.push_back(j);
  }

  const auto rows = static_cast<Eigen::Index>(patterns.size());
  Matrix<double> X = Matrix<double>::Zero(rows, static_cast<Eigen::Index>(columns.size()));
  Vector<double> w_pos(rows), w_neg(rows);
  Eigen::Index r = 0;
  for (const auto& [key, w] : patterns) {
    for (std::size_t c = 0; c < columns.size(); ++c) {
      const int j = columns[c];
      const bool on = j < d_max ? key.first == j + 1 : key.second == 1;
      X(r, static_cast<Eigen::Index>(c)) = on ? 1.0 : 0.0;
    }
    w_pos(r) = w.first;
    w_neg(r) = w.second;
    ++r;
  }
  diag.weight_total = w_pos.sum() + w_neg.sum();

  const auto result = fit_irls(X, w_pos, w_neg, config);
  diag.iterations = result.diagnostics.iterations;
  diag.log_likelihood = result.diagnostics.log_likelihood;
  diag.grad_norm = result.diagnostics.grad_norm;

  model.intercept = result.theta(0);
  model.distance.assign(static_cast<std::size_t>(d_max), std::nullopt);
  for (std::size_t c = 0; c < columns.size(); ++c) {
    const double value = result.theta(static_cast<Eigen::Index>(c) + 1);
    if (columns[c] < d_max) {
      model.distance[static_cast<std::size_t>(columns[c])] = value;
    } else {
      model.geo = value;
    }
  }
  return model;
}

nlohmann::json SuitePlan::to_json() const {
  return {{"alpha", alpha},
          {"beta", beta ? nlohmann::json(*beta) : nlohmann::json("auto")},
          {"seed", seed}};
}

std::vector<CohortOutcome> cohort_suite(const ObservationSource& source, const SuitePlan& plan,
                                        int d_max, const SolverConfig& config) {
  const auto specs = CohortSpec::suite();
  std::vector<CohortOutcome> outcomes(specs.size());
  std::vector<sample::StratumCounts> records(specs.size());
  auto eligible = [](const CohortSpec& spec, const graph::PairObservation& obs) {
    return spec.includes(obs) && !obs.distance.is_finite(0);
  };

  source([&](const graph::PairObservation& obs) {
    for (std::size_t i = 0; i < specs.size(); ++i) {
      if (eligible(specs[i], obs)) ++(obs.flow ? records[i].records_y1 : records[i].records_y0);
    }
  });

  std::vector<std::optional<sample::StratifiedSampler>> samplers(specs.size());
  for (std::size_t i = 0; i < specs.size(); ++i) {
    auto& out = outcomes[i];
    out.spec = specs[i];
    out.counts = records[i];
    out.plan.alpha = plan.alpha;
    out.plan.seed = plan.seed;
    try {
      out.plan.beta = plan.beta ? *plan.beta : sample::auto_beta(records[i].records_y1, records[i].records_y0);
      samplers[i].emplace(out.plan);
    } catch (const Error& e) {
      out.failure = FitFailure::degenerate_cohort;
      out.error = std::string("degenerate cohort: ") + e.what();
    }
  }

  source([&](const graph::PairObservation& obs) {
    for (std::size_t i = 0; i < specs.size(); ++i) {
      if (samplers[i] && eligible(specs[i], obs)) samplers[i]->offer(obs);
    }
  });

  for (std::size_t i = 0; i < specs.size(); ++i) {
    if (!samplers[i]) continue;
    auto& out = outcomes[i];
    auto weighted = samplers[i]->take();
    out.counts = weighted.counts;
    try {
      out.model = fit(weighted, specs[i], d_max, config);
    } catch (const FitError& e) {
      out.failure = e.kind();
      out.error = e.what();
      spdlog::info("cohort {}: {}", specs[i].name(), e.what());
    }
  }
  return outcomes;
}

void write_coefficients_csv(const std::vector<CohortOutcome>& outcomes, std::ostream& out) {
  out << "cohort,variable,distance_index,coefficient\n";
  auto value = [](const std::optional<double>& v) {
    if (!v) return std::string();
    std::ostringstream s;
    s.precision(17);
    s << *v;
    return s.str();
  };
  for (const auto& o : outcomes) {
    if (!o.model) continue;
    const auto& m = *o.model;
    const auto name = o.spec.name();
    out << name << ",intercept,," << value(m.intercept) << '\n';
    for (int i = 1; i <= m.d_max; ++i) {
      out << name << ",d" << i << ',' << i << ',' << value(m.distance[static_cast<std::size_t>(i - 1)])
          << '\n';
    }
    if (o.spec.geo() != GeoDummy::none) out << name << ',' << m.geo_name() << ",," << value(m.geo) << '\n';
  }
}

}  // namespace knowflow::regress
