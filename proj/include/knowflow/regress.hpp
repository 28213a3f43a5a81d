#pragma once

// Weighted logistic regression over one-hot social-distance features.
//
// The numerical core works on a design matrix X (no intercept column) and
// two non-negative weight vectors: w_pos[i] is the weight of row i observed
// with y = 1 and w_neg[i] the weight observed with y = 0. A row of plain
// observations has one of them zero; aggregated rows carry both. The
// parameter vector is theta = [intercept; coefficients].

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "knowflow/common.hpp"
#include "knowflow/graph.hpp"
#include "knowflow/sample.hpp"

namespace knowflow::regress {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

struct SolverConfig {
  double tolerance = 1e-8;  // on max |gradient| / total weight
  int max_iterations = 100;
  double ridge = 0.0;       // L2 penalty on non-intercept coefficients

  nlohmann::json to_json() const;
};

enum class FitFailure { empty, degenerate_cohort, separation, singular, non_convergence };

std::string_view to_string(FitFailure failure);

struct FitDiagnostics {
  int iterations = 0;
  double log_likelihood = 0.0;  // unpenalized weighted log-likelihood
  double grad_norm = 0.0;       // max |penalized gradient| / total weight
};

class FitError : public Error {
 public:
  FitError(FitFailure kind, const std::string& message, FitDiagnostics diagnostics = {})
      : Error(message), kind_(kind), diagnostics_(diagnostics) {}

  FitFailure kind() const { return kind_; }
  const FitDiagnostics& diagnostics() const { return diagnostics_; }

 private:
  FitFailure kind_;
  FitDiagnostics diagnostics_;
};

template <typename Scalar>
Scalar log_sigmoid(Scalar z) {
  using std::exp;
  using std::log1p;
  return z >= Scalar(0) ? -log1p(exp(-z)) : z - log1p(exp(z));
}

template <typename Scalar>
Scalar sigmoid(Scalar z) {
  using std::exp;
  if (z >= Scalar(0)) return Scalar(1) / (Scalar(1) + exp(-z));
  const Scalar e = exp(z);
  return e / (Scalar(1) + e);
}

template <typename Scalar>
Vector<Scalar> linear_predictor(const Matrix<Scalar>& X, const Vector<Scalar>& theta) {
  return (X * theta.tail(X.cols())).array() + theta(0);
}

template <typename Scalar>
Scalar weighted_log_likelihood(const Matrix<Scalar>& X, const Vector<Scalar>& w_pos,
                               const Vector<Scalar>& w_neg, const Vector<Scalar>& theta) {
  const Vector<Scalar> z = linear_predictor(X, theta);
  Scalar ll(0);
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    if (w_pos(i) != Scalar(0)) ll += w_pos(i) * log_sigmoid(z(i));
    if (w_neg(i) != Scalar(0)) ll += w_neg(i) * log_sigmoid(Scalar(-z(i)));
  }
  return ll;
}

template <typename Scalar>
Vector<Scalar> weighted_gradient(const Matrix<Scalar>& X, const Vector<Scalar>& w_pos,
                                 const Vector<Scalar>& w_neg, const Vector<Scalar>& theta) {
  const Vector<Scalar> z = linear_predictor(X, theta);
  // d/dz [w+ log s(z) + w- log s(-z)] = w+ s(-z) - w- s(z)
  Vector<Scalar> residual(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    residual(i) = w_pos(i) * sigmoid(Scalar(-z(i))) - w_neg(i) * sigmoid(z(i));
  }
  Vector<Scalar> g(theta.size());
  g(0) = residual.sum();
  g.tail(X.cols()) = X.transpose() * residual;
  return g;
}

/// Fisher information [1 X]' diag(w s (1 - s)) [1 X].
template <typename Scalar>
Matrix<Scalar> weighted_information(const Matrix<Scalar>& X, const Vector<Scalar>& w_pos,
                                    const Vector<Scalar>& w_neg, const Vector<Scalar>& theta) {
  const Vector<Scalar> z = linear_predictor(X, theta);
  Vector<Scalar> d(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const Scalar s = sigmoid(z(i));
    d(i) = (w_pos(i) + w_neg(i)) * s * (Scalar(1) - s);
  }
  const Eigen::Index p = X.cols();
  Matrix<Scalar> info(p + 1, p + 1);
  info(0, 0) = d.sum();
  info.block(1, 0, p, 1) = X.transpose() * d;
  info.block(0, 1, 1, p) = info.block(1, 0, p, 1).transpose();
  info.block(1, 1, p, p) = X.transpose() * d.asDiagonal() * X;
  return info;
}

template <typename Scalar>
struct LogisticFit {
  Vector<Scalar> theta;
  FitDiagnostics diagnostics;
  std::vector<Scalar> objective_trace;  // penalized objective after each accepted step
};

namespace detail {

// Quasi-complete separation of a 0/1 column: one side of the split holds a
// single outcome class, so the likelihood keeps rising along that direction.
template <typename Scalar>
void check_binary_columns(const Matrix<Scalar>& X, const Vector<Scalar>& w_pos,
                          const Vector<Scalar>& w_neg) {
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    const auto col = X.col(j);
    if (!((col.array() == Scalar(0)) || (col.array() == Scalar(1))).all()) continue;
    Scalar pos_on(0), neg_on(0), pos_off(0), neg_off(0);
    for (Eigen::Index i = 0; i < col.size(); ++i) {
      (col(i) == Scalar(1) ? pos_on : pos_off) += w_pos(i);
      (col(i) == Scalar(1) ? neg_on : neg_off) += w_neg(i);
    }
    if (pos_on + neg_on == Scalar(0) || pos_off + neg_off == Scalar(0)) {
      throw FitError(FitFailure::singular,
                     "feature column " + std::to_string(j) + " is constant and not identifiable");
    }
    if (pos_on == Scalar(0) || neg_on == Scalar(0) || pos_off == Scalar(0) || neg_off == Scalar(0)) {
      throw FitError(FitFailure::separation,
                     "quasi-separation on feature column " + std::to_string(j) +
                         "; refit with a small ridge penalty");
    }
  }
}

}  // namespace detail

/// Newton / IRLS ascent with step halving on the (optionally ridge-penalized)
/// weighted log-likelihood. Converged when max |gradient| / total weight is
/// at most config.tolerance.
template <typename Scalar>
LogisticFit<Scalar> fit_irls(const Matrix<Scalar>& X, const Vector<Scalar>& w_pos,
                             const Vector<Scalar>& w_neg, const SolverConfig& config) {
  using std::abs;
  using std::log;
  if (X.rows() != w_pos.size() || X.rows() != w_neg.size()) {
    throw ContractViolation("design and weight sizes differ");
  }
  if ((w_pos.array() < Scalar(0)).any() || (w_neg.array() < Scalar(0)).any()) {
    throw ContractViolation("negative weight");
  }
  const Scalar pos_total = w_pos.sum(), neg_total = w_neg.sum();
  const Scalar total = pos_total + neg_total;
  if (total == Scalar(0)) throw FitError(FitFailure::empty, "empty cohort");
  if (pos_total == Scalar(0) || neg_total == Scalar(0)) {
    throw FitError(FitFailure::degenerate_cohort, "degenerate cohort: a single outcome class");
  }
  const Scalar ridge(config.ridge);
  if (ridge == Scalar(0)) detail::check_binary_columns(X, w_pos, w_neg);

  const Eigen::Index p = X.cols();
  auto objective = [&](const Vector<Scalar>& theta) {
    Scalar f = weighted_log_likelihood(X, w_pos, w_neg, theta);
    if (ridge != Scalar(0)) f -= Scalar(0.5) * ridge * theta.tail(p).squaredNorm();
    return f;
  };
  auto gradient = [&](const Vector<Scalar>& theta) {
    Vector<Scalar> g = weighted_gradient(X, w_pos, w_neg, theta);
    if (ridge != Scalar(0)) g.tail(p) -= ridge * theta.tail(p);
    return g;
  };

  LogisticFit<Scalar> fit;
  fit.theta = Vector<Scalar>::Zero(p + 1);
  fit.theta(0) = log(pos_total / neg_total);
  Scalar f = objective(fit.theta);
  fit.objective_trace.push_back(f);

  auto diagnostics = [&](const Vector<Scalar>& g, int iterations) {
    FitDiagnostics d;
    d.iterations = iterations;
    d.log_likelihood = static_cast<double>(weighted_log_likelihood(X, w_pos, w_neg, fit.theta));
    d.grad_norm = static_cast<double>(g.cwiseAbs().maxCoeff() / total);
    return d;
  };

  for (int iter = 0;; ++iter) {
    const Vector<Scalar> g = gradient(fit.theta);
    fit.diagnostics = diagnostics(g, iter);
    if (fit.diagnostics.grad_norm <= config.tolerance) break;
    if (iter >= config.max_iterations) {
      if (fit.theta.cwiseAbs().maxCoeff() > Scalar(20)) {
        throw FitError(FitFailure::separation,
                       "coefficients diverging (likely separation); refit with a small ridge penalty",
                       fit.diagnostics);
      }
      throw FitError(FitFailure::non_convergence,
                     "no convergence after " + std::to_string(config.max_iterations) + " iterations",
                     fit.diagnostics);
    }

    Matrix<Scalar> info = weighted_information(X, w_pos, w_neg, fit.theta);
    if (ridge != Scalar(0)) info.diagonal().tail(p).array() += ridge;
    Eigen::LDLT<Matrix<Scalar>> ldlt(info);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
        (ldlt.vectorD().array() <= Scalar(0)).any()) {
      if (fit.theta.cwiseAbs().maxCoeff() > Scalar(20)) {
        throw FitError(FitFailure::separation, "information matrix vanished while coefficients diverge",
                       fit.diagnostics);
      }
      throw FitError(FitFailure::singular, "information matrix is singular", fit.diagnostics);
    }
    const Vector<Scalar> step = ldlt.solve(g);

    // Objective values carry rounding noise proportional to their magnitude;
    // a step inside that band counts as non-decreasing.
    const Scalar noise = Scalar(8) * Eigen::NumTraits<Scalar>::epsilon() * (abs(f) + Scalar(1));
    Scalar scale(1);
    Vector<Scalar> candidate = fit.theta + step;
    Scalar f_candidate = objective(candidate);
    int halvings = 0;
    while (!(f_candidate >= f - noise) && halvings < 60) {
      scale /= Scalar(2);
      candidate = fit.theta + scale * step;
      f_candidate = objective(candidate);
      ++halvings;
    }
    if (!(f_candidate >= f - noise)) {
      throw FitError(FitFailure::non_convergence, "line search failed", fit.diagnostics);
    }
    fit.theta = candidate;
    f = f_candidate;
    fit.objective_trace.push_back(f);
  }

  if (!fit.theta.allFinite()) {
    throw FitError(FitFailure::non_convergence, "non-finite coefficients", fit.diagnostics);
  }
  return fit;
}

// ---------------------------------------------------------------------------
// Observation-level encoding and fits

enum class GeoDummy { none, country, region };

/// Distance dummies x_1..x_dmax then, when requested, the geo dummy. Finite
/// distances above d_max, beyond-horizon and infinite pairs encode as the
/// all-zero baseline. Returns nullopt when the requested geo flag is absent.
/// Throws ContractViolation for Finite(0).
std::optional<Vector<double>> encode(const graph::PairObservation& obs, int d_max, GeoDummy geo);

struct CohortSpec {
  enum class Kind { distance_only, joint_country, joint_region };

  Kind kind = Kind::distance_only;
  graph::Cohort cohort = graph::Cohort::all;

  static CohortSpec distance_only(graph::Cohort cohort) { return {Kind::distance_only, cohort}; }
  static CohortSpec joint_country() { return {Kind::joint_country, graph::Cohort::all}; }
  static CohortSpec joint_region() { return {Kind::joint_region, graph::Cohort::all}; }
  /// The five distance-only fits followed by the two joint fits.
  static std::vector<CohortSpec> suite();

  GeoDummy geo() const;
  std::string name() const;
  /// Whether the geo flag this spec depends on is present.
  bool has_required_flags(const graph::PairObservation& obs) const;
  bool includes(const graph::PairObservation& obs) const;

  bool operator==(const CohortSpec&) const = default;
};

struct RegressionModel {
  CohortSpec spec;
  int d_max = 9;
  double intercept = 0.0;
  std::vector<std::optional<double>> distance;  // d1..d_max; nullopt if never observed
  std::optional<double> geo;                    // joint specs only

  struct Diagnostics {
    int iterations = 0;
    double log_likelihood = 0.0;
    double grad_norm = 0.0;
    std::uint64_t n_included = 0;
    std::uint64_t n_rejected = 0;       // required geo flag absent
    std::uint64_t n_zero_distance = 0;  // Finite(0), never encoded
    std::uint64_t n_folded = 0;         // finite distance above d_max
    double weight_total = 0.0;
  } diagnostics;

  std::string geo_name() const;
  nlohmann::json to_json() const;
};

/// Fits one cohort of a weighted sample. Inputs are aggregated into distinct
/// feature patterns before solving; features that never occur are reported
/// as nullopt and left out of the solve.
RegressionModel fit(const sample::WeightedSample& sample, const CohortSpec& spec, int d_max,
                    const SolverConfig& config);

struct SuitePlan {
  double alpha = 1.0;
  std::optional<double> beta;  // nullopt: auto_beta per cohort
  std::uint64_t seed = 0;

  nlohmann::json to_json() const;
};

struct CohortOutcome {
  CohortSpec spec;
  sample::SamplingPlan plan;
  sample::StratumCounts counts;
  std::optional<RegressionModel> model;
  std::optional<FitFailure> failure;
  std::string error;
};

/// Calls its argument once per observation; must be repeatable.
using ObservationSource =
    std::function<void(const std::function<void(const graph::PairObservation&)>&)>;

/// Runs all seven fits with two passes over the source: stratum counts (for
/// auto beta), then per-cohort sampling under the shared seed. Fit failures
/// are recorded per cohort.
std::vector<CohortOutcome> cohort_suite(const ObservationSource& source, const SuitePlan& plan,
                                        int d_max, const SolverConfig& config);

/// Long format: cohort,variable,distance_index,coefficient.
void write_coefficients_csv(const std::vector<CohortOutcome>& outcomes, std::ostream& out);

}  // namespace knowflow::regress
