#pragma once

// Likelihood families. A family maps one K x J parameter matrix and the data
// to a table of log-terms; classification probabilities and complete
// log-likelihoods are computed generically from that table. Further families
// plug in by deriving from Model.
//
// Parameter layouts (one row per component):
//   univariate normal mixture   (mean, variance, weight)                J = 3
//   bivariate normal mixture    (mu1, mu2, s11, s22, s12, weight)       J = 6
//   Poisson hidden Markov model (lambda, w(k,1), ..., w(k,K))           J = K + 1

#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "lsw/core.hpp"

namespace lsw {

inline constexpr double simplex_tolerance = 1e-8;

/// Per-parameter-matrix evaluation cache.
struct LogTerms {
  Matrix log_density;               // n x K, log f(x_i | theta_k)
  std::vector<double> log_weight;   // K; mixture weights, or stationary pi for HMMs
  Matrix log_transition;            // K x K for Markov allocations, empty otherwise

  std::size_t n() const noexcept { return log_density.rows(); }
  std::size_t K() const noexcept { return log_density.cols(); }
  bool markov() const noexcept { return !log_transition.empty(); }
};

enum class ModelKind { UnivariateNormal, BivariateNormal, PoissonHmm };

class Model {
 public:
  virtual ~Model() = default;

  virtual ModelKind kind() const = 0;
  virtual std::string_view name() const = 0;
  virtual std::size_t parameter_count(std::size_t K) const = 0;
  virtual std::size_t data_dim() const = 0;

  /// Throws DataError when params break the family's invariants.
  virtual void validate(const Matrix& params) const = 0;
  virtual LogTerms log_terms(const Matrix& params, const Dataset& x) const = 0;

  /// Relabels one parameter draw: row k of the result is component perm[k].
  /// Families with label-indexed columns (transition matrices) override this.
  virtual Matrix permute(const Matrix& params, const Permutation& perm) const {
    return apply_to_parameters(params, perm);
  }

 protected:
  void check_shape(const Matrix& params) const {
    if (params.rows() < 1 || params.cols() != parameter_count(params.rows()))
      throw DataError(std::string(name()) + ": expected K x " +
                      std::to_string(parameter_count(params.rows())) +
                      " parameters, got " + std::to_string(params.rows()) + " x " +
                      std::to_string(params.cols()));
  }
  void check_data(const Dataset& x) const {
    if (x.dim() != data_dim())
      throw DataError(std::string(name()) + ": data has dimension " +
                      std::to_string(x.dim()) + ", expected " +
                      std::to_string(data_dim()));
  }
};

namespace detail {

inline double safe_log(double v) {
  return v > 0.0 ? std::log(v) : -std::numeric_limits<double>::infinity();
}

inline void check_simplex(std::span<const double> w, const std::string& what) {
  double sum = 0.0;
  for (double v : w) {
    if (!(v >= 0.0)) throw DataError(what + ": negative or NaN probability");
    sum += v;
  }
  if (std::abs(sum - 1.0) > simplex_tolerance)
    throw DataError(what + ": probabilities sum to " + std::to_string(sum));
}

}  // namespace detail

/// Unique stationary distribution of a row-stochastic matrix. Solves
/// pi^T (w - I) = 0 with sum(pi) = 1 exactly; a chain without a unique
/// stationary law signals DataError.
inline std::vector<double> stationary_distribution(const Matrix& w) {
  const std::size_t K = w.rows();
  if (K == 0 || w.cols() != K)
    throw DataError("stationary_distribution: matrix must be square");
  for (std::size_t k = 0; k < K; ++k)
    detail::check_simplex(w.row(k), "stationary_distribution row " + std::to_string(k));
  const auto n = static_cast<Eigen::Index>(K);
  Eigen::MatrixXd A(n, n);
  for (Eigen::Index r = 0; r < n; ++r)
    for (Eigen::Index c = 0; c < n; ++c)
      A(r, c) = w(static_cast<std::size_t>(c), static_cast<std::size_t>(r)) -
                (r == c ? 1.0 : 0.0);
  A.row(n - 1).setOnes();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  rhs(n - 1) = 1.0;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
  if (!lu.isInvertible())
    throw DataError("stationary_distribution: chain has no unique stationary "
                    "distribution (reducible transition matrix)");
  Eigen::VectorXd pi = lu.solve(rhs);
  double sum = 0.0;
  for (Eigen::Index k = 0; k < n; ++k) {
    if (pi(k) < -1e-9)
      throw DataError("stationary_distribution: negative solution component");
    pi(k) = std::max(0.0, pi(k));
    sum += pi(k);
  }
  std::vector<double> out(K);
  for (std::size_t k = 0; k < K; ++k) out[k] = pi(static_cast<Eigen::Index>(k)) / sum;

  double residual = 0.0;
  for (std::size_t c = 0; c < K; ++c) {
    double v = 0.0;
    for (std::size_t r = 0; r < K; ++r) v += out[r] * w(r, c);
    residual = std::max(residual, std::abs(v - out[c]));
  }
  if (residual > 1e-9)
    throw DataError("stationary_distribution: residual " + std::to_string(residual) +
                    " too large");
  return out;
}

/// Classification probabilities from a log-term table. Adding a
/// constant to every log weight leaves the result unchanged.
inline Matrix classification_probabilities(const LogTerms& terms) {
  const std::size_t n = terms.n(), K = terms.K();
  Matrix p(n, K);
  std::vector<double> a(K);
  for (std::size_t i = 0; i < n; ++i) {
    double hi = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < K; ++k) {
      a[k] = terms.log_weight[k] + terms.log_density(i, k);
      if (std::isnan(a[k]))
        throw DataError("classification_probabilities: NaN log-term at observation " +
                        std::to_string(i));
      hi = std::max(hi, a[k]);
    }
    if (!std::isfinite(hi))
      throw DataError("classification_probabilities: observation " +
                      std::to_string(i) + " has zero density under every component");
    double sum = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      a[k] = std::exp(a[k] - hi);
      sum += a[k];
    }
    for (std::size_t k = 0; k < K; ++k) p(i, k) = a[k] / sum;
  }
  return p;
}

inline Matrix classification_probabilities(const Model& model, const Matrix& params,
                                           const Dataset& x) {
  return classification_probabilities(model.log_terms(params, x));
}

/// Complete log-likelihood of allocations z. A zero weight or transition on a
/// used label yields -infinity.
inline double complete_log_likelihood(const LogTerms& terms, std::span<const int> z) {
  if (z.size() != terms.n())
    throw DataError("complete_log_likelihood: allocation length " +
                    std::to_string(z.size()) + " does not match n = " +
                    std::to_string(terms.n()));
  const int K = static_cast<int>(terms.K());
  double ll = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const int k = z[i];
    if (k < 0 || k >= K)
      throw DataError("complete_log_likelihood: label out of range at " +
                      std::to_string(i));
    const auto ku = static_cast<std::size_t>(k);
    if (!terms.markov() || i == 0)
      ll += terms.log_weight[ku];
    else
      ll += terms.log_transition(static_cast<std::size_t>(z[i - 1]), ku);
    ll += terms.log_density(i, ku);
  }
  return ll;
}

inline double complete_log_likelihood(const Model& model, const Matrix& params,
                                      const Dataset& x, std::span<const int> z) {
  return complete_log_likelihood(model.log_terms(params, x), z);
}

class UnivariateNormalMixture final : public Model {
 public:
  ModelKind kind() const override { return ModelKind::UnivariateNormal; }
  std::string_view name() const override { return "normal"; }
  std::size_t parameter_count(std::size_t) const override { return 3; }
  std::size_t data_dim() const override { return 1; }

  void validate(const Matrix& params) const override {
    check_shape(params);
    std::vector<double> w(params.rows());
    for (std::size_t k = 0; k < params.rows(); ++k) {
      if (!(params(k, 1) > 0.0))
        throw DataError("normal: non-positive variance in component " +
                        std::to_string(k + 1));
      w[k] = params(k, 2);
    }
    detail::check_simplex(w, "normal: weights");
  }

  LogTerms log_terms(const Matrix& params, const Dataset& x) const override {
    validate(params);
    check_data(x);
    const std::size_t K = params.rows(), n = x.n();
    LogTerms t{Matrix(n, K), std::vector<double>(K), Matrix()};
    for (std::size_t k = 0; k < K; ++k) {
      t.log_weight[k] = detail::safe_log(params(k, 2));
      const double mean = params(k, 0), var = params(k, 1);
      const double norm = -0.5 * (std::log(2.0 * std::numbers::pi) + std::log(var));
      for (std::size_t i = 0; i < n; ++i) {
        const double d = x(i, 0) - mean;
        t.log_density(i, k) = norm - 0.5 * d * d / var;
      }
    }
    return t;
  }
};

class BivariateNormalMixture final : public Model {
 public:
  ModelKind kind() const override { return ModelKind::BivariateNormal; }
  std::string_view name() const override { return "bivariate-normal"; }
  std::size_t parameter_count(std::size_t) const override { return 6; }
  std::size_t data_dim() const override { return 2; }

  void validate(const Matrix& params) const override {
    check_shape(params);
    std::vector<double> w(params.rows());
    for (std::size_t k = 0; k < params.rows(); ++k) {
      const double s11 = params(k, 2), s22 = params(k, 3), s12 = params(k, 4);
      if (!(s11 > 0.0 && s22 > 0.0 && s11 * s22 - s12 * s12 > 0.0))
        throw DataError("bivariate-normal: covariance of component " +
                        std::to_string(k + 1) + " is not positive definite");
      w[k] = params(k, 5);
    }
    detail::check_simplex(w, "bivariate-normal: weights");
  }

  LogTerms log_terms(const Matrix& params, const Dataset& x) const override {
    validate(params);
    check_data(x);
    const std::size_t K = params.rows(), n = x.n();
    LogTerms t{Matrix(n, K), std::vector<double>(K), Matrix()};
    for (std::size_t k = 0; k < K; ++k) {
      t.log_weight[k] = detail::safe_log(params(k, 5));
      const double m1 = params(k, 0), m2 = params(k, 1);
      const double s11 = params(k, 2), s22 = params(k, 3), s12 = params(k, 4);
      const double det = s11 * s22 - s12 * s12;
      const double norm = -std::log(2.0 * std::numbers::pi) - 0.5 * std::log(det);
      for (std::size_t i = 0; i < n; ++i) {
        const double d1 = x(i, 0) - m1, d2 = x(i, 1) - m2;
        const double quad = (s22 * d1 * d1 - 2.0 * s12 * d1 * d2 + s11 * d2 * d2) / det;
        t.log_density(i, k) = norm - 0.5 * quad;
      }
    }
    return t;
  }
};

/// Poisson emissions with Markov-dependent states. The first state is drawn
/// from the stationary distribution of the transition matrix, which also
/// replaces the mixture weights in classification probabilities.
class PoissonHmm final : public Model {
 public:
  ModelKind kind() const override { return ModelKind::PoissonHmm; }
  std::string_view name() const override { return "poisson-hmm"; }
  std::size_t parameter_count(std::size_t K) const override { return K + 1; }
  std::size_t data_dim() const override { return 1; }

  static Matrix transition_matrix(const Matrix& params) {
    const std::size_t K = params.rows();
    Matrix w(K, K);
    for (std::size_t r = 0; r < K; ++r)
      for (std::size_t c = 0; c < K; ++c) w(r, c) = params(r, 1 + c);
    return w;
  }

  void validate(const Matrix& params) const override {
    check_shape(params);
    for (std::size_t k = 0; k < params.rows(); ++k) {
      if (!(params(k, 0) > 0.0))
        throw DataError("poisson-hmm: non-positive intensity in state " +
                        std::to_string(k + 1));
      detail::check_simplex(params.row(k).subspan(1),
                            "poisson-hmm: transition row " + std::to_string(k + 1));
    }
  }

  LogTerms log_terms(const Matrix& params, const Dataset& x) const override {
    validate(params);
    check_data(x);
    const std::size_t K = params.rows(), n = x.n();
    for (std::size_t i = 0; i < n; ++i) {
      const double v = x(i, 0);
      if (v < 0.0 || v != std::floor(v))
        throw DataError("poisson-hmm: observation " + std::to_string(i) +
                        " is not a non-negative integer count");
    }
    const Matrix w = transition_matrix(params);
    const std::vector<double> pi = stationary_distribution(w);
    LogTerms t{Matrix(n, K), std::vector<double>(K), Matrix(K, K)};
    for (std::size_t k = 0; k < K; ++k) {
      t.log_weight[k] = detail::safe_log(pi[k]);
      for (std::size_t c = 0; c < K; ++c) t.log_transition(k, c) = detail::safe_log(w(k, c));
      const double lambda = params(k, 0), log_lambda = std::log(lambda);
      for (std::size_t i = 0; i < n; ++i) {
        const double v = x(i, 0);
        t.log_density(i, k) = v * log_lambda - lambda - std::lgamma(v + 1.0);
      }
    }
    return t;
  }

  /// Relabels intensities and both axes of the transition matrix.
  Matrix permute(const Matrix& params, const Permutation& perm) const override {
    const std::size_t K = params.rows();
    if (perm.size() != K || params.cols() != K + 1)
      throw DataError("poisson-hmm: permutation does not match parameters");
    Matrix out(K, K + 1);
    for (std::size_t k = 0; k < K; ++k) {
      const auto src = static_cast<std::size_t>(perm[k]);
      out(k, 0) = params(src, 0);
      for (std::size_t c = 0; c < K; ++c)
        out(k, 1 + c) = params(src, 1 + static_cast<std::size_t>(perm[c]));
    }
    return out;
  }
};

inline std::unique_ptr<Model> make_model(ModelKind kind) {
  switch (kind) {
    case ModelKind::UnivariateNormal: return std::make_unique<UnivariateNormalMixture>();
    case ModelKind::BivariateNormal: return std::make_unique<BivariateNormalMixture>();
    case ModelKind::PoissonHmm: return std::make_unique<PoissonHmm>();
  }
  throw UsageError("unknown model kind");
}

inline ModelKind parse_model_kind(std::string_view s) {
  if (s == "normal") return ModelKind::UnivariateNormal;
  if (s == "bivariate-normal") return ModelKind::BivariateNormal;
  if (s == "poisson-hmm") return ModelKind::PoissonHmm;
  throw UsageError("unknown model '" + std::string(s) +
                   "' (expected normal, bivariate-normal or poisson-hmm)");
}

}  // namespace lsw
