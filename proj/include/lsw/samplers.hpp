#pragma once

// Fixture generation: data simulators, fixture-grade Gibbs samplers for the
// three families and a label-switch injector.
//
// Randomness comes from std::mt19937_64, whose output sequence is fixed by
// the C++ standard, combined with Boost.Random distributions (header-only,
// identical on every platform). The same seed therefore reproduces a
// fixture bit for bit.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <boost/random/gamma_distribution.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/poisson_distribution.hpp>

#include "lsw/core.hpp"
#include "lsw/models.hpp"
#include "lsw/pipeline.hpp"

namespace lsw {

using Rng = std::mt19937_64;

namespace rng {

/// Uniform on the open interval (0, 1) from the top 53 bits.
inline double uniform(Rng& g) {
  return (static_cast<double>(g() >> 11) + 0.5) * 0x1.0p-53;
}

inline double normal(Rng& g, double mean = 0.0, double sd = 1.0) {
  return boost::random::normal_distribution<double>(mean, sd)(g);
}

/// Gamma with the given shape and scale (mean shape * scale).
inline double gamma(Rng& g, double shape, double scale) {
  return boost::random::gamma_distribution<double>(shape, scale)(g);
}

inline std::int64_t poisson(Rng& g, double mean) {
  return boost::random::poisson_distribution<std::int64_t, double>(mean)(g);
}

inline std::vector<double> dirichlet(Rng& g, std::span<const double> alpha) {
  std::vector<double> w(alpha.size());
  double sum = 0.0;
  for (std::size_t k = 0; k < alpha.size(); ++k) {
    w[k] = gamma(g, alpha[k], 1.0);
    sum += w[k];
  }
  for (double& v : w) v /= sum;
  return w;
}

/// Index drawn with probability proportional to exp(log_weight).
inline std::size_t categorical_log(Rng& g, std::span<const double> log_weight) {
  double hi = -std::numeric_limits<double>::infinity();
  for (double v : log_weight) hi = std::max(hi, v);
  std::vector<double> cdf(log_weight.size());
  double acc = 0.0;
  for (std::size_t k = 0; k < log_weight.size(); ++k) {
    acc += std::exp(log_weight[k] - hi);
    cdf[k] = acc;
  }
  const double u = uniform(g) * acc;
  for (std::size_t k = 0; k < cdf.size(); ++k)
    if (u < cdf[k]) return k;
  return cdf.size() - 1;
}

inline std::size_t categorical(Rng& g, std::span<const double> weight) {
  std::vector<double> lw(weight.size());
  for (std::size_t k = 0; k < weight.size(); ++k) lw[k] = detail::safe_log(weight[k]);
  return categorical_log(g, lw);
}

/// Uniform index in [0, bound) by multiply-shift; bound is tiny here.
inline std::size_t below(Rng& g, std::size_t bound) {
  return static_cast<std::size_t>(uniform(g) * static_cast<double>(bound));
}

/// Uniformly random permutation (Fisher-Yates).
inline Permutation permutation(Rng& g, std::size_t K) {
  std::vector<int> p(K);
  std::iota(p.begin(), p.end(), 0);
  for (std::size_t i = K; i > 1; --i) std::swap(p[i - 1], p[below(g, i)]);
  return Permutation(std::move(p));
}

}  // namespace rng

struct TruthSpec {
  ModelKind kind;
  Matrix params;  // K x J in the family's layout
  std::size_t n;
};

struct SimulatedData {
  Dataset x;
  std::vector<int> z;
};

struct FixtureChain {
  ParameterChain mcmc;
  AllocationChain z;
  ClassificationChain p;
  std::size_t map_index = 0;
  Dataset x;
  std::optional<std::vector<int>> z_true;
  std::uint64_t seed = 0;
};

struct GibbsSettings {
  std::size_t iterations = 2000;  // total, including burn-in
  std::size_t burn = 1000;
  std::uint64_t seed = 1;
};

namespace detail {

struct Sym2 {
  double a, b, c;  // [[a, b], [b, c]]
};

inline Sym2 inverse(const Sym2& s) {
  const double det = s.a * s.c - s.b * s.b;
  return {s.c / det, -s.b / det, s.a / det};
}

// Lower Cholesky factor [[l11, 0], [l21, l22]].
struct Lower2 {
  double l11, l21, l22;
};

inline Lower2 cholesky(const Sym2& s) {
  const double l11 = std::sqrt(s.a);
  const double l21 = s.b / l11;
  return {l11, l21, std::sqrt(s.c - l21 * l21)};
}

// Wishart(scale, dof) draw by the Bartlett decomposition.
inline Sym2 wishart(Rng& g, const Sym2& scale, double dof) {
  const Lower2 L = cholesky(scale);
  const double a11 = std::sqrt(rng::gamma(g, 0.5 * dof, 2.0));
  const double a21 = rng::normal(g);
  const double a22 = std::sqrt(rng::gamma(g, 0.5 * (dof - 1.0), 2.0));
  // B = L * A (both lower triangular); result = B B^T.
  const double b11 = L.l11 * a11;
  const double b21 = L.l21 * a11 + L.l22 * a21;
  const double b22 = L.l22 * a22;
  return {b11 * b11, b11 * b21, b21 * b21 + b22 * b22};
}

inline void check_gibbs(const Dataset& x, std::size_t K, const GibbsSettings& s) {
  if (K < 1) throw UsageError("gibbs: K must be at least 1");
  if (s.iterations <= s.burn) throw UsageError("gibbs: iterations must exceed burn-in");
  if (x.n() < K) throw DataError("gibbs: fewer observations than components");
}

// Allocation initialization: K distinct random observations act as centres,
// every observation joins the nearest one.
inline std::vector<int> nearest_center_start(Rng& g, const Dataset& x, std::size_t K) {
  std::vector<std::size_t> idx(x.n());
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = 0; i < K; ++i) std::swap(idx[i], idx[i + rng::below(g, x.n() - i)]);
  std::vector<int> z(x.n());
  for (std::size_t i = 0; i < x.n(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < K; ++k) {
      double d = 0.0;
      for (std::size_t r = 0; r < x.dim(); ++r) {
        const double e = x(i, r) - x(idx[k], r);
        d += e * e;
      }
      if (d < best) {
        best = d;
        z[i] = static_cast<int>(k);
      }
    }
  }
  return z;
}

struct ChainBuffers {
  std::vector<double> mcmc, p;
  std::vector<int> z;

  void store(const Matrix& params, const Matrix& probs, std::span<const int> alloc) {
    mcmc.insert(mcmc.end(), params.values().begin(), params.values().end());
    p.insert(p.end(), probs.values().begin(), probs.values().end());
    z.insert(z.end(), alloc.begin(), alloc.end());
  }

  FixtureChain finish(const Model& model, const Dataset& x, std::size_t m, std::size_t K,
                      std::size_t J, std::uint64_t seed) && {
    FixtureChain f{ParameterChain(Array3<double>(m, K, J, std::move(mcmc))),
                   AllocationChain(Array2<int>(m, x.n(), std::move(z)), K),
                   ClassificationChain(Array3<double>(m, x.n(), K, std::move(p))),
                   0, x, std::nullopt, seed};
    f.map_index = select_map_pivot(model, f.mcmc, f.z, f.x);
    return f;
  }
};

inline std::vector<double> column_mean(const Dataset& x) {
  std::vector<double> mean(x.dim(), 0.0);
  for (std::size_t i = 0; i < x.n(); ++i)
    for (std::size_t r = 0; r < x.dim(); ++r) mean[r] += x(i, r);
  for (double& v : mean) v /= static_cast<double>(x.n());
  return mean;
}

inline std::vector<double> column_variance(const Dataset& x) {
  const std::vector<double> mean = column_mean(x);
  std::vector<double> var(x.dim(), 0.0);
  for (std::size_t i = 0; i < x.n(); ++i)
    for (std::size_t r = 0; r < x.dim(); ++r) {
      const double e = x(i, r) - mean[r];
      var[r] += e * e;
    }
  for (double& v : var) v /= static_cast<double>(std::max<std::size_t>(1, x.n() - 1));
  return var;
}

}  // namespace detail

/// Draws allocations from the weights (or the Markov chain, started from
/// its stationary law) and observations from the component densities.
inline SimulatedData simulate_mixture_data(const TruthSpec& truth, std::uint64_t seed) {
  const auto model = make_model(truth.kind);
  model->validate(truth.params);
  if (truth.n == 0) throw UsageError("simulate: n must be positive");
  Rng g(seed);
  const Matrix& th = truth.params;
  const std::size_t K = th.rows();
  std::vector<int> z(truth.n);
  Matrix x(truth.n, model->data_dim());

  switch (truth.kind) {
    case ModelKind::UnivariateNormal: {
      std::vector<double> w(K);
      for (std::size_t k = 0; k < K; ++k) w[k] = th(k, 2);
      for (std::size_t i = 0; i < truth.n; ++i) {
        const std::size_t k = rng::categorical(g, w);
        z[i] = static_cast<int>(k);
        x(i, 0) = rng::normal(g, th(k, 0), std::sqrt(th(k, 1)));
      }
      break;
    }
    case ModelKind::BivariateNormal: {
      std::vector<double> w(K);
      for (std::size_t k = 0; k < K; ++k) w[k] = th(k, 5);
      for (std::size_t i = 0; i < truth.n; ++i) {
        const std::size_t k = rng::categorical(g, w);
        z[i] = static_cast<int>(k);
        const detail::Lower2 L = detail::cholesky({th(k, 2), th(k, 4), th(k, 3)});
        const double e1 = rng::normal(g), e2 = rng::normal(g);
        x(i, 0) = th(k, 0) + L.l11 * e1;
        x(i, 1) = th(k, 1) + L.l21 * e1 + L.l22 * e2;
      }
      break;
    }
    case ModelKind::PoissonHmm: {
      const Matrix w = PoissonHmm::transition_matrix(th);
      const std::vector<double> pi = stationary_distribution(w);
      std::size_t k = rng::categorical(g, pi);
      for (std::size_t i = 0; i < truth.n; ++i) {
        if (i > 0) k = rng::categorical(g, w.row(k));
        z[i] = static_cast<int>(k);
        x(i, 0) = static_cast<double>(rng::poisson(g, th(k, 0)));
      }
      break;
    }
  }
  return {Dataset(std::move(x)), std::move(z)};
}

/// Conjugate normal / inverse-gamma prior: mu | s2 ~ N(mean, s2 / kappa),
/// s2 ~ IG(shape, scale); symmetric Dirichlet(dirichlet) weights.
struct NormalMixturePrior {
  double mean = 0.0;
  double kappa = 0.01;
  double shape = 2.0;
  double scale = 1.0;
  double dirichlet = 1.0;

  /// Centred on the data mean; prior variance scale = data variance / K^2.
  static NormalMixturePrior from_data(const Dataset& x, std::size_t K) {
    NormalMixturePrior p;
    p.mean = detail::column_mean(x)[0];
    p.scale = detail::column_variance(x)[0] / static_cast<double>(K * K);
    return p;
  }
};

inline FixtureChain gibbs_normal_mixture(const Dataset& x, std::size_t K,
                                         const GibbsSettings& settings,
                                         std::optional<NormalMixturePrior> prior = std::nullopt) {
  detail::check_gibbs(x, K, settings);
  if (x.dim() != 1) throw DataError("gibbs_normal_mixture: data must be univariate");
  const NormalMixturePrior pr = prior.value_or(NormalMixturePrior::from_data(x, K));
  const UnivariateNormalMixture model;
  Rng g(settings.seed);
  const std::size_t n = x.n();
  std::vector<int> z = detail::nearest_center_start(g, x, K);
  Matrix params(K, 3);
  detail::ChainBuffers buf;
  std::vector<double> count(K), sum(K), sq(K), alpha(K), lw(K);

  for (std::size_t it = 0; it < settings.iterations; ++it) {
    std::fill(count.begin(), count.end(), 0.0);
    std::fill(sum.begin(), sum.end(), 0.0);
    std::fill(sq.begin(), sq.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto k = static_cast<std::size_t>(z[i]);
      count[k] += 1.0;
      sum[k] += x(i, 0);
    }
    for (std::size_t i = 0; i < n; ++i) {
      const auto k = static_cast<std::size_t>(z[i]);
      const double e = x(i, 0) - sum[k] / count[k];
      sq[k] += e * e;
    }
    for (std::size_t k = 0; k < K; ++k) {
      const double nk = count[k];
      const double xbar = nk > 0 ? sum[k] / nk : 0.0;
      const double kn = pr.kappa + nk;
      const double mn = (pr.kappa * pr.mean + nk * xbar) / kn;
      const double an = pr.shape + 0.5 * nk;
      const double d = xbar - pr.mean;
      const double bn = pr.scale + 0.5 * sq[k] + 0.5 * pr.kappa * nk * d * d / kn;
      const double var = 1.0 / rng::gamma(g, an, 1.0 / bn);
      params(k, 1) = var;
      params(k, 0) = rng::normal(g, mn, std::sqrt(var / kn));
      alpha[k] = pr.dirichlet + nk;
    }
    const std::vector<double> w = rng::dirichlet(g, alpha);
    for (std::size_t k = 0; k < K; ++k) params(k, 2) = w[k];

    const LogTerms terms = model.log_terms(params, x);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < K; ++k) lw[k] = terms.log_weight[k] + terms.log_density(i, k);
      z[i] = static_cast<int>(rng::categorical_log(g, lw));
    }
    if (it >= settings.burn) buf.store(params, classification_probabilities(terms), z);
  }
  return std::move(buf).finish(model, x, settings.iterations - settings.burn, K, 3, settings.seed);
}

/// Normal-Wishart prior: mu | L ~ N(mean, (beta L)^{-1}), L ~ W(W, nu), with
/// W given through its inverse; symmetric Dirichlet weights.
struct BivariateNormalPrior {
  double mean1 = 0.0, mean2 = 0.0;
  double beta = 0.1;
  double nu = 4.0;
  double winv11 = 1.0, winv12 = 0.0, winv22 = 1.0;
  double dirichlet = 1.0;

  /// Centred on the data mean; W^{-1} = diag(data variance) / K, which makes
  /// the prior mean covariance diag(var) / (K (nu - 3)).
  static BivariateNormalPrior from_data(const Dataset& x, std::size_t K) {
    BivariateNormalPrior p;
    const auto mean = detail::column_mean(x);
    const auto var = detail::column_variance(x);
    p.mean1 = mean[0];
    p.mean2 = mean[1];
    p.winv11 = var[0] / static_cast<double>(K);
    p.winv22 = var[1] / static_cast<double>(K);
    return p;
  }
};

inline FixtureChain gibbs_bivariate_normal_mixture(
    const Dataset& x, std::size_t K, const GibbsSettings& settings,
    std::optional<BivariateNormalPrior> prior = std::nullopt) {
  detail::check_gibbs(x, K, settings);
  if (x.dim() != 2) throw DataError("gibbs_bivariate_normal_mixture: data must be bivariate");
  const BivariateNormalPrior pr = prior.value_or(BivariateNormalPrior::from_data(x, K));
  const BivariateNormalMixture model;
  Rng g(settings.seed);
  const std::size_t n = x.n();
  std::vector<int> z = detail::nearest_center_start(g, x, K);
  Matrix params(K, 6);
  detail::ChainBuffers buf;
  std::vector<double> count(K), s1(K), s2(K), alpha(K), lw(K);
  std::vector<detail::Sym2> scatter(K);

  for (std::size_t it = 0; it < settings.iterations; ++it) {
    std::fill(count.begin(), count.end(), 0.0);
    std::fill(s1.begin(), s1.end(), 0.0);
    std::fill(s2.begin(), s2.end(), 0.0);
    std::fill(scatter.begin(), scatter.end(), detail::Sym2{0.0, 0.0, 0.0});
    for (std::size_t i = 0; i < n; ++i) {
      const auto k = static_cast<std::size_t>(z[i]);
      count[k] += 1.0;
      s1[k] += x(i, 0);
      s2[k] += x(i, 1);
    }
    for (std::size_t i = 0; i < n; ++i) {
      const auto k = static_cast<std::size_t>(z[i]);
      const double e1 = x(i, 0) - s1[k] / count[k], e2 = x(i, 1) - s2[k] / count[k];
      scatter[k].a += e1 * e1;
      scatter[k].b += e1 * e2;
      scatter[k].c += e2 * e2;
    }
    for (std::size_t k = 0; k < K; ++k) {
      const double nk = count[k];
      const double xb1 = nk > 0 ? s1[k] / nk : 0.0, xb2 = nk > 0 ? s2[k] / nk : 0.0;
      const double bn = pr.beta + nk;
      const double mn1 = (pr.beta * pr.mean1 + nk * xb1) / bn;
      const double mn2 = (pr.beta * pr.mean2 + nk * xb2) / bn;
      const double d1 = xb1 - pr.mean1, d2 = xb2 - pr.mean2;
      const double shrink = pr.beta * nk / bn;
      const detail::Sym2 wn_inv{pr.winv11 + scatter[k].a + shrink * d1 * d1,
                                pr.winv12 + scatter[k].b + shrink * d1 * d2,
                                pr.winv22 + scatter[k].c + shrink * d2 * d2};
      const detail::Sym2 precision = detail::wishart(g, detail::inverse(wn_inv), pr.nu + nk);
      const detail::Sym2 cov = detail::inverse(precision);
      const detail::Lower2 L = detail::cholesky({cov.a / bn, cov.b / bn, cov.c / bn});
      const double e1 = rng::normal(g), e2 = rng::normal(g);
      params(k, 0) = mn1 + L.l11 * e1;
      params(k, 1) = mn2 + L.l21 * e1 + L.l22 * e2;
      params(k, 2) = cov.a;
      params(k, 3) = cov.c;
      params(k, 4) = cov.b;
      alpha[k] = pr.dirichlet + nk;
    }
    const std::vector<double> w = rng::dirichlet(g, alpha);
    for (std::size_t k = 0; k < K; ++k) params(k, 5) = w[k];

    const LogTerms terms = model.log_terms(params, x);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < K; ++k) lw[k] = terms.log_weight[k] + terms.log_density(i, k);
      z[i] = static_cast<int>(rng::categorical_log(g, lw));
    }
    if (it >= settings.burn) buf.store(params, classification_probabilities(terms), z);
  }
  return std::move(buf).finish(model, x, settings.iterations - settings.burn, K, 6, settings.seed);
}

/// Gamma(shape, rate) intensities and Dirichlet(dirichlet) transition rows.
struct PoissonHmmPrior {
  double shape = 1.0;
  double rate = 1.0;
  double dirichlet = 1.0;

  /// Prior mean intensity equal to the sample mean count.
  static PoissonHmmPrior from_data(const Dataset& x) {
    PoissonHmmPrior p;
    p.rate = 1.0 / std::max(detail::column_mean(x)[0], 1e-3);
    return p;
  }
};

/// Single-site Gibbs updates of the hidden states, each conditioned on its
/// neighbours; the first state uses the stationary law of the current
/// transitions. The transition update ignores that initial-state factor.
inline FixtureChain gibbs_poisson_hmm(const Dataset& x, std::size_t K,
                                      const GibbsSettings& settings,
                                      std::optional<PoissonHmmPrior> prior = std::nullopt) {
  detail::check_gibbs(x, K, settings);
  if (x.dim() != 1) throw DataError("gibbs_poisson_hmm: data must be univariate counts");
  for (std::size_t i = 0; i < x.n(); ++i)
    if (x(i, 0) < 0.0 || x(i, 0) != std::floor(x(i, 0)))
      throw DataError("gibbs_poisson_hmm: observation " + std::to_string(i) +
                      " is not a non-negative count");
  const PoissonHmmPrior pr = prior.value_or(PoissonHmmPrior::from_data(x));
  const PoissonHmm model;
  Rng g(settings.seed);
  const std::size_t n = x.n();

  // Start from intensities spread over the observed range, uniform transitions.
  double xmax = 0.0;
  for (std::size_t i = 0; i < n; ++i) xmax = std::max(xmax, x(i, 0));
  Matrix params(K, K + 1, 1.0 / static_cast<double>(K));
  for (std::size_t k = 0; k < K; ++k)
    params(k, 0) = 0.1 + xmax * static_cast<double>(k) / static_cast<double>(K);
  std::vector<int> z(n, 0);
  detail::ChainBuffers buf;
  std::vector<double> lw(K), count(K), sum(K), alpha(K);
  Matrix trans(K, K);

  auto resample_states = [&](const LogTerms& terms) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < K; ++k) {
        double v = terms.log_density(i, k);
        v += i == 0 ? terms.log_weight[k]
                    : terms.log_transition(static_cast<std::size_t>(z[i - 1]), k);
        if (i + 1 < n) v += terms.log_transition(k, static_cast<std::size_t>(z[i + 1]));
        lw[k] = v;
      }
      z[i] = static_cast<int>(rng::categorical_log(g, lw));
    }
  };

  resample_states(model.log_terms(params, x));
  for (std::size_t it = 0; it < settings.iterations; ++it) {
    std::fill(count.begin(), count.end(), 0.0);
    std::fill(sum.begin(), sum.end(), 0.0);
    std::fill(trans.values().begin(), trans.values().end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto k = static_cast<std::size_t>(z[i]);
      count[k] += 1.0;
      sum[k] += x(i, 0);
      if (i > 0) trans(static_cast<std::size_t>(z[i - 1]), k) += 1.0;
    }
    for (std::size_t k = 0; k < K; ++k) {
      params(k, 0) = rng::gamma(g, pr.shape + sum[k], 1.0 / (pr.rate + count[k]));
      for (std::size_t l = 0; l < K; ++l) alpha[l] = pr.dirichlet + trans(k, l);
      const std::vector<double> row = rng::dirichlet(g, alpha);
      for (std::size_t l = 0; l < K; ++l) params(k, 1 + l) = row[l];
    }
    const LogTerms terms = model.log_terms(params, x);
    resample_states(terms);
    if (it >= settings.burn) buf.store(params, classification_probabilities(terms), z);
  }
  return std::move(buf).finish(model, x, settings.iterations - settings.burn, K, K + 1,
                               settings.seed);
}

/// Applies one permutation per draw consistently: parameters through the
/// model, probability columns, and allocations through the inverse.
inline FixtureChain apply_label_switching(const FixtureChain& chain, const Model& model,
                                          const PermutationSet& perms) {
  if (perms.m() != chain.mcmc.m() || perms.K() != chain.mcmc.K())
    throw DataError("apply_label_switching: permutations do not match chain");
  FixtureChain out = chain;
  out.mcmc = permute_mcmc(chain.mcmc, perms, model);
  Array3<double> p = chain.p.array();
  Array2<int> z = chain.z.array();
  for (std::size_t t = 0; t < perms.m(); ++t) {
    const Matrix moved = apply_to_classification(chain.p.draw(t), perms[t]);
    std::copy(moved.values().begin(), moved.values().end(), p.slice(t).begin());
    const std::vector<int> relabelled = relabel_allocations(chain.z.draw(t), perms[t]);
    std::copy(relabelled.begin(), relabelled.end(), z.row(t).begin());
  }
  out.p = ClassificationChain(std::move(p));
  out.z = AllocationChain(std::move(z), chain.z.K());
  return out;
}

struct Injection {
  FixtureChain chain;
  PermutationSet applied;
};

/// Independent uniform random relabelling of every draw.
inline Injection inject_label_switching(const FixtureChain& chain, const Model& model,
                                        std::uint64_t seed) {
  Rng g(seed);
  PermutationSet perms(chain.mcmc.K());
  for (std::size_t t = 0; t < chain.mcmc.m(); ++t)
    perms.push_back(rng::permutation(g, chain.mcmc.K()));
  return {apply_label_switching(chain, model, perms), std::move(perms)};
}

/// A named, reproducible fixture recipe: data-generating truth plus the
/// fitted model size and chain length.
struct FixturePreset {
  std::string name;
  TruthSpec truth;
  std::size_t K;
  std::size_t iterations;
  std::size_t burn;
};

inline TruthSpec normal_truth(const std::vector<double>& means, const std::vector<double>& vars,
                              const std::vector<double>& weights, std::size_t n) {
  Matrix th(means.size(), 3);
  for (std::size_t k = 0; k < means.size(); ++k) {
    th(k, 0) = means[k];
    th(k, 1) = vars[k];
    th(k, 2) = weights[k];
  }
  return {ModelKind::UnivariateNormal, std::move(th), n};
}

/// Bivariate mixture with means on a circle: mu_k = radius (cos a_k, sin a_k),
/// a_k = (k - 1) pi / divisions, unit covariances and equal weights.
inline TruthSpec circle_truth(std::size_t K, double radius, double divisions, std::size_t n) {
  Matrix th(K, 6);
  for (std::size_t k = 0; k < K; ++k) {
    const double a = static_cast<double>(k) * std::numbers::pi / divisions;
    th(k, 0) = radius * std::cos(a);
    th(k, 1) = radius * std::sin(a);
    th(k, 2) = 1.0;
    th(k, 3) = 1.0;
    th(k, 4) = 0.0;
    th(k, 5) = 1.0 / static_cast<double>(K);
  }
  return {ModelKind::BivariateNormal, std::move(th), n};
}

inline std::vector<std::string> preset_names() {
  return {"separated-3", "separated-2", "dataset1", "fishery", "lamb"};
}

inline FixturePreset preset(const std::string& name) {
  if (name == "separated-3")
    return {name, normal_truth({-5.0, 0.0, 5.0}, {1.0, 1.0, 1.0}, {1.0 / 3, 1.0 / 3, 1.0 / 3}, 100),
            3, 1500, 500};
  if (name == "separated-2")
    return {name, normal_truth({-2.5, 2.5}, {1.0, 1.0}, {0.5, 0.5}, 100), 2, 400, 200};
  if (name == "dataset1") return {name, circle_truth(4, 2.5, 4.0, 100), 4, 3000, 1000};
  if (name == "fishery")
    // Four length cohorts fitted with five components.
    return {name,
            normal_truth({3.4, 5.3, 7.4, 9.8}, {0.25, 0.3, 0.5, 1.4}, {0.22, 0.45, 0.2, 0.13}, 256),
            5, 2000, 1000};
  if (name == "lamb") {
    // Mostly quiet counts with rare bursts, fitted with four states.
    Matrix th(2, 3);
    th(0, 0) = 0.25; th(0, 1) = 0.95; th(0, 2) = 0.05;
    th(1, 0) = 2.5;  th(1, 1) = 0.30; th(1, 2) = 0.70;
    return {name, {ModelKind::PoissonHmm, std::move(th), 240}, 4, 3000, 1000};
  }
  throw UsageError("unknown fixture preset '" + name + "'");
}

/// Simulates the preset's data with `seed` and runs the matching Gibbs
/// sampler with a seed derived from it.
inline FixtureChain make_fixture(const FixturePreset& preset, std::uint64_t seed) {
  const SimulatedData data = simulate_mixture_data(preset.truth, seed);
  const GibbsSettings settings{preset.iterations, preset.burn, seed ^ 0x9e3779b97f4a7c15ULL};
  FixtureChain chain = [&] {
    switch (preset.truth.kind) {
      case ModelKind::UnivariateNormal: return gibbs_normal_mixture(data.x, preset.K, settings);
      case ModelKind::BivariateNormal:
        return gibbs_bivariate_normal_mixture(data.x, preset.K, settings);
      case ModelKind::PoissonHmm: return gibbs_poisson_hmm(data.x, preset.K, settings);
    }
    throw UsageError("unknown model kind");
  }();
  chain.z_true = data.z;
  chain.seed = seed;
  return chain;
}

}  // namespace lsw
