#include <gtest/gtest.h>

#include "lsw/models.hpp"
#include "support.hpp"

using namespace lsw;

namespace {

Matrix random_normal_params(Rng& g, std::size_t K) {
  Matrix th(K, 3);
  const auto w = test::random_simplex(g, K);
  for (std::size_t k = 0; k < K; ++k) {
    th(k, 0) = rng::normal(g, 0.0, 3.0);
    th(k, 1) = 0.2 + 2.0 * rng::uniform(g);
    th(k, 2) = w[k];
  }
  return th;
}

Matrix random_bivariate_params(Rng& g, std::size_t K) {
  Matrix th(K, 6);
  const auto w = test::random_simplex(g, K);
  for (std::size_t k = 0; k < K; ++k) {
    th(k, 0) = rng::normal(g, 0.0, 3.0);
    th(k, 1) = rng::normal(g, 0.0, 3.0);
    th(k, 2) = 0.5 + rng::uniform(g);
    th(k, 3) = 0.5 + rng::uniform(g);
    th(k, 4) = (2.0 * rng::uniform(g) - 1.0) * 0.9 * std::sqrt(th(k, 2) * th(k, 3));
    th(k, 5) = w[k];
  }
  return th;
}

Matrix random_hmm_params(Rng& g, std::size_t K) {
  Matrix th(K, K + 1);
  const Matrix w = test::random_stochastic(g, K);
  for (std::size_t k = 0; k < K; ++k) {
    th(k, 0) = 0.2 + 5.0 * rng::uniform(g);
    for (std::size_t c = 0; c < K; ++c) th(k, 1 + c) = w(k, c);
  }
  return th;
}

Dataset sample_data(Rng& g, ModelKind kind, std::size_t n) {
  if (kind == ModelKind::BivariateNormal) {
    Matrix x(n, 2);
    for (double& v : x.values()) v = rng::normal(g, 0.0, 3.0);
    return Dataset(std::move(x));
  }
  std::vector<double> x(n);
  for (double& v : x)
    v = kind == ModelKind::PoissonHmm ? static_cast<double>(rng::poisson(g, 2.0))
                                      : rng::normal(g, 0.0, 3.0);
  return Dataset(std::move(x));
}

Matrix random_params(Rng& g, ModelKind kind, std::size_t K) {
  switch (kind) {
    case ModelKind::UnivariateNormal: return random_normal_params(g, K);
    case ModelKind::BivariateNormal: return random_bivariate_params(g, K);
    case ModelKind::PoissonHmm: return random_hmm_params(g, K);
  }
  return {};
}

}  // namespace

TEST(ClassificationProbabilities, MidpointIsHalf) {
  const Matrix th(2, 3, std::vector<double>{-1.0, 1.0, 0.5, 1.0, 1.0, 0.5});
  const Matrix p =
      classification_probabilities(UnivariateNormalMixture{}, th, Dataset(std::vector<double>{0.0}));
  EXPECT_DOUBLE_EQ(p(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(p(0, 1), 0.5);
}

TEST(ClassificationProbabilities, SingleComponentIsOne) {
  Rng g(31);
  const Matrix th(1, 3, std::vector<double>{2.0, 3.0, 1.0});
  const Matrix p =
      classification_probabilities(UnivariateNormalMixture{}, th, sample_data(g, ModelKind::UnivariateNormal, 25));
  for (double v : p.values()) EXPECT_EQ(v, 1.0);
}

TEST(ClassificationProbabilities, MatchesNaiveDensityRatio) {
  Rng g(32);
  const Matrix th = random_normal_params(g, 3);
  const Dataset x = sample_data(g, ModelKind::UnivariateNormal, 20);
  const Matrix p = classification_probabilities(UnivariateNormalMixture{}, th, x);
  for (std::size_t i = 0; i < 20; ++i) {
    double f[3], sum = 0.0;
    for (std::size_t k = 0; k < 3; ++k) {
      f[k] = th(k, 2) / std::sqrt(2.0 * std::numbers::pi * th(k, 1)) *
             std::exp(-0.5 * (x(i, 0) - th(k, 0)) * (x(i, 0) - th(k, 0)) / th(k, 1));
      sum += f[k];
    }
    for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(p(i, k), f[k] / sum, 1e-12);
  }
}

TEST(ClassificationProbabilities, BivariateMatchesNaiveDensity) {
  Rng g(33);
  const Matrix th = random_bivariate_params(g, 3);
  const Dataset x = sample_data(g, ModelKind::BivariateNormal, 20);
  const Matrix p = classification_probabilities(BivariateNormalMixture{}, th, x);
  for (std::size_t i = 0; i < 20; ++i) {
    double f[3], sum = 0.0;
    for (std::size_t k = 0; k < 3; ++k) {
      const double s11 = th(k, 2), s22 = th(k, 3), s12 = th(k, 4);
      const double det = s11 * s22 - s12 * s12;
      const double d1 = x(i, 0) - th(k, 0), d2 = x(i, 1) - th(k, 1);
      const double q = (s22 * d1 * d1 - 2.0 * s12 * d1 * d2 + s11 * d2 * d2) / det;
      f[k] = th(k, 5) * std::exp(-0.5 * q) / (2.0 * std::numbers::pi * std::sqrt(det));
      sum += f[k];
    }
    for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(p(i, k), f[k] / sum, 1e-12);
  }
}

TEST(ClassificationProbabilities, HmmUsesStationaryWeights) {
  Rng g(34);
  const Matrix th = random_hmm_params(g, 3);
  const Dataset x = sample_data(g, ModelKind::PoissonHmm, 15);
  const auto pi = stationary_distribution(PoissonHmm::transition_matrix(th));
  const Matrix p = classification_probabilities(PoissonHmm{}, th, x);
  for (std::size_t i = 0; i < 15; ++i) {
    double f[3], sum = 0.0;
    for (std::size_t k = 0; k < 3; ++k) {
      f[k] = pi[k] * std::pow(th(k, 0), x(i, 0)) * std::exp(-th(k, 0)) / std::tgamma(x(i, 0) + 1);
      sum += f[k];
    }
    for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(p(i, k), f[k] / sum, 1e-12);
  }
}

TEST(ClassificationProbabilities, RowsSumToOneForAllFamilies) {
  Rng g(35);
  for (ModelKind kind : {ModelKind::UnivariateNormal, ModelKind::BivariateNormal, ModelKind::PoissonHmm}) {
    const auto model = make_model(kind);
    for (int rep = 0; rep < 20; ++rep) {
      const Matrix p = classification_probabilities(*model, random_params(g, kind, 4),
                                                    sample_data(g, kind, 30));
      for (std::size_t i = 0; i < p.rows(); ++i) {
        double s = 0.0;
        for (double v : p.row(i)) s += v;
        EXPECT_NEAR(s, 1.0, 1e-8);
      }
    }
  }
}

TEST(ClassificationProbabilities, UnnormalizedWeightsGiveSameResult) {
  Rng g(36);
  const Matrix th = random_normal_params(g, 3);
  LogTerms terms = UnivariateNormalMixture{}.log_terms(th, sample_data(g, ModelKind::UnivariateNormal, 10));
  const Matrix p = classification_probabilities(terms);
  for (double& v : terms.log_weight) v += std::log(7.5);
  const Matrix q = classification_probabilities(terms);
  for (std::size_t e = 0; e < p.size(); ++e) EXPECT_NEAR(p.values()[e], q.values()[e], 1e-15);
}

TEST(ClassificationProbabilities, ExtremeSeparationDoesNotUnderflow) {
  const Matrix th(2, 3, std::vector<double>{-1e3, 1.0, 0.5, 1e3, 1.0, 0.5});
  const Matrix p =
      classification_probabilities(UnivariateNormalMixture{}, th, Dataset(std::vector<double>{5e3}));
  EXPECT_EQ(p(0, 1), 1.0);
  EXPECT_EQ(p(0, 0), 0.0);
}

TEST(CompleteLogLikelihood, StandardNormalConstant) {
  const Matrix th(1, 3, std::vector<double>{0.0, 1.0, 1.0});
  EXPECT_NEAR(complete_log_likelihood(UnivariateNormalMixture{}, th, Dataset(std::vector<double>{0.0}),
                                      std::vector<int>{0}),
              -0.9189385332046727, 1e-12);
}

TEST(CompleteLogLikelihood, MixtureSumOfTerms) {
  Rng g(37);
  const Matrix th = random_normal_params(g, 3);
  const Dataset x = sample_data(g, ModelKind::UnivariateNormal, 12);
  const auto z = test::random_labels(g, 12, 3);
  double expected = 0.0;
  for (std::size_t i = 0; i < 12; ++i) {
    const auto k = static_cast<std::size_t>(z[i]);
    expected += std::log(th(k, 2)) + test::normal_log_density(x(i, 0), th(k, 0), th(k, 1));
  }
  EXPECT_NEAR(complete_log_likelihood(UnivariateNormalMixture{}, th, x, z), expected, 1e-10);
}

TEST(CompleteLogLikelihood, HmmMatchesProductForm) {
  const Matrix th(2, 3, std::vector<double>{0.5, 0.8, 0.2, 4.0, 0.3, 0.7});
  const std::vector<double> counts{0, 1, 5, 3, 0};
  const std::vector<int> z{0, 0, 1, 1, 0};
  // pi solves pi w = pi: pi_1 = 0.3 / (0.2 + 0.3).
  const double pi[2] = {0.6, 0.4};
  const double w[2][2] = {{0.8, 0.2}, {0.3, 0.7}};
  const double lam[2] = {0.5, 4.0};
  auto pois = [&](double v, double l) { return std::pow(l, v) * std::exp(-l) / std::tgamma(v + 1); };
  double product = pi[z[0]] * pois(counts[0], lam[z[0]]);
  for (std::size_t i = 1; i < 5; ++i)
    product *= w[z[i - 1]][z[i]] * pois(counts[i], lam[z[i]]);
  EXPECT_NEAR(complete_log_likelihood(PoissonHmm{}, th, Dataset(counts), z), std::log(product),
              1e-10);
}

TEST(CompleteLogLikelihood, ZeroWeightOnUsedLabelIsMinusInfinity) {
  const Matrix th(2, 3, std::vector<double>{0.0, 1.0, 1.0, 5.0, 1.0, 0.0});
  EXPECT_EQ(complete_log_likelihood(UnivariateNormalMixture{}, th, Dataset(std::vector<double>{1.0}),
                                    std::vector<int>{1}),
            -std::numeric_limits<double>::infinity());
}

TEST(CompleteLogLikelihood, InvariantUnderRelabelling) {
  Rng g(38);
  for (ModelKind kind : {ModelKind::UnivariateNormal, ModelKind::BivariateNormal, ModelKind::PoissonHmm}) {
    const auto model = make_model(kind);
    for (int rep = 0; rep < 100; ++rep) {
      const std::size_t K = 2 + rng::below(g, 4);
      const Matrix th = random_params(g, kind, K);
      const Dataset x = sample_data(g, kind, 25);
      const auto z = test::random_labels(g, 25, K);
      const Permutation s = test::random_permutation(g, K);
      const double a = complete_log_likelihood(*model, th, x, z);
      const double b = complete_log_likelihood(*model, model->permute(th, s), x,
                                               apply_to_allocations(z, invert_permutation(s)));
      EXPECT_NEAR(a, b, 1e-8) << model->name();
    }
  }
}

TEST(StationaryDistribution, UniformMatrix) {
  for (std::size_t K = 1; K <= 6; ++K) {
    const auto pi = stationary_distribution(Matrix(K, K, 1.0 / static_cast<double>(K)));
    for (double v : pi) EXPECT_NEAR(v, 1.0 / static_cast<double>(K), 1e-14);
  }
}

TEST(StationaryDistribution, TwoStateBalance) {
  const auto pi = stationary_distribution(Matrix(2, 2, std::vector<double>{0.9, 0.1, 0.5, 0.5}));
  EXPECT_NEAR(pi[0], 5.0 / 6.0, 1e-14);
  EXPECT_NEAR(pi[1], 1.0 / 6.0, 1e-14);
}

TEST(StationaryDistribution, ResidualOnRandomMatrices) {
  Rng g(39);
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t K = 2 + rng::below(g, 7);
    const Matrix w = test::random_stochastic(g, K);
    const auto pi = stationary_distribution(w);
    double sum = 0.0, residual = 0.0;
    for (std::size_t c = 0; c < K; ++c) {
      double v = 0.0;
      for (std::size_t r = 0; r < K; ++r) v += pi[r] * w(r, c);
      residual = std::max(residual, std::abs(v - pi[c]));
      sum += pi[c];
      EXPECT_GE(pi[c], 0.0);
    }
    EXPECT_LT(residual, 1e-9);
    EXPECT_NEAR(sum, 1.0, 1e-12);
  }
}

TEST(StationaryDistribution, ReducibleChainSignals) {
  Matrix eye(3, 3, 0.0);
  for (std::size_t k = 0; k < 3; ++k) eye(k, k) = 1.0;
  EXPECT_THROW(stationary_distribution(eye), DataError);
  EXPECT_THROW(stationary_distribution(Matrix(2, 2, std::vector<double>{0.5, 0.6, 0.5, 0.5})),
               DataError);
}

TEST(Models, ValidateFamilyInvariants) {
  EXPECT_THROW(UnivariateNormalMixture{}.validate(Matrix(2, 3, std::vector<double>{0, -1, 0.5, 1, 1, 0.5})),
               DataError);
  EXPECT_THROW(UnivariateNormalMixture{}.validate(Matrix(2, 3, std::vector<double>{0, 1, 0.6, 1, 1, 0.5})),
               DataError);
  EXPECT_THROW(UnivariateNormalMixture{}.validate(Matrix(2, 4)), DataError);
  // |Sigma12| > sqrt(Sigma11 Sigma22) is not positive definite.
  EXPECT_THROW(BivariateNormalMixture{}.validate(Matrix(1, 6, std::vector<double>{0, 0, 1, 1, 1.5, 1})),
               DataError);
  EXPECT_THROW(PoissonHmm{}.validate(Matrix(1, 2, std::vector<double>{-1, 1})), DataError);
  EXPECT_THROW(PoissonHmm{}.log_terms(Matrix(1, 2, std::vector<double>{1, 1}),
                                      Dataset(std::vector<double>{-1.0})),
               DataError);
  EXPECT_THROW(PoissonHmm{}.log_terms(Matrix(1, 2, std::vector<double>{1, 1}),
                                      Dataset(std::vector<double>{0.5})),
               DataError);
}

TEST(Models, HmmPermuteReordersBothTransitionAxes) {
  Rng g(40);
  const Matrix th = random_hmm_params(g, 4);
  const Permutation s = test::random_permutation(g, 4);
  const Matrix moved = PoissonHmm{}.permute(th, s);
  for (std::size_t k = 0; k < 4; ++k) {
    EXPECT_EQ(moved(k, 0), th(static_cast<std::size_t>(s[k]), 0));
    for (std::size_t c = 0; c < 4; ++c)
      EXPECT_EQ(moved(k, 1 + c), th(static_cast<std::size_t>(s[k]), 1 + static_cast<std::size_t>(s[c])));
  }
  const auto pi = stationary_distribution(PoissonHmm::transition_matrix(th));
  const auto pi_moved = stationary_distribution(PoissonHmm::transition_matrix(moved));
  for (std::size_t k = 0; k < 4; ++k) EXPECT_NEAR(pi_moved[k], pi[static_cast<std::size_t>(s[k])], 1e-12);
}

TEST(Models, ParseNames) {
  EXPECT_EQ(parse_model_kind("normal"), ModelKind::UnivariateNormal);
  EXPECT_EQ(parse_model_kind("bivariate-normal"), ModelKind::BivariateNormal);
  EXPECT_EQ(parse_model_kind("poisson-hmm"), ModelKind::PoissonHmm);
  EXPECT_THROW(parse_model_kind("gamma"), UsageError);
  EXPECT_EQ(make_model(ModelKind::PoissonHmm)->parameter_count(4), 5u);
  EXPECT_EQ(make_model(ModelKind::BivariateNormal)->parameter_count(4), 6u);
}
