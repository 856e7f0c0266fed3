#include <gtest/gtest.h>

#include "lsw/pipeline.hpp"
#include "lsw/samplers.hpp"
#include "support.hpp"

using namespace lsw;

namespace {

const FixtureChain& separated3() {
  static const FixtureChain c = make_fixture(preset("separated-3"), 5);
  return c;
}

const Injection& injected() {
  static const Injection inj = inject_label_switching(separated3(), UnivariateNormalMixture{}, 91);
  return inj;
}

RunInputs inputs_of(const FixtureChain& c) { return {&c.mcmc, &c.z, &c.p, &c.x}; }

std::vector<int> draw_vector(const AllocationChain& z, std::size_t t) {
  return {z.draw(t).begin(), z.draw(t).end()};
}

}  // namespace

// ---- single best clustering -------------------------------------------------

TEST(SingleBestClustering, IdentityGivesModalAllocation) {
  Rng g(60);
  Array2<int> a(7, 12);
  for (int& v : a.values()) v = static_cast<int>(rng::below(g, 3));
  const AllocationChain z(a, 3);
  const auto best = single_best_clustering(z, PermutationSet::identity(7, 3));
  for (std::size_t i = 0; i < 12; ++i) {
    std::vector<int> count(3, 0);
    for (std::size_t t = 0; t < 7; ++t) ++count[static_cast<std::size_t>(a(t, i))];
    // Mode with ties to the smallest label.
    const int mode = static_cast<int>(std::max_element(count.begin(), count.end()) - count.begin());
    EXPECT_EQ(best[i], mode);
  }
}

TEST(SingleBestClustering, UndoingInjectionRestoresModalClustering) {
  const auto& inj = injected();
  const auto before = single_best_clustering(separated3().z, PermutationSet::identity(separated3().z.m(), 3));
  EXPECT_EQ(single_best_clustering(inj.chain.z, inj.applied), before);
}

TEST(SingleBestClustering, SingleDraw) {
  Rng g(61);
  const auto z = test::random_labels(g, 20, 4);
  const auto sigma = test::random_permutation(g, 4);
  PermutationSet s(4);
  s.push_back(sigma);
  EXPECT_EQ(single_best_clustering(AllocationChain(Array2<int>(1, 20, z), 4), s), relabel_allocations(z, sigma));
  EXPECT_THROW(single_best_clustering(AllocationChain(Array2<int>(1, 20, z), 4), PermutationSet::identity(2, 4)),
               DataError);
}

// ---- alignment -------------------------------------------------------------

TEST(AlignToReference, Examples) {
  Rng g(62);
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t K = 2 + rng::below(g, 4);
    auto ref = test::random_labels(g, 30, K);
    for (std::size_t k = 0; k < K; ++k) ref[k] = static_cast<int>(k);  // every label present
    EXPECT_TRUE(align_to_reference(ref, ref, K).is_identity());
    const auto sigma = test::random_permutation(g, K);
    const auto moved = apply_to_allocations(ref, sigma);
    const auto rho = align_to_reference(moved, ref, K);
    EXPECT_EQ(rho, invert_permutation(sigma));
    EXPECT_EQ(apply_to_allocations(moved, rho), ref);
  }
}

TEST(AlignToReference, MatchesExhaustiveSearchAtK4) {
  Rng g(63);
  for (int rep = 0; rep < 200; ++rep) {
    const auto a = test::random_labels(g, 25, 4);
    const auto b = test::random_labels(g, 25, 4);
    const auto rho = align_to_reference(a, b, 4);
    int best = -1;
    std::vector<int> arg;
    for (const auto& p : test::lexicographic_permutations(4)) {
      const auto moved = apply_to_allocations(a, Permutation(p));
      int agree = 0;
      for (std::size_t i = 0; i < a.size(); ++i) agree += moved[i] == b[i];
      if (agree > best) {
        best = agree;
        arg = p;
      }
    }
    const auto moved = apply_to_allocations(a, rho);
    int agree = 0;
    for (std::size_t i = 0; i < a.size(); ++i) agree += moved[i] == b[i];
    EXPECT_EQ(agree, best);
  }
}

// ---- similarity ------------------------------------------------------------

TEST(SimilarityMatrix, Examples) {
  Rng g(64);
  const auto a = test::random_labels(g, 100, 3);
  const auto ones = similarity_matrix({a, a, a}, 3);
  for (double v : ones.values()) EXPECT_EQ(v, 1.0);
  auto b = a;
  b[17] = (b[17] + 1) % 3;
  EXPECT_DOUBLE_EQ(similarity_matrix({a, b}, 3)(0, 1), 0.99);
}

TEST(SimilarityMatrix, InvariantUnderCommonRelabelling) {
  Rng g(65);
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t K = 2 + rng::below(g, 4);
    const auto a = test::random_labels(g, 40, K);
    const auto b = test::random_labels(g, 40, K);
    const auto sigma = test::random_permutation(g, K);
    const auto tau = test::random_permutation(g, K);
    const double base = similarity_matrix({a, b}, K)(0, 1);
    EXPECT_EQ(similarity_matrix({apply_to_allocations(a, sigma), apply_to_allocations(b, sigma)}, K)(0, 1), base);
    EXPECT_EQ(similarity_matrix({apply_to_allocations(a, sigma), apply_to_allocations(b, tau)}, K)(0, 1), base);
    const auto s = similarity_matrix({a, b}, K);
    EXPECT_EQ(s(0, 1), s(1, 0));
  }
}

TEST(SimilarityMatrix, LengthMismatch) {
  EXPECT_THROW(similarity_matrix({{0, 1}, {0}}, 2), DataError);
}

// ---- permute mcmc ----------------------------------------------------------

TEST(PermuteMcmc, RoundTrip) {
  Rng g(66);
  const auto& c = separated3();
  EXPECT_EQ(permute_mcmc(c.mcmc, PermutationSet::identity(c.mcmc.m(), 3)).array().values(),
            c.mcmc.array().values());
  PermutationSet perms(3), inverse(3);
  for (std::size_t t = 0; t < c.mcmc.m(); ++t) {
    perms.push_back(test::random_permutation(g, 3));
    inverse.push_back(invert_permutation(perms[t]));
  }
  const auto back = permute_mcmc(permute_mcmc(c.mcmc, perms), inverse);
  EXPECT_EQ(back.array().values(), c.mcmc.array().values());
}

TEST(PermuteMcmc, OrderingConstraintSortsFirstColumn) {
  const auto& c = injected().chain;
  const auto sorted = permute_mcmc(c.mcmc, ordering_constraint(c.mcmc, 0).permutations);
  for (std::size_t t = 0; t < sorted.m(); ++t)
    for (std::size_t k = 1; k < sorted.K(); ++k) ASSERT_LE(sorted(t, k - 1, 0), sorted(t, k, 0));
}

TEST(PermuteMcmc, ModelAwareMovesTransitionColumns) {
  const PoissonHmm model;
  // lambda | w row: K=2, J = 1 + K
  Array3<double> a(1, 2, 3, std::vector<double>{1.0, 0.9, 0.1, 5.0, 0.2, 0.8});
  const ParameterChain chain(std::move(a));
  PermutationSet swap(2);
  swap.push_back(Permutation({1, 0}));
  const auto out = permute_mcmc(chain, swap, model);
  EXPECT_EQ(out.array().values(), (std::vector<double>{5.0, 0.8, 0.2, 1.0, 0.1, 0.9}));
}

// ---- map pivot -------------------------------------------------------------

TEST(SelectMapPivot, SingleDraw) {
  const auto c = test::constant_chain(1, {0, 1, 1}, 2);
  EXPECT_EQ(select_map_pivot(UnivariateNormalMixture{}, c.mcmc, c.z, c.x), 0u);
}

TEST(SelectMapPivot, AttainsScannedMaximum) {
  const auto& c = separated3();
  const UnivariateNormalMixture model;
  const std::size_t best = select_map_pivot(model, c.mcmc, c.z, c.x, 4);
  double max = -std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < c.mcmc.m(); ++t)
    max = std::max(max, complete_log_likelihood(model, c.mcmc.draw(t), c.x, c.z.draw(t)));
  EXPECT_EQ(complete_log_likelihood(model, c.mcmc.draw(best), c.x, c.z.draw(best)), max);
  EXPECT_EQ(best, c.map_index);
}

TEST(SelectMapPivot, PrefersPlantedTruth) {
  FixtureChain c = separated3();
  const auto truth = preset("separated-3").truth;
  const std::size_t planted = 123;
  c.mcmc.set_draw(planted, truth.params);
  const UnivariateNormalMixture model;
  Array2<int> z = c.z.array();
  std::copy(c.z_true->begin(), c.z_true->end(), z.row(planted).begin());
  const AllocationChain zc(std::move(z), 3);
  const std::size_t best = select_map_pivot(model, c.mcmc, zc, c.x);
  EXPECT_GE(complete_log_likelihood(model, c.mcmc.draw(best), c.x, zc.draw(best)),
            complete_log_likelihood(model, truth.params, c.x, *c.z_true));
}

// ---- run -------------------------------------------------------------------

TEST(Run, MissingInputsAreReported) {
  const auto& c = separated3();
  const UnivariateNormalMixture model;
  struct Case {
    Method method;
    RunInputs in;
    std::string missing;
  };
  const std::vector<Case> cases{
      {Method::Stephens, {&c.mcmc, &c.z, nullptr, &c.x}, "p"},
      {Method::Pra, inputs_of(c), "prapivot"},
      {Method::Ecr, inputs_of(c), "zpivot"},
      {Method::EcrIterative1, {&c.mcmc, nullptr, &c.p, &c.x}, "z"},
      {Method::EcrIterative2, {&c.mcmc, &c.z, nullptr, &c.x}, "p"},
      {Method::Aic, {nullptr, &c.z, &c.p, &c.x}, "mcmc"},
      {Method::DataBased, {&c.mcmc, &c.z, &c.p, nullptr}, "data"},
      {Method::Sjw, inputs_of(c), "complete"},
      {Method::UserPerm, inputs_of(c), "userPerm"},
  };
  for (const auto& cs : cases) {
    RunConfig cfg;
    cfg.methods = {cs.method};
    try {
      run(cfg, cs.in);
      ADD_FAILURE() << method_name(cs.method) << " ran without " << cs.missing;
    } catch (const MissingInput& e) {
      EXPECT_EQ(e.method(), cs.method);
      EXPECT_EQ(e.input(), cs.missing);
      EXPECT_NE(std::string(e.what()).find(cs.missing), std::string::npos);
    }
  }
  RunConfig cfg;
  EXPECT_THROW(run(cfg, inputs_of(c)), UsageError);
  cfg.methods = {Method::Sjw};
  cfg.model = &model;
  EXPECT_NO_THROW(run(cfg, inputs_of(c)));
}

TEST(Run, NamesWithGroundTruth) {
  const auto& c = separated3();
  RunConfig cfg;
  cfg.methods = {Method::Ecr, Method::Aic, Method::Stephens};
  cfg.zpivots = {draw_vector(c.z, 0), draw_vector(c.z, 1)};
  cfg.constraint.all = true;
  cfg.ground_truth = *c.z_true;
  const auto r = run(cfg, inputs_of(c));
  const std::vector<std::string> expected{"ECR-1", "ECR-2", "AIC-1", "AIC-2", "AIC-3", "STEPHENS", "TRUE"};
  EXPECT_EQ(r.labels, expected);
  EXPECT_EQ(r.runs.size(), 6u);
  EXPECT_EQ(r.similarity.rows(), 7u);
  EXPECT_EQ(r.reference, "ground truth");

  cfg.zpivots.resize(1);
  cfg.constraint = {false, 2};
  cfg.ground_truth.reset();
  const auto single = run(cfg, inputs_of(c));
  EXPECT_EQ(single.labels, (std::vector<std::string>{"ECR", "AIC", "STEPHENS"}));
  EXPECT_EQ(single.reference, "ECR");
}

TEST(Run, ReferenceIsAlignmentFixedPoint) {
  const auto& c = injected().chain;
  for (bool truth : {false, true}) {
    RunConfig cfg;
    cfg.methods = {Method::Stephens, Method::EcrIterative1, Method::Aic};
    if (truth) cfg.ground_truth = *separated3().z_true;
    const auto r = run(cfg, inputs_of(c));
    const auto& reference = truth ? *cfg.ground_truth : r.runs.front().clusters;
    for (const auto& mr : r.runs) {
      EXPECT_TRUE(align_to_reference(mr.clusters, reference, 3).is_identity()) << mr.name;
      EXPECT_EQ(single_best_clustering(c.z, mr.output.permutations), mr.clusters);
    }
  }
}

TEST(Run, UnswitchedEcr) {
  const std::vector<int> zs{0, 1, 1, 2, 0, 2};
  const auto c = test::constant_chain(5, zs, 3);
  RunConfig cfg;
  cfg.methods = {Method::Ecr};
  cfg.zpivots = {zs};
  const auto r = run(cfg, {&c.mcmc, &c.z, &c.p, &c.x});
  for (const auto& p : r.runs[0].output.permutations.rows()) EXPECT_TRUE(p.is_identity());
  EXPECT_EQ(r.runs[0].clusters, zs);
  EXPECT_EQ(r.similarity.rows(), 1u);
  EXPECT_EQ(r.similarity(0, 0), 1.0);
}

TEST(Run, StephensAndEcrAgreeOnInjectedFixture) {
  const auto& c = injected().chain;
  RunConfig cfg;
  cfg.methods = {Method::Stephens, Method::Ecr};
  cfg.zpivots = {draw_vector(c.z, select_map_pivot(UnivariateNormalMixture{}, c.mcmc, c.z, c.x))};
  const auto r = run(cfg, inputs_of(c));
  EXPECT_EQ(r.similarity(0, 1), 1.0);
}

TEST(Run, ConstraintRangeChecked) {
  const auto& c = separated3();
  RunConfig cfg;
  cfg.methods = {Method::Aic};
  cfg.constraint = {false, 3};
  EXPECT_THROW(run(cfg, inputs_of(c)), UsageError);
}

TEST(Run, ShapeMismatchIsDataError) {
  const auto& c = separated3();
  const auto other = test::constant_chain(3, {0, 1, 2}, 3);
  RunConfig cfg;
  cfg.methods = {Method::EcrIterative2};
  EXPECT_THROW(run(cfg, {nullptr, &c.z, &other.p, nullptr}), DataError);
  cfg.methods = {Method::Stephens};
  cfg.ground_truth = std::vector<int>{0, 1};
  EXPECT_THROW(run(cfg, inputs_of(c)), DataError);
}

TEST(Run, ClustersFromProbabilitiesWithoutAllocations) {
  const auto& c = injected().chain;
  RunConfig cfg;
  cfg.methods = {Method::Stephens};
  const auto r = run(cfg, {nullptr, nullptr, &c.p, nullptr});
  EXPECT_EQ(r.runs[0].clusters.size(), c.p.n());
}

TEST(Run, ResultsDoNotDependOnThreadCount) {
  const auto& c = injected().chain;
  const UnivariateNormalMixture model;
  auto go = [&](unsigned threads) {
    RunConfig cfg;
    cfg.methods = {Method::Stephens, Method::Pra, Method::Ecr, Method::EcrIterative1,
                   Method::EcrIterative2, Method::Aic, Method::DataBased};
    cfg.zpivots = {draw_vector(c.z, 10)};
    cfg.prapivot = c.mcmc.draw(10);
    cfg.model = &model;
    cfg.threads = threads;
    return run(cfg, inputs_of(c));
  };
  const auto a = go(1), b = go(4);
  ASSERT_EQ(a.runs.size(), b.runs.size());
  for (std::size_t r = 0; r < a.runs.size(); ++r) {
    EXPECT_EQ(a.runs[r].output.permutations, b.runs[r].output.permutations);
    EXPECT_EQ(a.runs[r].output.objective_trace, b.runs[r].output.objective_trace);
  }
  EXPECT_EQ(a.similarity.values(), b.similarity.values());
}

// ---- fishery ---------------------------------------------------------------

TEST(Fishery, MethodsAgreePairwise) {
  const FixtureChain c = make_fixture(preset("fishery"), 2);
  RunConfig cfg;
  cfg.methods = {Method::Stephens, Method::Ecr, Method::EcrIterative1, Method::EcrIterative2};
  cfg.zpivots = {draw_vector(c.z, c.map_index)};
  const auto r = run(cfg, inputs_of(c));
  for (std::size_t a = 0; a < 4; ++a)
    for (std::size_t b = 0; b < 4; ++b) EXPECT_GE(r.similarity(a, b), 0.95) << r.labels[a] << " vs " << r.labels[b];
}
