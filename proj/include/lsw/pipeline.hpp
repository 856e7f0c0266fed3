#pragma once

// Orchestration of several relabelling methods over one MCMC output:
// dispatch, pivots, single best clusterings, alignment to a reference and
// the pairwise similarity matrix.

#include <chrono>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lsw/assignment.hpp"
#include "lsw/core.hpp"
#include "lsw/methods.hpp"
#include "lsw/models.hpp"
#include "lsw/parallel.hpp"

namespace lsw {

enum class Method { Stephens, Pra, Ecr, EcrIterative1, EcrIterative2, Sjw, Aic, DataBased, UserPerm };

inline constexpr std::string_view method_name(Method m) {
  switch (m) {
    case Method::Stephens: return "STEPHENS";
    case Method::Pra: return "PRA";
    case Method::Ecr: return "ECR";
    case Method::EcrIterative1: return "ECR-ITERATIVE-1";
    case Method::EcrIterative2: return "ECR-ITERATIVE-2";
    case Method::Sjw: return "SJW";
    case Method::Aic: return "AIC";
    case Method::DataBased: return "DATA-BASED";
    case Method::UserPerm: return "USER-PERM";
  }
  return "?";
}

inline Method parse_method(std::string_view s) {
  for (Method m : {Method::Stephens, Method::Pra, Method::Ecr, Method::EcrIterative1,
                   Method::EcrIterative2, Method::Sjw, Method::Aic, Method::DataBased,
                   Method::UserPerm})
    if (s == method_name(m)) return m;
  throw UsageError("unknown method '" + std::string(s) + "'");
}

/// A selected method is missing one of its required inputs.
class MissingInput : public UsageError {
 public:
  MissingInput(Method method, std::string_view input)
      : UsageError("method " + std::string(method_name(method)) + " requires input '" +
                   std::string(input) + "'"),
        method_(method),
        input_(input) {}
  Method method() const noexcept { return method_; }
  const std::string& input() const noexcept { return input_; }

 private:
  Method method_;
  std::string input_;
};

struct Constraint {
  bool all = false;
  std::size_t index = 0;  // 0-based parameter column
};

struct RunConfig {
  std::vector<Method> methods;
  std::vector<std::vector<int>> zpivots;
  std::optional<Matrix> prapivot;
  Constraint constraint;
  std::optional<std::vector<int>> ground_truth;
  IterativeOptions ecr_options;
  IterativeOptions stephens_options;
  IterativeOptions sjw_options;
  std::optional<std::size_t> sjw_init;   // 0-based draw index
  std::vector<PermutationSet> user_perms;
  const Model* model = nullptr;          // complete likelihood (SJW, MAP pivot)
  std::optional<std::size_t> K;
  unsigned threads = 1;
};

/// Non-owning view of the available inputs; null means absent.
struct RunInputs {
  const ParameterChain* mcmc = nullptr;
  const AllocationChain* z = nullptr;
  const ClassificationChain* p = nullptr;
  const Dataset* x = nullptr;
};

struct MethodRun {
  std::string name;
  Method method;
  MethodOutput output;
  std::vector<int> clusters;  // empty when no allocation information exists
  double seconds = 0.0;
};

struct RelabelResult {
  std::vector<MethodRun> runs;
  /// Row/column labels of `similarity`: run names, then "TRUE" when a ground
  /// truth was supplied.
  std::vector<std::string> labels;
  Matrix similarity;
  std::string reference;
  std::size_t K = 0;
};

/// Per-observation mode of the allocations relabelled by `perms`.
inline std::vector<int> single_best_clustering(const AllocationChain& z,
                                               const PermutationSet& perms) {
  if (perms.m() != z.m() || perms.K() != z.K())
    throw DataError("single_best_clustering: permutations are " + std::to_string(perms.m()) +
                    " x " + std::to_string(perms.K()) + ", chain is " +
                    std::to_string(z.m()) + " x K = " + std::to_string(z.K()));
  return mode_per_observation(relabelled_allocations(z, perms), z.K());
}

/// Label map rho (applied as rho[cluster_i]) maximizing agreement with the
/// reference.
inline Permutation align_to_reference(std::span<const int> cluster,
                                      std::span<const int> reference, std::size_t K) {
  if (cluster.size() != reference.size())
    throw DataError("align_to_reference: lengths differ");
  detail::check_pivot(cluster, cluster.size(), K, "align_to_reference");
  detail::check_pivot(reference, reference.size(), K, "align_to_reference");
  return invert_permutation(ecr_assign(cluster, reference, K).perm);
}

/// Proportion of matching labels after the best label map between each pair.
inline Matrix similarity_matrix(const std::vector<std::vector<int>>& clusterings,
                                std::size_t K) {
  const std::size_t f = clusterings.size();
  Matrix s(f, f, 1.0);
  if (f == 0) return s;
  const std::size_t n = clusterings.front().size();
  for (const auto& c : clusterings)
    if (c.size() != n) throw DataError("similarity_matrix: clusterings differ in length");
  if (n == 0) return s;
  for (std::size_t a = 0; a < f; ++a)
    for (std::size_t b = a + 1; b < f; ++b) {
      const double matches = ecr_assign(clusterings[a], clusterings[b], K).objective;
      s(a, b) = s(b, a) = matches / static_cast<double>(n);
    }
  return s;
}

/// Reorders each draw's rows: out(t, k, j) = mcmc(t, perms[t][k], j).
inline ParameterChain permute_mcmc(const ParameterChain& mcmc, const PermutationSet& perms) {
  if (perms.m() != mcmc.m() || perms.K() != mcmc.K())
    throw DataError("permute_mcmc: permutations are " + std::to_string(perms.m()) + " x " +
                    std::to_string(perms.K()) + ", chain is " + std::to_string(mcmc.m()) +
                    " x " + std::to_string(mcmc.K()));
  Array3<double> out(mcmc.m(), mcmc.K(), mcmc.J());
  for (std::size_t t = 0; t < mcmc.m(); ++t)
    for (std::size_t k = 0; k < mcmc.K(); ++k) {
      const auto src = static_cast<std::size_t>(perms[t][k]);
      for (std::size_t j = 0; j < mcmc.J(); ++j) out(t, k, j) = mcmc(t, src, j);
    }
  return ParameterChain(std::move(out));
}

/// Model-aware variant: label-indexed columns (HMM transitions) move too.
inline ParameterChain permute_mcmc(const ParameterChain& mcmc, const PermutationSet& perms,
                                   const Model& model) {
  if (perms.m() != mcmc.m() || perms.K() != mcmc.K())
    throw DataError("permute_mcmc: permutations do not match chain");
  ParameterChain out = mcmc;
  for (std::size_t t = 0; t < mcmc.m(); ++t)
    out.set_draw(t, model.permute(mcmc.draw(t), perms[t]));
  return out;
}

/// Draw index maximizing the complete log-likelihood; ties to the smallest.
inline std::size_t select_map_pivot(const Model& model, const ParameterChain& mcmc,
                                    const AllocationChain& z, const Dataset& x,
                                    unsigned threads = 1) {
  if (z.m() != mcmc.m() || z.K() != mcmc.K())
    throw DataError("select_map_pivot: allocation chain does not match parameter chain");
  if (z.n() != x.n()) throw DataError("select_map_pivot: data and allocations disagree on n");
  std::vector<double> ll(mcmc.m());
  parallel_for(mcmc.m(), threads, [&](std::size_t t) {
    ll[t] = complete_log_likelihood(model, mcmc.draw(t), x, z.draw(t));
  });
  std::size_t best = 0;
  bool found = false;
  for (std::size_t t = 0; t < ll.size(); ++t) {
    if (std::isnan(ll[t]) || ll[t] == -std::numeric_limits<double>::infinity()) continue;
    if (!found || ll[t] > ll[best]) {
      best = t;
      found = true;
    }
  }
  if (!found) throw DataError("select_map_pivot: complete likelihood non-finite at every draw");
  return best;
}

/// Most probable allocation per observation and draw, used for clusterings
/// when only classification probabilities are available.
inline AllocationChain map_allocations(const ClassificationChain& p) {
  Array2<int> z(p.m(), p.n());
  for (std::size_t t = 0; t < p.m(); ++t) {
    auto s = p.slice(t);
    for (std::size_t i = 0; i < p.n(); ++i) {
      auto row = s.subspan(i * p.K(), p.K());
      z(t, i) = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
    }
  }
  return AllocationChain(std::move(z), p.K());
}

namespace detail {

inline void check_chain_shapes(const RunInputs& in, std::size_t K) {
  std::optional<std::size_t> m, n;
  auto agree = [](std::optional<std::size_t>& slot, std::size_t v, const char* what) {
    if (slot && *slot != v)
      throw DataError(std::string("inputs disagree on ") + what + " (" + std::to_string(*slot) +
                      " vs " + std::to_string(v) + ")");
    slot = v;
  };
  if (in.mcmc) {
    agree(m, in.mcmc->m(), "m");
    if (in.mcmc->K() != K) throw DataError("mcmc has K = " + std::to_string(in.mcmc->K()) +
                                           ", expected " + std::to_string(K));
  }
  if (in.z) {
    agree(m, in.z->m(), "m");
    agree(n, in.z->n(), "n");
    if (in.z->K() > K) throw DataError("allocations use more than K labels");
  }
  if (in.p) {
    agree(m, in.p->m(), "m");
    agree(n, in.p->n(), "n");
    if (in.p->K() != K) throw DataError("p has K = " + std::to_string(in.p->K()) +
                                        ", expected " + std::to_string(K));
  }
  if (in.x) agree(n, in.x->n(), "n");
}

inline std::size_t infer_K(const RunConfig& cfg, const RunInputs& in) {
  if (cfg.K) return *cfg.K;
  if (in.mcmc) return in.mcmc->K();
  if (in.p) return in.p->K();
  if (in.z) {
    int hi = 0;
    for (int v : in.z->array().values()) hi = std::max(hi, v);
    return static_cast<std::size_t>(hi) + 1;
  }
  if (!cfg.user_perms.empty()) return cfg.user_perms.front().K();
  throw UsageError("cannot determine K: supply z, p, mcmc or K");
}

inline std::string numbered(Method m, std::size_t index, std::size_t count) {
  std::string name(method_name(m));
  if (count > 1) name += "-" + std::to_string(index + 1);
  return name;
}

}  // namespace detail

/// Runs every configured method, aligns the resulting single best
/// clusterings to the reference (ground truth when given, otherwise the
/// first method) and fills the similarity matrix.
inline RelabelResult run(const RunConfig& cfg, const RunInputs& in) {
  if (cfg.methods.empty()) throw UsageError("no relabelling method selected");

  for (Method method : cfg.methods) {
    auto need = [&](bool present, std::string_view what) {
      if (!present) throw MissingInput(method, what);
    };
    switch (method) {
      case Method::Aic: need(in.mcmc, "mcmc"); break;
      case Method::DataBased: need(in.z, "z"); need(in.x, "data"); break;
      case Method::Ecr: need(in.z, "z"); need(!cfg.zpivots.empty(), "zpivot"); break;
      case Method::EcrIterative1: need(in.z, "z"); break;
      case Method::EcrIterative2: need(in.z, "z"); need(in.p, "p"); break;
      case Method::Pra: need(in.mcmc, "mcmc"); need(cfg.prapivot.has_value(), "prapivot"); break;
      case Method::Stephens: need(in.p, "p"); break;
      case Method::Sjw:
        need(in.mcmc, "mcmc"); need(in.z, "z"); need(in.x, "data");
        need(cfg.model != nullptr, "complete");
        break;
      case Method::UserPerm: need(!cfg.user_perms.empty(), "userPerm"); break;
    }
  }

  const std::size_t K = detail::infer_K(cfg, in);
  detail::check_chain_shapes(in, K);

  // A chain with labels below K still refers to K components.
  std::optional<AllocationChain> z_storage;
  const AllocationChain* z = in.z;
  if (z && z->K() != K) {
    z_storage.emplace(z->array(), K);
    z = &*z_storage;
  }
  std::optional<AllocationChain> p_allocations;
  const AllocationChain* cluster_source = z;
  if (!cluster_source && in.p) {
    p_allocations.emplace(map_allocations(*in.p));
    cluster_source = &*p_allocations;
  }

  const std::size_t m = in.mcmc ? in.mcmc->m() : z ? z->m() : in.p ? in.p->m()
                        : cfg.user_perms.front().m();
  for (Method method : cfg.methods)
    if (method == Method::Aic && !cfg.constraint.all && cfg.constraint.index >= in.mcmc->J())
      throw UsageError("constraint index " + std::to_string(cfg.constraint.index + 1) +
                       " outside 1.." + std::to_string(in.mcmc->J()));

  std::optional<std::size_t> map_index;
  auto map_pivot = [&]() -> std::optional<std::size_t> {
    if (!map_index && cfg.model && in.mcmc && z && in.x)
      map_index = select_map_pivot(*cfg.model, *in.mcmc, *z, *in.x, cfg.threads);
    return map_index;
  };

  RelabelResult result;
  result.K = K;
  auto timed = [&](Method method, std::string name, auto&& body) {
    const auto start = std::chrono::steady_clock::now();
    MethodOutput out = body();
    const auto stop = std::chrono::steady_clock::now();
    result.runs.push_back(MethodRun{std::move(name), method, std::move(out), {},
                                    std::chrono::duration<double>(stop - start).count()});
  };

  for (Method method : cfg.methods) {
    switch (method) {
      case Method::Stephens:
        timed(method, "STEPHENS", [&] { return stephens(*in.p, cfg.stephens_options); });
        break;
      case Method::Pra:
        timed(method, "PRA", [&] { return pra(*in.mcmc, *cfg.prapivot, cfg.threads); });
        break;
      case Method::Ecr:
        for (std::size_t d = 0; d < cfg.zpivots.size(); ++d)
          timed(method, detail::numbered(method, d, cfg.zpivots.size()),
                [&] { return ecr(*z, cfg.zpivots[d], cfg.threads); });
        break;
      case Method::EcrIterative1:
        timed(method, "ECR-ITERATIVE-1", [&] { return ecr_iterative_1(*z, cfg.ecr_options); });
        break;
      case Method::EcrIterative2:
        timed(method, "ECR-ITERATIVE-2",
              [&] { return ecr_iterative_2(*z, *in.p, cfg.ecr_options); });
        break;
      case Method::Sjw: {
        std::size_t init = 0;
        if (cfg.sjw_init) init = *cfg.sjw_init;
        else if (auto mp = map_pivot()) init = *mp;
        timed(method, "SJW",
              [&] { return sjw(*in.mcmc, *z, *in.x, *cfg.model, init, cfg.sjw_options); });
        break;
      }
      case Method::Aic: {
        const std::size_t J = in.mcmc->J();
        if (cfg.constraint.all) {
          for (std::size_t j = 0; j < J; ++j)
            timed(method, detail::numbered(method, j, J),
                  [&] { return ordering_constraint(*in.mcmc, j); });
        } else {
          timed(method, "AIC", [&] { return ordering_constraint(*in.mcmc, cfg.constraint.index); });
        }
        break;
      }
      case Method::DataBased: {
        // Reference allocation: the first ECR pivot, else the complete-MAP
        // draw, else the converged pivot of iterative ECR version 1.
        std::vector<int> reference;
        if (!cfg.zpivots.empty()) reference = cfg.zpivots.front();
        else if (auto mp = map_pivot()) {
          auto d = z->draw(*mp);
          reference.assign(d.begin(), d.end());
        }
        timed(method, "DATA-BASED", [&] {
          if (reference.empty()) reference = ecr_iterative_1(*z, cfg.ecr_options).pivot;
          return data_based(*z, *in.x, reference, cfg.threads);
        });
        break;
      }
      case Method::UserPerm:
        for (std::size_t d = 0; d < cfg.user_perms.size(); ++d)
          timed(method, detail::numbered(method, d, cfg.user_perms.size()),
                [&] { return user_perm(cfg.user_perms[d], m, K); });
        break;
    }
  }

  for (auto& r : result.runs) result.labels.push_back(r.name);
  if (!cluster_source) {
    result.reference = "none (no allocations available)";
    return result;
  }

  for (auto& r : result.runs) r.clusters = single_best_clustering(*cluster_source, r.output.permutations);

  std::vector<int> reference;
  if (cfg.ground_truth) {
    if (cfg.ground_truth->size() != cluster_source->n())
      throw DataError("ground truth has length " + std::to_string(cfg.ground_truth->size()) +
                      ", expected n = " + std::to_string(cluster_source->n()));
    detail::check_pivot(*cfg.ground_truth, cluster_source->n(), K, "ground truth");
    reference = *cfg.ground_truth;
    result.reference = "ground truth";
  } else {
    reference = result.runs.front().clusters;
    result.reference = result.runs.front().name;
  }

  // tau'[k] = tau[rho^{-1}(k)] relabels allocations as rho(tau^{-1}(z)).
  for (auto& r : result.runs) {
    const Permutation rho = align_to_reference(r.clusters, reference, K);
    if (rho.is_identity()) continue;
    const Permutation rho_inv = invert_permutation(rho);
    for (std::size_t t = 0; t < r.output.permutations.m(); ++t)
      r.output.permutations[t] = compose(r.output.permutations[t], rho_inv);
    r.clusters = single_best_clustering(*cluster_source, r.output.permutations);
  }

  std::vector<std::vector<int>> clusterings;
  for (const auto& r : result.runs) clusterings.push_back(r.clusters);
  if (cfg.ground_truth) {
    clusterings.push_back(*cfg.ground_truth);
    result.labels.emplace_back("TRUE");
  }
  result.similarity = similarity_matrix(clusterings, K);
  return result;
}

}  // namespace lsw
