#pragma once

// Relabelling algorithms. Each one returns a PermutationSet in the stored
// convention (see core.hpp): row t reorders the parameters of draw t and its
// inverse relabels the allocations of draw t.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "lsw/assignment.hpp"
#include "lsw/core.hpp"
#include "lsw/models.hpp"
#include "lsw/parallel.hpp"

namespace lsw {

struct IterativeOptions {
  double threshold = 1e-6;
  std::size_t max_iterations = 100;
  unsigned threads = 1;
};

struct MethodOutput {
  PermutationSet permutations;
  /// Iterative methods: entry 0 is the objective of the identity start, then
  /// one entry per sweep. SJW records the max-norm change of the estimate.
  std::vector<double> objective_trace;
  std::size_t iterations_used = 0;
  bool converged = true;
  /// ECR variants: the allocation pivot used by the final assignment sweep.
  std::vector<int> pivot;
  /// Stephens: the n x K averaged probabilities used by the final sweep.
  /// SJW: the final parameter estimate.
  Matrix reference;
  /// SJW: m x K! permutation probabilities, columns in lexicographic order.
  Matrix permutation_weights;
};

namespace detail {

inline void check_threshold(const IterativeOptions& opt, const char* who) {
  if (!(opt.threshold > 0.0))
    throw UsageError(std::string(who) + ": threshold must be positive");
  if (opt.max_iterations < 1)
    throw UsageError(std::string(who) + ": max_iterations must be at least 1");
}

inline void check_pivot(std::span<const int> pivot, std::size_t n, std::size_t K,
                        const char* who) {
  if (pivot.size() != n)
    throw DataError(std::string(who) + ": pivot length " + std::to_string(pivot.size()) +
                    " does not match n = " + std::to_string(n));
  for (std::size_t i = 0; i < n; ++i)
    if (pivot[i] < 0 || static_cast<std::size_t>(pivot[i]) >= K)
      throw DataError(std::string(who) + ": pivot label out of range at " +
                      std::to_string(i));
}

inline std::vector<Permutation> all_permutations(std::size_t K) {
  std::vector<int> p(K);
  std::iota(p.begin(), p.end(), 0);
  std::vector<Permutation> out;
  do out.emplace_back(p);
  while (std::next_permutation(p.begin(), p.end()));
  return out;
}

}  // namespace detail

/// Contingency table A(k, l) = #{i : pivot_i = k and z_i = l}.
inline Matrix contingency_table(std::span<const int> z, std::span<const int> pivot,
                                std::size_t K) {
  Matrix A(K, K, 0.0);
  for (std::size_t i = 0; i < z.size(); ++i)
    A(static_cast<std::size_t>(pivot[i]), static_cast<std::size_t>(z[i])) += 1.0;
  return A;
}

/// Permutation tau maximizing #{i : tau^{-1}(z_i) = pivot_i}; the objective
/// is that match count. Maximizing sum_k A(k, tau_k) over the pivot-by-chain
/// table yields tau directly in the stored convention.
inline AssignmentResult ecr_assign(std::span<const int> z, std::span<const int> pivot,
                                   std::size_t K) {
  return solve_max_assignment(contingency_table(z, pivot, K));
}

/// Ordering constraint on parameter column `column` (0-based): row t sorts
/// the components ascending, ties kept in original index order.
inline MethodOutput ordering_constraint(const ParameterChain& mcmc, std::size_t column) {
  if (column >= mcmc.J())
    throw UsageError("ordering_constraint: parameter index " + std::to_string(column + 1) +
                     " outside 1.." + std::to_string(mcmc.J()));
  MethodOutput out;
  out.permutations = PermutationSet(mcmc.K());
  std::vector<int> idx(mcmc.K());
  for (std::size_t t = 0; t < mcmc.m(); ++t) {
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
      return mcmc(t, static_cast<std::size_t>(a), column) <
             mcmc(t, static_cast<std::size_t>(b), column);
    });
    out.permutations.push_back(Permutation(idx));
  }
  out.iterations_used = 1;
  return out;
}

namespace detail {

// Stephens cost for one iteration: cost(k, l) = sum_i p_il log(p_il / q_ik),
// with 0 log 0 = 0. `entropy[l]` caches sum_i p_il log p_il.
inline Matrix stephens_cost(std::span<const double> p, std::size_t n, std::size_t K,
                            const Matrix& log_q, std::span<const double> entropy) {
  Matrix cost(K, K, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t l = 0; l < K; ++l) {
      const double pil = p[i * K + l];
      if (pil == 0.0) continue;
      for (std::size_t k = 0; k < K; ++k) cost(k, l) -= pil * log_q(i, k);
    }
  for (std::size_t k = 0; k < K; ++k)
    for (std::size_t l = 0; l < K; ++l) cost(k, l) += entropy[l];
  return cost;
}

}  // namespace detail

inline constexpr double stephens_q_floor = 1e-300;

/// Cost matrix of one Stephens subproblem given averaged probabilities q.
inline Matrix stephens_cost(const ClassificationChain& p, std::size_t t, const Matrix& q) {
  const std::size_t n = p.n(), K = p.K();
  Matrix log_q(n, K);
  for (std::size_t i = 0; i < q.size(); ++i)
    log_q.values()[i] = std::log(std::max(q.values()[i], stephens_q_floor));
  std::vector<double> entropy(K, 0.0);
  auto s = p.slice(t);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t l = 0; l < K; ++l)
      if (s[i * K + l] > 0.0) entropy[l] += s[i * K + l] * std::log(s[i * K + l]);
  return detail::stephens_cost(s, n, K, log_q, entropy);
}

/// Kullback-Leibler relabelling of classification probabilities.
inline MethodOutput stephens(const ClassificationChain& p, const IterativeOptions& opt = {}) {
  detail::check_threshold(opt, "stephens");
  const std::size_t m = p.m(), n = p.n(), K = p.K();
  MethodOutput out;
  out.permutations = PermutationSet::identity(m, K);
  out.converged = false;

  Matrix entropy(m, K, 0.0);
  for (std::size_t t = 0; t < m; ++t) {
    auto s = p.slice(t);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t l = 0; l < K; ++l)
        if (s[i * K + l] > 0.0) entropy(t, l) += s[i * K + l] * std::log(s[i * K + l]);
  }

  auto averaged = [&](const PermutationSet& perms) {
    Matrix q(n, K, 0.0);
    for (std::size_t t = 0; t < m; ++t) {
      auto s = p.slice(t);
      const Permutation& tau = perms[t];
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < K; ++k)
          q(i, k) += s[i * K + static_cast<std::size_t>(tau[k])];
    }
    for (double& v : q.values()) v /= static_cast<double>(m);
    return q;
  };
  auto logged = [&](const Matrix& q) {
    Matrix lq(n, K);
    for (std::size_t i = 0; i < q.size(); ++i)
      lq.values()[i] = std::log(std::max(q.values()[i], stephens_q_floor));
    return lq;
  };

  std::vector<double> per_t(m);
  Matrix q = averaged(out.permutations);
  {
    const Matrix log_q = logged(q);
    parallel_for(m, opt.threads, [&](std::size_t t) {
      const Matrix cost = detail::stephens_cost(p.slice(t), n, K, log_q, entropy.row(t));
      per_t[t] = detail::assignment_sum(cost, out.permutations[t]);
    });
  }
  double previous = std::accumulate(per_t.begin(), per_t.end(), 0.0);
  out.objective_trace.push_back(previous);

  for (std::size_t iter = 1; iter <= opt.max_iterations; ++iter) {
    if (iter > 1) q = averaged(out.permutations);
    const Matrix log_q = logged(q);
    parallel_for(m, opt.threads, [&](std::size_t t) {
      const Matrix cost = detail::stephens_cost(p.slice(t), n, K, log_q, entropy.row(t));
      AssignmentResult r = solve_min_assignment(cost);
      out.permutations[t] = std::move(r.perm);
      per_t[t] = r.objective;
    });
    const double total = std::accumulate(per_t.begin(), per_t.end(), 0.0);
    out.objective_trace.push_back(total);
    out.iterations_used = iter;
    const double improvement = previous - total;
    previous = total;
    if (improvement < opt.threshold) {
      out.converged = true;
      break;
    }
  }
  out.reference = std::move(q);
  return out;
}

/// Score matrix of one PRA subproblem: score(k, l) = sum_j draw(l, j) pivot(k, j).
inline Matrix pra_score(const Matrix& draw, const Matrix& pivot) {
  const std::size_t K = pivot.rows(), J = pivot.cols();
  Matrix score(K, K, 0.0);
  for (std::size_t k = 0; k < K; ++k)
    for (std::size_t l = 0; l < K; ++l)
      for (std::size_t j = 0; j < J; ++j) score(k, l) += draw(l, j) * pivot(k, j);
  return score;
}

/// Pivotal reordering: per draw, the permutation maximizing the dot product
/// with the pivot parameters.
inline MethodOutput pra(const ParameterChain& mcmc, const Matrix& pivot, unsigned threads = 1) {
  if (pivot.rows() != mcmc.K() || pivot.cols() != mcmc.J())
    throw DataError("pra: pivot must be " + std::to_string(mcmc.K()) + " x " +
                    std::to_string(mcmc.J()));
  require_finite(pivot.values(), "pra pivot");
  MethodOutput out;
  out.permutations = PermutationSet::identity(mcmc.m(), mcmc.K());
  out.objective_trace.assign(1, 0.0);
  std::vector<double> per_t(mcmc.m());
  parallel_for(mcmc.m(), threads, [&](std::size_t t) {
    AssignmentResult r = solve_max_assignment(pra_score(mcmc.draw(t), pivot));
    out.permutations[t] = std::move(r.perm);
    per_t[t] = r.objective;
  });
  out.objective_trace[0] = std::accumulate(per_t.begin(), per_t.end(), 0.0);
  out.iterations_used = 1;
  return out;
}

/// ECR with a fixed allocation pivot.
inline MethodOutput ecr(const AllocationChain& z, std::span<const int> pivot,
                        unsigned threads = 1) {
  detail::check_pivot(pivot, z.n(), z.K(), "ecr");
  MethodOutput out;
  out.permutations = PermutationSet::identity(z.m(), z.K());
  std::vector<double> matches(z.m());
  parallel_for(z.m(), threads, [&](std::size_t t) {
    AssignmentResult r = ecr_assign(z.draw(t), pivot, z.K());
    out.permutations[t] = std::move(r.perm);
    matches[t] = r.objective;
  });
  out.objective_trace.assign(1, std::accumulate(matches.begin(), matches.end(), 0.0));
  out.iterations_used = 1;
  out.pivot.assign(pivot.begin(), pivot.end());
  return out;
}

/// Allocations of every draw relabelled under the given permutations.
inline Array2<int> relabelled_allocations(const AllocationChain& z,
                                          const PermutationSet& perms) {
  if (perms.m() != z.m() || perms.K() != z.K())
    throw DataError("relabelled_allocations: permutations do not match chain");
  Array2<int> out(z.m(), z.n());
  for (std::size_t t = 0; t < z.m(); ++t) {
    const std::vector<int> r = relabel_allocations(z.draw(t), perms[t]);
    std::copy(r.begin(), r.end(), out.row(t).begin());
  }
  return out;
}

namespace detail {

// Shared loop of the iterative ECR versions; `update_pivot` maps current
// permutations to a new pivot.
template <class PivotUpdate>
MethodOutput ecr_iterate(const AllocationChain& z, const IterativeOptions& opt,
                         PivotUpdate&& update_pivot) {
  const std::size_t m = z.m(), K = z.K();
  MethodOutput out;
  out.permutations = PermutationSet::identity(m, K);
  out.converged = false;
  std::vector<double> matches(m);

  std::vector<int> pivot = update_pivot(out.permutations);
  parallel_for(m, opt.threads, [&](std::size_t t) {
    const std::vector<int> r = relabel_allocations(z.draw(t), out.permutations[t]);
    double c = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) c += (r[i] == pivot[i]) ? 1.0 : 0.0;
    matches[t] = c;
  });
  double previous = std::accumulate(matches.begin(), matches.end(), 0.0);
  out.objective_trace.push_back(previous);

  for (std::size_t iter = 1; iter <= opt.max_iterations; ++iter) {
    if (iter > 1) pivot = update_pivot(out.permutations);
    parallel_for(m, opt.threads, [&](std::size_t t) {
      AssignmentResult r = ecr_assign(z.draw(t), pivot, K);
      out.permutations[t] = std::move(r.perm);
      matches[t] = r.objective;
    });
    const double total = std::accumulate(matches.begin(), matches.end(), 0.0);
    out.objective_trace.push_back(total);
    out.iterations_used = iter;
    const double improvement = total - previous;
    previous = total;
    if (improvement < opt.threshold) {
      out.converged = true;
      break;
    }
  }
  out.pivot = std::move(pivot);
  return out;
}

}  // namespace detail

/// Iterative ECR, version 1: the pivot is the per-observation mode of the
/// relabelled allocations.
inline MethodOutput ecr_iterative_1(const AllocationChain& z, const IterativeOptions& opt = {}) {
  detail::check_threshold(opt, "ecr_iterative_1");
  return detail::ecr_iterate(z, opt, [&](const PermutationSet& perms) {
    return mode_per_observation(relabelled_allocations(z, perms), z.K());
  });
}

/// Pivot of iterative ECR version 2: argmax over k of the across-iteration
/// mean of p(t, i, tau_t[k]); ties go to the smallest label.
inline std::vector<int> mean_probability_pivot(const ClassificationChain& p,
                                               const PermutationSet& perms) {
  const std::size_t m = p.m(), n = p.n(), K = p.K();
  Matrix mean(n, K, 0.0);
  for (std::size_t t = 0; t < m; ++t) {
    auto s = p.slice(t);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < K; ++k)
        mean(i, k) += s[i * K + static_cast<std::size_t>(perms[t][k])];
  }
  std::vector<int> pivot(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto r = mean.row(i);
    pivot[i] = static_cast<int>(std::max_element(r.begin(), r.end()) - r.begin());
  }
  return pivot;
}

/// Iterative ECR, version 2: the pivot maximizes the averaged relabelled
/// classification probabilities.
inline MethodOutput ecr_iterative_2(const AllocationChain& z, const ClassificationChain& p,
                                    const IterativeOptions& opt = {}) {
  detail::check_threshold(opt, "ecr_iterative_2");
  if (p.m() != z.m() || p.n() != z.n() || p.K() != z.K())
    throw DataError("ecr_iterative_2: z is " + std::to_string(z.m()) + " x " +
                    std::to_string(z.n()) + " with K = " + std::to_string(z.K()) +
                    " but p is " + std::to_string(p.m()) + " x " + std::to_string(p.n()) +
                    " x " + std::to_string(p.K()));
  return detail::ecr_iterate(z, opt, [&](const PermutationSet& perms) {
    return mean_probability_pivot(p, perms);
  });
}

inline constexpr std::size_t sjw_max_K = 6;

/// E-step weights for one draw: g_tau proportional to the complete
/// likelihood of the estimate with allocations relabelled by tau, over
/// `perms` in the given order.
inline std::vector<double> sjw_permutation_weights(const LogTerms& estimate,
                                                   std::span<const int> z,
                                                   const std::vector<Permutation>& perms) {
  std::vector<double> logw(perms.size());
  double hi = -std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < perms.size(); ++a) {
    logw[a] = complete_log_likelihood(estimate, relabel_allocations(z, perms[a]));
    if (std::isnan(logw[a])) throw DataError("sjw: NaN complete log-likelihood");
    hi = std::max(hi, logw[a]);
  }
  if (!std::isfinite(hi))
    throw DataError("sjw: complete likelihood is zero under every permutation");
  double sum = 0.0;
  for (double& v : logw) {
    v = std::exp(v - hi);
    sum += v;
  }
  for (double& v : logw) v /= sum;
  return logw;
}

/// Probabilistic relabelling (EM over the K! permutations per draw).
inline MethodOutput sjw(const ParameterChain& mcmc, const AllocationChain& z, const Dataset& x,
                        const Model& model, std::size_t init_index,
                        const IterativeOptions& opt = {}) {
  detail::check_threshold(opt, "sjw");
  const std::size_t m = mcmc.m(), K = mcmc.K(), J = mcmc.J();
  if (K > sjw_max_K)
    throw UsageError("sjw: K = " + std::to_string(K) + " exceeds limit of " +
                     std::to_string(sjw_max_K) + " (K! permutations per draw)");
  if (z.m() != m || z.K() != K)
    throw DataError("sjw: allocation chain does not match parameter chain");
  if (x.n() != z.n()) throw DataError("sjw: data and allocations disagree on n");
  if (init_index >= m)
    throw UsageError("sjw: initial index " + std::to_string(init_index + 1) +
                     " outside 1.." + std::to_string(m));

  const std::vector<Permutation> perms = detail::all_permutations(K);
  const std::size_t F = perms.size();
  MethodOutput out;
  out.converged = false;
  out.permutation_weights = Matrix(m, F);

  auto e_step = [&](const Matrix& estimate) {
    const LogTerms terms = model.log_terms(estimate, x);
    parallel_for(m, opt.threads, [&](std::size_t t) {
      const std::vector<double> g = sjw_permutation_weights(terms, z.draw(t), perms);
      std::copy(g.begin(), g.end(), out.permutation_weights.row(t).begin());
    });
  };

  Matrix estimate = mcmc.draw(init_index);
  Array3<double> contribution(m, K, J);
  for (std::size_t iter = 1; iter <= opt.max_iterations; ++iter) {
    e_step(estimate);
    parallel_for(m, opt.threads, [&](std::size_t t) {
      const Matrix draw = mcmc.draw(t);
      auto dst = contribution.slice(t);
      std::fill(dst.begin(), dst.end(), 0.0);
      for (std::size_t a = 0; a < F; ++a) {
        const double g = out.permutation_weights(t, a);
        if (g == 0.0) continue;
        const Matrix moved = model.permute(draw, perms[a]);
        for (std::size_t e = 0; e < dst.size(); ++e) dst[e] += g * moved.values()[e];
      }
    });
    Matrix next(K, J, 0.0);
    for (std::size_t t = 0; t < m; ++t) {
      auto src = contribution.slice(t);
      for (std::size_t e = 0; e < src.size(); ++e) next.values()[e] += src[e];
    }
    double change = 0.0;
    for (std::size_t e = 0; e < next.size(); ++e) {
      next.values()[e] /= static_cast<double>(m);
      change = std::max(change, std::abs(next.values()[e] - estimate.values()[e]));
    }
    estimate = std::move(next);
    out.objective_trace.push_back(change);
    out.iterations_used = iter;
    if (change < opt.threshold) {
      out.converged = true;
      break;
    }
  }

  e_step(estimate);
  out.permutations = PermutationSet::identity(m, K);
  for (std::size_t t = 0; t < m; ++t) {
    auto g = out.permutation_weights.row(t);
    const auto best = static_cast<std::size_t>(std::max_element(g.begin(), g.end()) - g.begin());
    out.permutations[t] = perms[best];
  }
  out.reference = std::move(estimate);
  return out;
}

struct ClusterStatistics {
  Matrix centers;  // K x d
  Matrix scales;   // K x d
};

inline constexpr double data_based_scale_floor = 1e-8;

/// Within-cluster means and sample standard deviations of x under one
/// reference allocation. Clusters with fewer than two members use the
/// global standard deviation (and an empty cluster the global mean).
inline ClusterStatistics estimate_cluster_statistics(const Dataset& x,
                                                     std::span<const int> reference,
                                                     std::size_t K) {
  detail::check_pivot(reference, x.n(), K, "data_based");
  const std::size_t n = x.n(), d = x.dim();
  std::vector<double> global_mean(d, 0.0), global_sd(d, 0.0);
  for (std::size_t r = 0; r < d; ++r) {
    for (std::size_t i = 0; i < n; ++i) global_mean[r] += x(i, r);
    global_mean[r] /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double e = x(i, r) - global_mean[r];
      global_sd[r] += e * e;
    }
    global_sd[r] = n > 1 ? std::sqrt(global_sd[r] / static_cast<double>(n - 1)) : 0.0;
  }

  ClusterStatistics s{Matrix(K, d, 0.0), Matrix(K, d, 0.0)};
  std::vector<std::size_t> count(K, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(reference[i]);
    ++count[k];
    for (std::size_t r = 0; r < d; ++r) s.centers(k, r) += x(i, r);
  }
  for (std::size_t k = 0; k < K; ++k)
    for (std::size_t r = 0; r < d; ++r)
      s.centers(k, r) = count[k] > 0 ? s.centers(k, r) / static_cast<double>(count[k])
                                     : global_mean[r];
  for (std::size_t i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(reference[i]);
    for (std::size_t r = 0; r < d; ++r) {
      const double e = x(i, r) - s.centers(k, r);
      s.scales(k, r) += e * e;
    }
  }
  for (std::size_t k = 0; k < K; ++k)
    for (std::size_t r = 0; r < d; ++r) {
      const double sd = count[k] >= 2
                            ? std::sqrt(s.scales(k, r) / static_cast<double>(count[k] - 1))
                            : global_sd[r];
      s.scales(k, r) = std::max(sd, data_based_scale_floor);
    }
  return s;
}

/// Cost of one data-based subproblem:
/// cost(k, l) = sum over i with z_i = l of sum_r ((x_ir - m_kr) / s_kr)^2.
inline Matrix data_based_cost(const Dataset& x, std::span<const int> z,
                              const ClusterStatistics& stats) {
  const std::size_t K = stats.centers.rows(), d = x.dim();
  Matrix cost(K, K, 0.0);
  for (std::size_t i = 0; i < z.size(); ++i) {
    const auto l = static_cast<std::size_t>(z[i]);
    for (std::size_t k = 0; k < K; ++k) {
      double s = 0.0;
      for (std::size_t r = 0; r < d; ++r) {
        const double e = (x(i, r) - stats.centers(k, r)) / stats.scales(k, r);
        s += e * e;
      }
      cost(k, l) += s;
    }
  }
  return cost;
}

/// Data-based relabelling against cluster statistics estimated from a
/// reference allocation.
inline MethodOutput data_based(const AllocationChain& z, const Dataset& x,
                               std::span<const int> reference, unsigned threads = 1) {
  if (x.n() != z.n())
    throw DataError("data_based: data has n = " + std::to_string(x.n()) +
                    " but allocations have n = " + std::to_string(z.n()));
  const ClusterStatistics stats = estimate_cluster_statistics(x, reference, z.K());
  MethodOutput out;
  out.permutations = PermutationSet::identity(z.m(), z.K());
  std::vector<double> per_t(z.m());
  parallel_for(z.m(), threads, [&](std::size_t t) {
    AssignmentResult r = solve_min_assignment(data_based_cost(x, z.draw(t), stats));
    out.permutations[t] = std::move(r.perm);
    per_t[t] = r.objective;
  });
  out.objective_trace.assign(1, std::accumulate(per_t.begin(), per_t.end(), 0.0));
  out.iterations_used = 1;
  out.pivot.assign(reference.begin(), reference.end());
  return out;
}

/// User-supplied permutations, validated against the chain shape.
inline MethodOutput user_perm(const PermutationSet& perms, std::size_t m, std::size_t K) {
  if (perms.m() != m || perms.K() != K)
    throw DataError("user_perm: expected " + std::to_string(m) + " x " + std::to_string(K) +
                    " permutations, got " + std::to_string(perms.m()) + " x " +
                    std::to_string(perms.K()));
  for (std::size_t t = 0; t < m; ++t)
    if (!is_bijection(perms[t].mapping()))
      throw DataError("user_perm: row " + std::to_string(t + 1) + " is not a permutation");
  MethodOutput out;
  out.permutations = perms;
  return out;
}

}  // namespace lsw
