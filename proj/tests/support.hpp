#pragma once

// Oracles and random generators shared by the test suites.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "lsw/core.hpp"
#include "lsw/samplers.hpp"

namespace lsw::test {

inline Permutation random_permutation(Rng& g, std::size_t K) { return rng::permutation(g, K); }

inline Matrix random_matrix(Rng& g, std::size_t rows, std::size_t cols, double lo = -10.0,
                            double hi = 10.0) {
  Matrix a(rows, cols);
  for (double& v : a.values()) v = lo + (hi - lo) * rng::uniform(g);
  return a;
}

/// Integer-valued cost matrix, which produces many exact ties.
inline Matrix random_integer_matrix(Rng& g, std::size_t K, int range) {
  Matrix a(K, K);
  for (double& v : a.values()) v = static_cast<double>(rng::below(g, range));
  return a;
}

inline std::vector<double> random_simplex(Rng& g, std::size_t K) {
  std::vector<double> alpha(K, 1.0);
  return rng::dirichlet(g, alpha);
}

inline Matrix random_stochastic(Rng& g, std::size_t K) {
  Matrix w(K, K);
  for (std::size_t k = 0; k < K; ++k) {
    const auto row = random_simplex(g, K);
    std::copy(row.begin(), row.end(), w.row(k).begin());
  }
  return w;
}

inline std::vector<int> random_labels(Rng& g, std::size_t n, std::size_t K) {
  std::vector<int> z(n);
  for (int& v : z) v = static_cast<int>(rng::below(g, K));
  return z;
}

/// Every permutation of 0..K-1 in lexicographic order, built independently
/// of the library.
inline std::vector<std::vector<int>> lexicographic_permutations(std::size_t K) {
  std::vector<std::vector<int>> out;
  std::vector<int> p(K);
  std::iota(p.begin(), p.end(), 0);
  do out.push_back(p);
  while (std::next_permutation(p.begin(), p.end()));
  return out;
}

struct Exhaustive {
  std::vector<int> perm;
  double objective;
};

/// Exhaustive optimum over K! permutations; the first strictly better
/// candidate in lexicographic order wins.
inline Exhaustive exhaustive(const Matrix& cost, bool maximize) {
  Exhaustive best{{}, maximize ? -std::numeric_limits<double>::infinity()
                               : std::numeric_limits<double>::infinity()};
  for (const auto& p : lexicographic_permutations(cost.rows())) {
    double s = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) s += cost(k, static_cast<std::size_t>(p[k]));
    if (maximize ? s > best.objective : s < best.objective) best = {p, s};
  }
  return best;
}

inline double normal_log_density(double x, double mean, double var) {
  return -0.5 * std::log(2.0 * std::numbers::pi * var) - 0.5 * (x - mean) * (x - mean) / var;
}

inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("lsw_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

/// A chain whose allocations never change, with label-stable parameters.
inline FixtureChain constant_chain(std::size_t m, const std::vector<int>& z, std::size_t K) {
  Array2<int> zz(m, z.size());
  Array3<double> p(m, z.size(), K);
  Array3<double> mcmc(m, K, 3);
  for (std::size_t t = 0; t < m; ++t) {
    for (std::size_t i = 0; i < z.size(); ++i) {
      zz(t, i) = z[i];
      p(t, i, static_cast<std::size_t>(z[i])) = 1.0;
    }
    for (std::size_t k = 0; k < K; ++k) {
      mcmc(t, k, 0) = 10.0 * static_cast<double>(k);
      mcmc(t, k, 1) = 1.0;
      mcmc(t, k, 2) = 1.0 / static_cast<double>(K);
    }
  }
  std::vector<double> x(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) x[i] = 10.0 * z[i];
  return {ParameterChain(std::move(mcmc)), AllocationChain(std::move(zz), K),
          ClassificationChain(std::move(p)), 0, Dataset(std::move(x)), z, 0};
}

}  // namespace lsw::test
