#pragma once

// Domain types shared by every relabelling algorithm: dense arrays,
// permutations and the MCMC chain containers.
//
// Labels are 0-based in memory. Files and the command line use 1-based
// labels; the conversion happens in io.hpp.
//
// Permutation convention: a stored permutation tau reorders parameters as
// new_params[k] = params[tau[k]] and relabels allocations with the inverse,
// new_z[i] = tau^{-1}(z[i]). This is the pairing under which the complete
// likelihood is unchanged.

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace lsw {

/// Input violates a data contract (dimensions, ranges, non-finite values).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Caller supplied an inconsistent or incomplete request.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <class T>
class Array2 {
 public:
  Array2() = default;
  Array2(std::size_t rows, std::size_t cols, T fill = T{})
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Array2(std::size_t rows, std::size_t cols, std::vector<T> values)
      : rows_(rows), cols_(cols), data_(std::move(values)) {
    if (data_.size() != rows_ * cols_)
      throw DataError("Array2: value count " + std::to_string(data_.size()) +
                      " does not match " + std::to_string(rows_) + "x" +
                      std::to_string(cols_));
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const {
    return data_[r * cols_ + c];
  }

  std::span<T> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const T> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  const std::vector<T>& values() const noexcept { return data_; }
  std::vector<T>& values() noexcept { return data_; }

  friend bool operator==(const Array2&, const Array2&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

template <class T>
class Array3 {
 public:
  Array3() = default;
  Array3(std::size_t d0, std::size_t d1, std::size_t d2, T fill = T{})
      : d0_(d0), d1_(d1), d2_(d2), data_(d0 * d1 * d2, fill) {}
  Array3(std::size_t d0, std::size_t d1, std::size_t d2, std::vector<T> values)
      : d0_(d0), d1_(d1), d2_(d2), data_(std::move(values)) {
    if (data_.size() != d0_ * d1_ * d2_)
      throw DataError("Array3: value count does not match dimensions");
  }

  std::size_t dim0() const noexcept { return d0_; }
  std::size_t dim1() const noexcept { return d1_; }
  std::size_t dim2() const noexcept { return d2_; }

  T& operator()(std::size_t a, std::size_t b, std::size_t c) {
    return data_[(a * d1_ + b) * d2_ + c];
  }
  const T& operator()(std::size_t a, std::size_t b, std::size_t c) const {
    return data_[(a * d1_ + b) * d2_ + c];
  }

  /// Contiguous d1 x d2 block at leading index a.
  std::span<T> slice(std::size_t a) {
    return {data_.data() + a * d1_ * d2_, d1_ * d2_};
  }
  std::span<const T> slice(std::size_t a) const {
    return {data_.data() + a * d1_ * d2_, d1_ * d2_};
  }

  const std::vector<T>& values() const noexcept { return data_; }
  std::vector<T>& values() noexcept { return data_; }

  friend bool operator==(const Array3&, const Array3&) = default;

 private:
  std::size_t d0_ = 0;
  std::size_t d1_ = 0;
  std::size_t d2_ = 0;
  std::vector<T> data_;
};

using Matrix = Array2<double>;

inline bool is_bijection(std::span<const int> mapping) {
  std::vector<char> seen(mapping.size(), 0);
  for (int v : mapping) {
    if (v < 0 || static_cast<std::size_t>(v) >= mapping.size() || seen[v])
      return false;
    seen[v] = 1;
  }
  return true;
}

/// A bijection on {0, ..., K-1}. Ordering is lexicographic on the mapping.
class Permutation {
 public:
  Permutation() = default;
  explicit Permutation(std::vector<int> mapping) : map_(std::move(mapping)) {
    if (!is_bijection(map_)) throw DataError("permutation is not a bijection");
  }

  static Permutation identity(std::size_t K) {
    std::vector<int> m(K);
    std::iota(m.begin(), m.end(), 0);
    return Permutation(std::move(m));
  }

  std::size_t size() const noexcept { return map_.size(); }
  int operator[](std::size_t k) const { return map_[k]; }
  const std::vector<int>& mapping() const noexcept { return map_; }

  bool is_identity() const {
    for (std::size_t k = 0; k < map_.size(); ++k)
      if (map_[k] != static_cast<int>(k)) return false;
    return true;
  }

  friend bool operator==(const Permutation&, const Permutation&) = default;
  friend auto operator<=>(const Permutation&, const Permutation&) = default;

 private:
  std::vector<int> map_;
};

inline Permutation invert_permutation(const Permutation& perm) {
  std::vector<int> inv(perm.size());
  for (std::size_t k = 0; k < perm.size(); ++k)
    inv[perm[k]] = static_cast<int>(k);
  return Permutation(std::move(inv));
}

/// (outer o inner)[k] = outer[inner[k]].
inline Permutation compose(const Permutation& outer, const Permutation& inner) {
  if (outer.size() != inner.size())
    throw DataError("compose: permutation sizes differ");
  std::vector<int> out(inner.size());
  for (std::size_t k = 0; k < inner.size(); ++k) out[k] = outer[inner[k]];
  return Permutation(std::move(out));
}

/// out(k, j) = params(perm[k], j).
inline Matrix apply_to_parameters(const Matrix& params, const Permutation& perm) {
  if (params.rows() != perm.size())
    throw DataError("apply_to_parameters: K mismatch (params " +
                    std::to_string(params.rows()) + ", permutation " +
                    std::to_string(perm.size()) + ")");
  Matrix out(params.rows(), params.cols());
  for (std::size_t k = 0; k < params.rows(); ++k) {
    auto src = params.row(static_cast<std::size_t>(perm[k]));
    std::copy(src.begin(), src.end(), out.row(k).begin());
  }
  return out;
}

/// out[i] = perm[alloc[i]]: the permutation applied to labels as a function.
inline std::vector<int> apply_to_allocations(std::span<const int> alloc,
                                             const Permutation& perm) {
  std::vector<int> out(alloc.size());
  const int K = static_cast<int>(perm.size());
  for (std::size_t i = 0; i < alloc.size(); ++i) {
    if (alloc[i] < 0 || alloc[i] >= K)
      throw DataError("apply_to_allocations: label out of range at index " +
                      std::to_string(i));
    out[i] = perm[static_cast<std::size_t>(alloc[i])];
  }
  return out;
}

/// Relabels allocations under a stored permutation: out[i] = tau^{-1}(z[i]).
inline std::vector<int> relabel_allocations(std::span<const int> alloc,
                                            const Permutation& tau) {
  return apply_to_allocations(alloc, invert_permutation(tau));
}

/// out(i, k) = probs(i, perm[k]).
inline Matrix apply_to_classification(const Matrix& probs,
                                      const Permutation& perm) {
  if (probs.cols() != perm.size())
    throw DataError("apply_to_classification: K mismatch");
  Matrix out(probs.rows(), probs.cols());
  for (std::size_t i = 0; i < probs.rows(); ++i)
    for (std::size_t k = 0; k < probs.cols(); ++k)
      out(i, k) = probs(i, static_cast<std::size_t>(perm[k]));
  return out;
}

/// m x K table of per-iteration permutations.
class PermutationSet {
 public:
  PermutationSet() = default;
  explicit PermutationSet(std::size_t K) : K_(K) {}
  PermutationSet(std::size_t K, std::vector<Permutation> rows)
      : K_(K), rows_(std::move(rows)) {
    for (std::size_t t = 0; t < rows_.size(); ++t)
      if (rows_[t].size() != K_)
        throw DataError("PermutationSet: row " + std::to_string(t) +
                        " has wrong length");
  }

  static PermutationSet identity(std::size_t m, std::size_t K) {
    return PermutationSet(K, std::vector<Permutation>(m, Permutation::identity(K)));
  }

  std::size_t m() const noexcept { return rows_.size(); }
  std::size_t K() const noexcept { return K_; }
  const Permutation& operator[](std::size_t t) const { return rows_[t]; }
  Permutation& operator[](std::size_t t) { return rows_[t]; }
  const std::vector<Permutation>& rows() const noexcept { return rows_; }

  void push_back(Permutation p) {
    if (p.size() != K_) throw DataError("PermutationSet: row has wrong length");
    rows_.push_back(std::move(p));
  }

  friend bool operator==(const PermutationSet&, const PermutationSet&) = default;

 private:
  std::size_t K_ = 0;
  std::vector<Permutation> rows_;
};

inline void require_finite(std::span<const double> values, const char* what) {
  for (std::size_t i = 0; i < values.size(); ++i)
    if (!std::isfinite(values[i]))
      throw DataError(std::string(what) + ": non-finite value at flat index " +
                      std::to_string(i));
}

/// m x K x J simulated parameters; row k of draw t holds component k.
class ParameterChain {
 public:
  ParameterChain() = default;
  explicit ParameterChain(Array3<double> data) : data_(std::move(data)) {
    if (data_.dim0() == 0 || data_.dim1() == 0 || data_.dim2() == 0)
      throw DataError("ParameterChain: empty dimension");
    require_finite(data_.values(), "ParameterChain");
  }

  std::size_t m() const noexcept { return data_.dim0(); }
  std::size_t K() const noexcept { return data_.dim1(); }
  std::size_t J() const noexcept { return data_.dim2(); }

  double operator()(std::size_t t, std::size_t k, std::size_t j) const {
    return data_(t, k, j);
  }

  Matrix draw(std::size_t t) const {
    auto s = data_.slice(t);
    return Matrix(K(), J(), std::vector<double>(s.begin(), s.end()));
  }

  void set_draw(std::size_t t, const Matrix& params) {
    if (params.rows() != K() || params.cols() != J())
      throw DataError("ParameterChain::set_draw: dimension mismatch");
    std::copy(params.values().begin(), params.values().end(),
              data_.slice(t).begin());
  }

  const Array3<double>& array() const noexcept { return data_; }

  friend bool operator==(const ParameterChain&, const ParameterChain&) = default;

 private:
  Array3<double> data_;
};

/// m x n simulated allocations with labels in {0, ..., K-1}.
class AllocationChain {
 public:
  AllocationChain() = default;
  AllocationChain(Array2<int> labels, std::size_t K)
      : labels_(std::move(labels)), K_(K) {
    if (K_ == 0) throw DataError("AllocationChain: K must be positive");
    const auto& v = labels_.values();
    for (std::size_t i = 0; i < v.size(); ++i)
      if (v[i] < 0 || static_cast<std::size_t>(v[i]) >= K_)
        throw DataError("AllocationChain: label out of range at iteration " +
                        std::to_string(i / std::max<std::size_t>(1, labels_.cols())) +
                        ", observation " +
                        std::to_string(i % std::max<std::size_t>(1, labels_.cols())));
  }

  std::size_t m() const noexcept { return labels_.rows(); }
  std::size_t n() const noexcept { return labels_.cols(); }
  std::size_t K() const noexcept { return K_; }

  std::span<const int> draw(std::size_t t) const { return labels_.row(t); }
  int operator()(std::size_t t, std::size_t i) const { return labels_(t, i); }

  const Array2<int>& array() const noexcept { return labels_; }

  friend bool operator==(const AllocationChain&, const AllocationChain&) = default;

 private:
  Array2<int> labels_;
  std::size_t K_ = 0;
};

/// m x n x K classification probabilities; each (t, i) row sums to one.
class ClassificationChain {
 public:
  static constexpr double row_sum_tolerance = 1e-8;

  ClassificationChain() = default;
  explicit ClassificationChain(Array3<double> data) : data_(std::move(data)) {
    const std::size_t K = data_.dim2();
    if (K == 0) throw DataError("ClassificationChain: K must be positive");
    const auto& v = data_.values();
    for (std::size_t r = 0; r * K < v.size(); ++r) {
      double sum = 0.0;
      for (std::size_t k = 0; k < K; ++k) {
        const double p = v[r * K + k];
        if (!(p >= 0.0 && p <= 1.0))
          throw DataError("ClassificationChain: entry outside [0,1] at iteration " +
                          std::to_string(r / data_.dim1()) + ", observation " +
                          std::to_string(r % data_.dim1()));
        sum += p;
      }
      if (std::abs(sum - 1.0) > row_sum_tolerance)
        throw DataError("ClassificationChain: row does not sum to 1 at iteration " +
                        std::to_string(r / data_.dim1()) + ", observation " +
                        std::to_string(r % data_.dim1()));
    }
  }

  std::size_t m() const noexcept { return data_.dim0(); }
  std::size_t n() const noexcept { return data_.dim1(); }
  std::size_t K() const noexcept { return data_.dim2(); }

  double operator()(std::size_t t, std::size_t i, std::size_t k) const {
    return data_(t, i, k);
  }
  /// Row-major n x K block of iteration t.
  std::span<const double> slice(std::size_t t) const { return data_.slice(t); }

  Matrix draw(std::size_t t) const {
    auto s = data_.slice(t);
    return Matrix(n(), K(), std::vector<double>(s.begin(), s.end()));
  }

  const Array3<double>& array() const noexcept { return data_; }

  friend bool operator==(const ClassificationChain&, const ClassificationChain&) = default;

 private:
  Array3<double> data_;
};

/// n x d observed data.
class Dataset {
 public:
  Dataset() = default;
  explicit Dataset(Matrix x) : x_(std::move(x)) {
    if (x_.cols() == 0) throw DataError("Dataset: dimension must be at least 1");
    require_finite(x_.values(), "Dataset");
  }
  /// Univariate convenience constructor.
  explicit Dataset(std::vector<double> x) : Dataset(column(std::move(x))) {}

  std::size_t n() const noexcept { return x_.rows(); }
  std::size_t dim() const noexcept { return x_.cols(); }
  double operator()(std::size_t i, std::size_t r) const { return x_(i, r); }
  std::span<const double> row(std::size_t i) const { return x_.row(i); }
  const Matrix& matrix() const noexcept { return x_; }

  friend bool operator==(const Dataset&, const Dataset&) = default;

 private:
  static Matrix column(std::vector<double> x) {
    const std::size_t n = x.size();
    return Matrix(n, 1, std::move(x));
  }

  Matrix x_;
};

/// Most frequent label per column; ties go to the smallest label.
inline std::vector<int> mode_per_observation(const Array2<int>& allocs,
                                             std::size_t K) {
  std::vector<int> out(allocs.cols(), 0);
  std::vector<std::size_t> counts(K);
  for (std::size_t i = 0; i < allocs.cols(); ++i) {
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t t = 0; t < allocs.rows(); ++t) {
      const int label = allocs(t, i);
      if (label < 0 || static_cast<std::size_t>(label) >= K)
        throw DataError("mode_per_observation: label out of range");
      ++counts[static_cast<std::size_t>(label)];
    }
    out[i] = static_cast<int>(
        std::max_element(counts.begin(), counts.end()) - counts.begin());
  }
  return out;
}

inline std::vector<int> mode_per_observation(const AllocationChain& z) {
  return mode_per_observation(z.array(), z.K());
}

}  // namespace lsw
