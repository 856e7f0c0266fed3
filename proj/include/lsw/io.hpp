#pragma once

// Array files: a small self-describing binary container and a CSV fallback.
//
// Binary layout: "LSARR1", one dtype byte (0x01 f64, 0x02 i64), one ndim
// byte (1-3), ndim little-endian u64 dimensions, then the row-major payload
// in little-endian order. CSV layout: a "# dims: a,b,c" header line followed
// by the row-major values separated by commas and/or newlines.
//
// Label-valued arrays (allocations, pivots, permutations) are 1-based on disk.

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "lsw/core.hpp"

namespace lsw::io {

inline constexpr std::string_view magic = "LSARR1";

enum class DType : std::uint8_t { Float64 = 0x01, Int64 = 0x02 };

template <class T>
inline constexpr DType dtype_of = std::is_same_v<T, double> ? DType::Float64 : DType::Int64;

inline std::string_view dtype_name(DType d) { return d == DType::Float64 ? "float64" : "int64"; }

template <class T>
struct NdArray {
  static_assert(std::is_same_v<T, double> || std::is_same_v<T, std::int64_t>);
  std::vector<std::size_t> dims;
  std::vector<T> values;

  std::size_t ndim() const noexcept { return dims.size(); }
  friend bool operator==(const NdArray&, const NdArray&) = default;
};

using FloatArray = NdArray<double>;
using IntArray = NdArray<std::int64_t>;

namespace detail {

inline void put_u64(std::string& out, std::uint64_t v) {
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xffu));
}

inline std::uint64_t get_u64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int b = 0; b < 8; ++b) v |= static_cast<std::uint64_t>(p[b]) << (8 * b);
  return v;
}

template <class T>
void check_shape(const NdArray<T>& a) {
  if (a.dims.empty() || a.dims.size() > 3)
    throw DataError("array: ndim must be 1, 2 or 3 (got " + std::to_string(a.dims.size()) + ")");
  std::size_t total = 1;
  for (std::size_t d : a.dims) total *= d;
  if (total != a.values.size())
    throw DataError("array: " + std::to_string(a.values.size()) +
                    " values do not match the dimensions");
}

inline std::string index_string(std::size_t flat, const std::vector<std::size_t>& dims) {
  std::vector<std::size_t> idx(dims.size());
  for (std::size_t r = dims.size(); r-- > 0;) {
    idx[r] = dims[r] == 0 ? 0 : flat % dims[r];
    flat = dims[r] == 0 ? 0 : flat / dims[r];
  }
  std::string s = "[";
  for (std::size_t r = 0; r < idx.size(); ++r) s += (r ? "," : "") + std::to_string(idx[r]);
  return s + "]";
}

inline void reject_nan(const FloatArray& a, const std::string& what) {
  for (std::size_t i = 0; i < a.values.size(); ++i)
    if (std::isnan(a.values[i]))
      throw DataError(what + ": NaN at index " + index_string(i, a.dims));
}

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

template <class T>
T parse_number(const std::string& token, const std::string& what) {
  T v{};
  const char* first = token.data();
  const char* last = token.data() + token.size();
  if (!token.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last) {
    if constexpr (std::is_same_v<T, double>) {
      // from_chars rejects these spellings; accept them explicitly.
      if (token == "nan" || token == "NaN" || token == "NA") return std::nan("");
      if (token == "inf" || token == "Inf") return std::numeric_limits<double>::infinity();
      if (token == "-inf" || token == "-Inf") return -std::numeric_limits<double>::infinity();
    }
    throw DataError(what + ": cannot parse '" + token + "' as " +
                    std::string(dtype_name(dtype_of<T>)));
  }
  return v;
}

template <class T>
NdArray<T> parse_csv(std::string_view text, const std::string& what) {
  NdArray<T> a;
  std::size_t pos = 0;
  bool have_dims = false;
  std::vector<std::string> tokens;
  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    const std::string line = trim(text.substr(pos, eol - pos));
    pos = eol + 1;
    if (line.empty()) continue;
    if (line[0] == '#') {
      const std::string body = trim(std::string_view(line).substr(1));
      if (!have_dims && body.rfind("dims:", 0) == 0) {
        std::stringstream ss(body.substr(5));
        std::string d;
        while (std::getline(ss, d, ',')) {
          const auto v = parse_number<std::int64_t>(trim(d), what + " (dims)");
          if (v < 0) throw DataError(what + ": negative dimension");
          a.dims.push_back(static_cast<std::size_t>(v));
        }
        have_dims = true;
      }
      continue;
    }
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      tok = trim(tok);
      if (!tok.empty()) tokens.push_back(tok);
    }
  }
  if (!have_dims) throw DataError(what + ": CSV input lacks a '# dims:' header");
  a.values.reserve(tokens.size());
  for (const auto& tok : tokens) a.values.push_back(parse_number<T>(tok, what));
  check_shape(a);
  return a;
}

}  // namespace detail

/// Encodes an array in the binary container format.
template <class T>
std::string encode(const NdArray<T>& a) {
  detail::check_shape(a);
  std::string out(magic);
  out.push_back(static_cast<char>(dtype_of<T>));
  out.push_back(static_cast<char>(a.dims.size()));
  for (std::size_t d : a.dims) detail::put_u64(out, d);
  out.reserve(out.size() + 8 * a.values.size());
  for (T v : a.values) detail::put_u64(out, std::bit_cast<std::uint64_t>(v));
  return out;
}

/// Decodes a buffer holding either container format. Binary input must
/// carry the requested dtype; for CSV the text must parse as that type.
template <class T>
NdArray<T> decode(std::string_view bytes, const std::string& what = "array") {
  const std::string_view head = bytes.substr(0, std::min<std::size_t>(bytes.size(), 64));
  if (detail::trim(head).rfind('#', 0) == 0) return detail::parse_csv<T>(bytes, what);
  if (bytes.size() < 8 || bytes.substr(0, 6) != magic) throw DataError(what + ": bad magic");
  const auto* raw = reinterpret_cast<const unsigned char*>(bytes.data());
  const auto dtype = static_cast<DType>(raw[6]);
  if (dtype != DType::Float64 && dtype != DType::Int64)
    throw DataError(what + ": unknown dtype byte " + std::to_string(raw[6]));
  if (dtype != dtype_of<T>)
    throw DataError(what + ": dtype mismatch (file holds " + std::string(dtype_name(dtype)) +
                    ", expected " + std::string(dtype_name(dtype_of<T>)) + ")");
  const std::size_t ndim = raw[7];
  if (ndim < 1 || ndim > 3) throw DataError(what + ": ndim must be 1, 2 or 3");
  if (bytes.size() < 8 + 8 * ndim) throw DataError(what + ": truncated header");
  NdArray<T> a;
  std::uint64_t total = 1;
  for (std::size_t r = 0; r < ndim; ++r) {
    const std::uint64_t d = detail::get_u64(raw + 8 + 8 * r);
    if (d != 0 && total > std::numeric_limits<std::uint64_t>::max() / 8 / d)
      throw DataError(what + ": dim overflow");
    total *= d;
    a.dims.push_back(static_cast<std::size_t>(d));
  }
  const std::size_t payload = bytes.size() - (8 + 8 * ndim);
  if (payload < total * 8) throw DataError(what + ": truncated payload");
  if (payload > total * 8) throw DataError(what + ": trailing bytes after payload");
  a.values.resize(static_cast<std::size_t>(total));
  const unsigned char* p = raw + 8 + 8 * ndim;
  for (std::size_t i = 0; i < a.values.size(); ++i)
    a.values[i] = std::bit_cast<T>(detail::get_u64(p + 8 * i));
  return a;
}

inline std::string read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

template <class T>
NdArray<T> read_array(const std::filesystem::path& path) {
  return decode<T>(read_bytes(path), path.string());
}

inline FloatArray read_float_array(const std::filesystem::path& path, bool allow_nan = false) {
  FloatArray a = read_array<double>(path);
  if (!allow_nan) detail::reject_nan(a, path.string());
  return a;
}

inline IntArray read_int_array(const std::filesystem::path& path) {
  return read_array<std::int64_t>(path);
}

inline void write_bytes(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

template <class T>
void write_array(const NdArray<T>& a, const std::filesystem::path& path) {
  write_bytes(path, encode(a));
}

/// CSV rendering with 17 significant digits for floats.
template <class T>
std::string to_csv(const NdArray<T>& a) {
  detail::check_shape(a);
  std::string out = "# dims: ";
  for (std::size_t r = 0; r < a.dims.size(); ++r)
    out += (r ? "," : "") + std::to_string(a.dims[r]);
  out += '\n';
  const std::size_t width = a.dims.back();
  char buf[40];
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    if constexpr (std::is_same_v<T, double>)
      std::snprintf(buf, sizeof buf, "%.17g", a.values[i]);
    else
      std::snprintf(buf, sizeof buf, "%lld", static_cast<long long>(a.values[i]));
    out += buf;
    out += (width == 0 || (i + 1) % width == 0) ? '\n' : ',';
  }
  return out;
}

// Conversions between arrays and domain types. Labels shift by one here.

inline FloatArray from_matrix(const Matrix& m) { return {{m.rows(), m.cols()}, m.values()}; }

inline IntArray from_labels(const Array2<int>& labels) {
  IntArray a{{labels.rows(), labels.cols()}, {}};
  a.values.reserve(labels.size());
  for (int v : labels.values()) a.values.push_back(v + 1);
  return a;
}

inline IntArray from_labels(std::span<const int> labels) {
  IntArray a{{labels.size()}, {}};
  for (int v : labels) a.values.push_back(v + 1);
  return a;
}

inline IntArray from_permutations(const PermutationSet& perms) {
  IntArray a{{perms.m(), perms.K()}, {}};
  a.values.reserve(perms.m() * perms.K());
  for (std::size_t t = 0; t < perms.m(); ++t)
    for (std::size_t k = 0; k < perms.K(); ++k) a.values.push_back(perms[t][k] + 1);
  return a;
}

inline FloatArray from_chain(const ParameterChain& c) {
  return {{c.m(), c.K(), c.J()}, c.array().values()};
}

inline FloatArray from_chain(const ClassificationChain& c) {
  return {{c.m(), c.n(), c.K()}, c.array().values()};
}

inline FloatArray from_dataset(const Dataset& x) {
  if (x.dim() == 1) return {{x.n()}, x.matrix().values()};
  return from_matrix(x.matrix());
}

inline Matrix to_matrix(const FloatArray& a, const std::string& what) {
  if (a.ndim() == 1) return Matrix(a.dims[0], 1, a.values);
  if (a.ndim() != 2) throw DataError(what + ": expected a 1-D or 2-D array");
  return Matrix(a.dims[0], a.dims[1], a.values);
}

inline ParameterChain to_parameter_chain(const FloatArray& a) {
  if (a.ndim() != 3) throw DataError("mcmc: expected an m x K x J array");
  return ParameterChain(Array3<double>(a.dims[0], a.dims[1], a.dims[2], a.values));
}

inline ClassificationChain to_classification_chain(const FloatArray& a) {
  if (a.ndim() != 3) throw DataError("p: expected an m x n x K array");
  return ClassificationChain(Array3<double>(a.dims[0], a.dims[1], a.dims[2], a.values));
}

inline Dataset to_dataset(const FloatArray& a) {
  detail::reject_nan(a, "data");
  return Dataset(to_matrix(a, "data"));
}

namespace detail {

inline int to_label(std::int64_t v, std::size_t flat, const std::vector<std::size_t>& dims,
                    const std::string& what) {
  if (v < 1 || v > std::numeric_limits<int>::max())
    throw DataError(what + ": label " + std::to_string(v) + " at index " +
                    index_string(flat, dims) + " is not a positive 1-based label");
  return static_cast<int>(v - 1);
}

}  // namespace detail

/// 1-based labels on disk to 0-based labels in memory; 1-D input is one row.
inline Array2<int> to_labels(const IntArray& a, const std::string& what) {
  if (a.ndim() > 2) throw DataError(what + ": expected a 1-D or 2-D integer array");
  const std::size_t rows = a.ndim() == 1 ? 1 : a.dims[0];
  const std::size_t cols = a.ndim() == 1 ? a.dims[0] : a.dims[1];
  std::vector<int> v(a.values.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = detail::to_label(a.values[i], i, a.dims, what);
  return Array2<int>(rows, cols, std::move(v));
}

inline std::vector<int> to_label_vector(const IntArray& a, const std::string& what) {
  if (a.ndim() != 1) throw DataError(what + ": expected a 1-D integer array");
  return to_labels(a, what).values();
}

inline std::size_t max_label(const Array2<int>& labels) {
  int hi = -1;
  for (int v : labels.values()) hi = std::max(hi, v);
  return static_cast<std::size_t>(hi + 1);
}

inline AllocationChain to_allocation_chain(const IntArray& a, std::size_t K) {
  if (a.ndim() != 2) throw DataError("z: expected an m x n integer array");
  return AllocationChain(to_labels(a, "z"), K);
}

inline PermutationSet to_permutations(const IntArray& a, const std::string& what) {
  if (a.ndim() != 2) throw DataError(what + ": expected an m x K integer array");
  const Array2<int> rows = to_labels(a, what);
  PermutationSet perms(rows.cols());
  for (std::size_t t = 0; t < rows.rows(); ++t) {
    const auto r = rows.row(t);
    if (!is_bijection(r)) throw DataError(what + ": row " + std::to_string(t) + " is not a permutation");
    perms.push_back(Permutation(std::vector<int>(r.begin(), r.end())));
  }
  return perms;
}

/// Decimal with 17 significant digits, used by every text output.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace lsw::io
