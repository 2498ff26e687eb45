#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace emlab {

/// Raised when a computation produces NaN/Inf (divergence, bad input).
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Raised on malformed input files; carries the 1-based line number.
struct ParseError : std::runtime_error {
  ParseError(const std::string& msg, int64_t line)
      : std::runtime_error(msg + " (line " + std::to_string(line) + ")"), line_number(line) {}
  int64_t line_number;
};

// Dense float32 array, 1-D or 2-D. A 1-D tensor of n values behaves as a
// [1, n] row in matrix contexts.
struct Tensor {
  std::vector<int> shape;
  std::vector<float> v;

  Tensor() = default;
  Tensor(std::vector<int> s, std::vector<float> values) : shape(std::move(s)), v(std::move(values)) {
    if (numel_of(shape) != static_cast<int64_t>(v.size()))
      throw std::invalid_argument("tensor: value count does not match shape");
  }

  static int64_t numel_of(const std::vector<int>& s) {
    int64_t n = 1;
    for (int d : s) {
      if (d <= 0) throw std::invalid_argument("tensor: dimensions must be positive");
      n *= d;
    }
    return n;
  }

  static Tensor zeros(std::vector<int> s) {
    Tensor t;
    t.v.assign(static_cast<size_t>(numel_of(s)), 0.0f);
    t.shape = std::move(s);
    return t;
  }

  static Tensor full(std::vector<int> s, float value) {
    Tensor t = zeros(std::move(s));
    std::fill(t.v.begin(), t.v.end(), value);
    return t;
  }

  static Tensor scalar(float value) { return Tensor({1}, {value}); }

  int64_t numel() const { return static_cast<int64_t>(v.size()); }
  bool empty() const { return v.empty(); }

  int rows() const {
    if (shape.size() == 2) return shape[0];
    return 1;
  }
  int cols() const {
    if (shape.size() == 2) return shape[1];
    if (shape.size() == 1) return shape[0];
    return 0;
  }

  float item() const {
    if (numel() != 1) throw std::invalid_argument("tensor: item() on non-scalar");
    return v[0];
  }

  float& at(int r, int c) { return v[static_cast<size_t>(r) * cols() + c]; }
  float at(int r, int c) const { return v[static_cast<size_t>(r) * cols() + c]; }

  bool same_shape(const Tensor& o) const {
    return rows() == o.rows() && cols() == o.cols();
  }

  bool all_finite() const {
    for (float x : v)
      if (!std::isfinite(x)) return false;
    return true;
  }
};

using MatRM = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline Eigen::Map<MatRM> mat(Tensor& t) {
  return Eigen::Map<MatRM>(t.v.data(), t.rows(), t.cols());
}
inline Eigen::Map<const MatRM> mat(const Tensor& t) {
  return Eigen::Map<const MatRM>(t.v.data(), t.rows(), t.cols());
}

inline void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b))
    throw std::invalid_argument(std::string(op) + ": shape mismatch [" + std::to_string(a.rows()) +
                                "," + std::to_string(a.cols()) + "] vs [" +
                                std::to_string(b.rows()) + "," + std::to_string(b.cols()) + "]");
}

/// Row-wise argmax of a [m, n] tensor.
inline std::vector<int> argmax_rows(const Tensor& t) {
  std::vector<int> out(static_cast<size_t>(t.rows()));
  for (int r = 0; r < t.rows(); ++r) {
    int best = 0;
    float bv = t.at(r, 0);
    for (int c = 1; c < t.cols(); ++c)
      if (t.at(r, c) > bv) {
        bv = t.at(r, c);
        best = c;
      }
    out[static_cast<size_t>(r)] = best;
  }
  return out;
}

}  // namespace emlab
