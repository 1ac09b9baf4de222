#pragma once

// Dense row-major tensor of doubles, rank 1 or 2. Shapes use int64_t.

#include <cmath>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace pnv {

struct Tensor {
  std::vector<int64_t> shape;
  std::vector<double> data;

  Tensor() = default;

  explicit Tensor(std::vector<int64_t> s) : shape(std::move(s)) {
    data.assign(static_cast<size_t>(count(shape)), 0.0);
  }

  Tensor(std::vector<int64_t> s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
    if (static_cast<int64_t>(data.size()) != count(shape))
      throw std::invalid_argument("Tensor: data length does not match shape " + shape_str());
  }

  static Tensor scalar(double v) { return Tensor({1}, {v}); }

  static Tensor from_vector(std::vector<double> v) {
    const int64_t n = static_cast<int64_t>(v.size());
    return Tensor({n}, std::move(v));
  }

  static Tensor from_matrix(int64_t r, int64_t c, std::vector<double> v) {
    return Tensor({r, c}, std::move(v));
  }

  static Tensor zeros_like(const Tensor& t) { return Tensor(t.shape); }

  int rank() const { return static_cast<int>(shape.size()); }
  int64_t size() const { return static_cast<int64_t>(data.size()); }
  int64_t rows() const { return shape.at(0); }
  int64_t cols() const { return shape.at(1); }

  double& at(int64_t r, int64_t c) { return data[static_cast<size_t>(r * cols() + c)]; }
  double at(int64_t r, int64_t c) const { return data[static_cast<size_t>(r * cols() + c)]; }
  double& operator[](int64_t i) { return data[static_cast<size_t>(i)]; }
  double operator[](int64_t i) const { return data[static_cast<size_t>(i)]; }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  bool all_finite() const {
    for (double v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }

  std::string shape_str() const {
    std::ostringstream os;
    os << '[';
    for (size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << ']';
    return os.str();
  }

  static int64_t count(const std::vector<int64_t>& s) {
    if (s.empty() || s.size() > 2) throw std::invalid_argument("Tensor: rank must be 1 or 2");
    int64_t n = 1;
    for (int64_t d : s) {
      if (d <= 0) throw std::invalid_argument("Tensor: dimensions must be positive");
      n *= d;
    }
    return n;
  }
};

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.size() != b.size())
    throw std::invalid_argument("max_abs_diff: size mismatch " + a.shape_str() + " vs " + b.shape_str());
  double m = 0.0;
  for (int64_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

}  // namespace pnv
