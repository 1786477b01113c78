#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace caag {

/// Error type for all library failures (shape mismatches, format errors, ...).
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Dense row-major tensor of doubles. Rank 1 or 2 in practice; a scalar is
/// shape {1}. Plain value type: no graph machinery lives here.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> v;

  Tensor() = default;
  Tensor(std::vector<std::size_t> s, std::vector<double> data);

  static Tensor zeros(std::vector<std::size_t> s);
  static Tensor scalar(double x) { return Tensor({1}, {x}); }
  static Tensor vec(std::vector<double> data);

  std::size_t numel() const { return v.size(); }
  std::size_t rank() const { return shape.size(); }
  std::size_t rows() const { return shape.at(0); }
  std::size_t cols() const { return shape.at(1); }

  double& at(std::size_t i) { return v[i]; }
  double at(std::size_t i) const { return v[i]; }
  double& at(std::size_t r, std::size_t c) { return v[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return v[r * cols() + c]; }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }
  void fill(double x) { std::fill(v.begin(), v.end(), x); }

  /// True if every element is finite (no NaN/Inf).
  bool all_finite() const;
};

std::string shape_str(const std::vector<std::size_t>& s);
std::size_t shape_numel(const std::vector<std::size_t>& s);

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b))
    throw Error(std::string(op) + ": shape mismatch " + shape_str(a.shape) +
                " vs " + shape_str(b.shape));
}

}  // namespace caag
