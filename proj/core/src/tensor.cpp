#include "caag/tensor.hpp"

#include <cmath>
#include <sstream>

namespace caag {

Tensor::Tensor(std::vector<std::size_t> s, std::vector<double> data)
    : shape(std::move(s)), v(std::move(data)) {
  if (shape_numel(shape) != v.size())
    throw Error("tensor: shape " + shape_str(shape) + " does not match " +
                std::to_string(v.size()) + " values");
}

Tensor Tensor::zeros(std::vector<std::size_t> s) {
  std::size_t n = shape_numel(s);
  return Tensor(std::move(s), std::vector<double>(n, 0.0));
}

Tensor Tensor::vec(std::vector<double> data) {
  std::size_t n = data.size();
  return Tensor({n}, std::move(data));
}

bool Tensor::all_finite() const {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

std::string shape_str(const std::vector<std::size_t>& s) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << " x ";
    os << s[i];
  }
  os << "]";
  return os.str();
}

std::size_t shape_numel(const std::vector<std::size_t>& s) {
  std::size_t n = 1;
  for (std::size_t d : s) n *= d;
  return n;
}

}  // namespace caag
