#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "caag/tensor.hpp"

namespace caag {

/// Deterministic RNG. Draws are derived from raw mt19937_64 output rather
/// than std::*_distribution so that streams are identical across standard
/// library implementations.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  /// Uniform in [0, 1).
  double uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller (one value per call; cached pair).
  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  /// Integer in [0, n).
  std::size_t index(std::size_t n) {
    return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n;
  }

  /// Draw an index from an (unnormalized is fine) probability vector by CDF
  /// inversion. Deterministic given the stream.
  std::size_t multinomial(const std::vector<double>& probs) {
    double total = 0.0;
    for (double p : probs) total += p;
    double u = uniform() * total;
    double acc = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      acc += probs[i];
      if (u < acc) return i;
    }
    return probs.size() - 1;
  }

  /// Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& xs) {
    for (std::size_t i = xs.size(); i > 1; --i) {
      std::size_t j = index(i);
      std::swap(xs[i - 1], xs[j]);
    }
  }

  std::uint64_t raw() { return gen_(); }

  /// Engine state round-trip (checkpoint resume continues the exact stream).
  /// The spare Gaussian is stored as raw bits to keep the trip bitwise.
  std::string state() const {
    std::uint64_t bits;
    std::memcpy(&bits, &spare_, 8);
    std::ostringstream os;
    os << (have_spare_ ? 1 : 0) << ' ' << bits << ' ' << gen_;
    return os.str();
  }

  void set_state(const std::string& s) {
    std::istringstream is(s);
    int flag = 0;
    std::uint64_t bits = 0;
    is >> flag >> bits >> gen_;
    if (!is) throw Error("rng: malformed state string");
    std::memcpy(&spare_, &bits, 8);
    have_spare_ = flag != 0;
  }

private:
  std::mt19937_64 gen_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace caag
