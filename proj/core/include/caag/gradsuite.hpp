#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "caag/gradcheck.hpp"

namespace caag::gradsuite {

struct Entry {
  std::string name;
  diff::FdReport report;
  double tolerance = 1e-4;
  bool pass = false;
};

struct Report {
  std::vector<Entry> entries;
  bool all_pass = true;
};

/// Finite-difference sweep over every differentiable op and every composed
/// loss on a tiny random model (hidden 8, vocab 10). Tolerances: 1e-4 for
/// single ops, 1e-3 for composed multi-step graphs. With negative_control a
/// deliberately corrupted backward rule is included and must be flagged.
Report run_gradient_suite(std::uint64_t seed, bool negative_control = false);

std::string format_report(const Report& rep);

}  // namespace caag::gradsuite
