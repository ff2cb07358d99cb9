#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace splitpit {

struct GradCheckConfig {
  std::size_t hidden = 8;
  std::size_t embed = 6;
  std::size_t vocab = 20;
  std::size_t filters = 3;
  double eps = 1e-5;
  std::uint64_t seed = 1;

  void validate() const;
};

struct GradCheckResult {
  std::string name;
  /// max |analytic - numeric| / max(1, |numeric|) over every input entry.
  double max_rel_error = 0.0;
};

/// Central-difference checks of every op kind, the model components, and
/// the full multi-task loss on a K = 2 pair, all at fresh random values.
std::vector<GradCheckResult> run_gradient_checks(const GradCheckConfig& config);

}  // namespace splitpit
