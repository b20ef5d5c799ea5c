#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "sogclr/config.hpp"

namespace sogclr {

inline constexpr double kFiniteDiffStep = 1e-5;
inline constexpr double kFiniteDiffTolerance = 1e-5;
inline constexpr double kEstimatorTolerance = 1e-8;
inline constexpr std::size_t kGradcheckParamLimit = 200;
/// Relative errors divide by max(|a|, |b|, floor). Central differences at
/// h = 1e-5 carry ~1e-11 of round-off, so a vanishing gradient is held to an
/// absolute 1e-10 instead of a meaningless ratio.
inline constexpr double kGradientNormFloor = 1e-5;

struct GradcheckEntry {
  std::string name;
  double rel_error = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

struct GradcheckReport {
  std::vector<GradcheckEntry> entries;

  bool pass() const;
  /// Names of failing checks, in report order.
  std::vector<std::string> failures() const;
  std::string format() const;
};

/// Sees the analytic gradient of each named check before it is compared; lets
/// tests inject faults.
using GradientHook = std::function<void(std::string_view check, Gradient& analytic)>;

/// Checks on the instance described by `cfg` (dataset, augmentations, encoder,
/// objective, batch size and seed):
///   oracle_v1, oracle_v2, twoway_oracle, simclr_estimator, dcl_surrogate
///     analytic gradient vs central finite differences, tolerance 1e-5;
///   sogclr_estimator_vs_dcl, twoway_estimator_vs_oracle
///     estimator vs estimator, tolerance 1e-8.
/// Throws size_limit when an encoder has more than 200 parameters.
GradcheckReport gradcheck(const RunConfig& cfg, const GradientHook& hook = {});

}  // namespace sogclr
