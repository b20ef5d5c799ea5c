#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "sogclr/config.hpp"
#include "sogclr/metrics.hpp"

namespace sogclr {

struct SweepRow {
  std::size_t batch_size = 0;
  double mean = 0.0;
  double stddev = 0.0;  // sample std (n - 1); 0 for a single seed
  std::vector<double> plateaus;  // one per seed, in seed order
};

struct SweepResult {
  std::vector<SweepRow> rows;
};

/// Mean oracle_grad_norm_sq over the final 10% of records (at least one).
double plateau(const std::vector<MetricsRecord>& records);

/// Runs train for every (B, seed). A seed replaces encoder.seed and
/// optimizer.seed; the dataset and augmentation family stay fixed.
SweepResult sweep_batch_size(const RunConfig& cfg, const std::vector<std::size_t>& batch_sizes,
                             const std::vector<std::uint64_t>& seeds);

/// "batch_size,mean,std,plateaus" with plateaus joined by ';'.
std::string format_sweep_csv(const SweepResult& result);

}  // namespace sogclr
