#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sogclr/config.hpp"

namespace sogclr {

/// One cadence tick. Oracle-derived fields are absent when the oracle is off;
/// u_tracking_mse only exists for methods that keep u, eps_sq_mean only for the
/// unimodal task.
struct MetricsRecord {
  long long step = 0;
  std::optional<double> objective_value;
  std::optional<double> oracle_grad_norm_sq;
  std::optional<double> u_tracking_mse;
  std::optional<double> eps_sq_mean;
  double wall_clock_ms = 0.0;

  bool operator==(const MetricsRecord&) const = default;
};

/// CSV: header "step,objective_value,oracle_grad_norm_sq,u_tracking_mse,eps_sq_mean,wall_clock_ms",
/// absent fields left empty. JSONL: one object per record, absent fields omitted.
/// Reals use the shortest round-trip form independent of locale.
std::string format_metrics(const std::vector<MetricsRecord>& records, MetricsFormat format);
std::vector<MetricsRecord> parse_metrics(std::string_view body, MetricsFormat format);

void emit_metrics(const std::vector<MetricsRecord>& records, const std::filesystem::path& path, MetricsFormat format);
std::vector<MetricsRecord> read_metrics(const std::filesystem::path& path, MetricsFormat format);

}  // namespace sogclr
