#include "sogclr/sweep.hpp"

#include <cmath>

#include "sogclr/errors.hpp"
#include "sogclr/text_io.hpp"
#include "sogclr/train.hpp"

namespace sogclr {

double plateau(const std::vector<MetricsRecord>& records) {
  std::vector<double> values;
  for (const auto& r : records) {
    if (r.oracle_grad_norm_sq) values.push_back(*r.oracle_grad_norm_sq);
  }
  if (values.empty()) fail(ErrorKind::invalid_argument, "plateau needs records with oracle_grad_norm_sq");
  const std::size_t tail = std::max<std::size_t>(1, (values.size() + 9) / 10);
  double sum = 0.0;
  for (std::size_t i = values.size() - tail; i < values.size(); ++i) sum += values[i];
  return sum / static_cast<double>(tail);
}

SweepResult sweep_batch_size(const RunConfig& cfg, const std::vector<std::size_t>& batch_sizes,
                             const std::vector<std::uint64_t>& seeds) {
  if (batch_sizes.empty() || seeds.empty()) fail(ErrorKind::invalid_argument, "sweep needs batch sizes and seeds");
  if (!cfg.metrics.oracle) fail(ErrorKind::config, "metrics.oracle: sweeps need the oracle");
  SweepResult result;
  for (const auto b : batch_sizes) {
    SweepRow row;
    row.batch_size = b;
    for (const auto s : seeds) {
      RunConfig cell = cfg;
      cell.optimizer.batch_size = b;
      cell.encoder.seed = s;
      cell.optimizer.seed = s;
      cell.metrics.path.clear();
      cell.checkpoint = {};
      cell.validate();
      row.plateaus.push_back(plateau(train(cell).records));
    }
    double sum = 0.0;
    for (double p : row.plateaus) sum += p;
    row.mean = sum / static_cast<double>(row.plateaus.size());
    if (row.plateaus.size() > 1) {
      double sq = 0.0;
      for (double p : row.plateaus) sq += (p - row.mean) * (p - row.mean);
      row.stddev = std::sqrt(sq / static_cast<double>(row.plateaus.size() - 1));
    }
    result.rows.push_back(std::move(row));
  }
  return result;
}

std::string format_sweep_csv(const SweepResult& result) {
  std::string out = "batch_size,mean,std,plateaus\n";
  for (const auto& row : result.rows) {
    out += std::to_string(row.batch_size) + ',' + text::format_double(row.mean) + ',' +
           text::format_double(row.stddev) + ',';
    for (std::size_t i = 0; i < row.plateaus.size(); ++i) {
      if (i > 0) out += ';';
      out += text::format_double(row.plateaus[i]);
    }
    out += '\n';
  }
  return out;
}

}  // namespace sogclr
