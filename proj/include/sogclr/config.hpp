#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "sogclr/embed_core.hpp"
#include "sogclr/encoder.hpp"
#include "sogclr/objective.hpp"
#include "sogclr/optimizers.hpp"

namespace sogclr {

enum class OptimizerKind { simclr, simclr_momentum, sogclr, sogclr_adam, bimodal_sogclr };
enum class Schedule { constant, cosine };
enum class MetricsFormat { csv, jsonl };

const char* to_string(OptimizerKind k) noexcept;
const char* to_string(Schedule s) noexcept;
const char* to_string(MetricsFormat f) noexcept;
const char* to_string(SamplingMode m) noexcept;
OptimizerKind parse_optimizer_kind(const std::string& name);
Schedule parse_schedule(const std::string& name);
MetricsFormat parse_metrics_format(const std::string& name);
SamplingMode parse_sampling_mode(const std::string& name);

struct DatasetSpec {
  std::size_t n = 32;
  std::size_t input_dim = 8;
  std::size_t text_dim = 8;  // text side of paired data
  std::size_t clusters = 4;
  double separation = 3.0;
  std::uint64_t seed = 1;
  std::string path;  // load from CSV instead of generating when set
  bool labelled = true;  // unimodal CSV carries a trailing label column
};

struct AugmentSpec {
  std::size_t count = 4;
  double scale = 0.1;
  std::uint64_t seed = 2;
};

struct EncoderSpec {
  Architecture arch = Architecture::linear;
  std::size_t hidden_dim = 16;
  std::size_t embed_dim = 4;
  double init_scale = 1.0;
  std::uint64_t seed = 3;
};

struct OptimizerSpec {
  OptimizerKind kind = OptimizerKind::sogclr;
  double eta = 0.1;
  double beta = 0.9;
  double gamma = 0.8;
  std::size_t batch_size = 8;
  std::size_t steps = 500;
  SamplingMode sampling = SamplingMode::epoch_shuffle;
  ULag u_lag = ULag::fresh;
  Schedule schedule = Schedule::constant;
  double eta_min = 0.0;  // cosine floor
  std::uint64_t seed = 4;
};

struct MetricsSpec {
  std::size_t cadence = 10;
  bool oracle = true;
  std::string path;
  MetricsFormat format = MetricsFormat::csv;
  bool wall_clock = false;  // off keeps metrics files byte-reproducible
};

struct CheckpointSpec {
  std::string encoder;  // encoder checkpoint (bimodal: "<path>.image" and "<path>.text")
  std::string state;    // optimizer state (sogclr kinds only)
};

struct RunConfig {
  DatasetSpec dataset;
  AugmentSpec augment;
  EncoderSpec encoder;
  GlobalObjectiveConfig objective;
  OptimizerSpec optimizer;
  MetricsSpec metrics;
  CheckpointSpec checkpoint;

  /// Throws config error naming the offending key.
  void validate() const;
};

using ConfigMap = std::map<std::string, std::string, std::less<>>;

/// "key = value" lines; '#' starts a comment; blank lines ignored; a repeated
/// key is a config error.
ConfigMap parse_config_text(std::string_view text, std::string_view origin = "<config>");
ConfigMap read_config_file(const std::filesystem::path& path);

/// "key=value"; replaces any earlier value.
void apply_override(ConfigMap& map, std::string_view assignment);

/// Unknown keys and malformed values are config errors. When objective.tau is
/// absent the bimodal kind defaults to 0.07, every other kind to 0.1.
RunConfig run_config_from_map(const ConfigMap& map);
ConfigMap to_map(const RunConfig& cfg);
std::string to_config_text(const RunConfig& cfg);

RunConfig load_run_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});

}  // namespace sogclr
