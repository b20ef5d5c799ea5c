#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <vector>

#include "sogclr/bimodal.hpp"
#include "sogclr/config.hpp"
#include "sogclr/metrics.hpp"

namespace sogclr {

/// Called with the flat parameter vector at step 0 and after every step.
using StepObserver = std::function<void(std::size_t step, const Vector& flat_params)>;

struct TrainResult {
  std::vector<MetricsRecord> records;
  EncoderParams params;
  std::optional<SogclrState> state;  // sogclr kinds only
};

struct BimodalTrainResult {
  std::vector<MetricsRecord> records;
  BimodalParams params;
  BimodalState state;
};

/// Learning rate for step t in [0, steps): constant, or
/// eta_min + (eta - eta_min) (1 + cos(pi t / steps)) / 2.
double learning_rate(const OptimizerSpec& spec, std::size_t t);

Dataset make_dataset(const RunConfig& cfg);
PairedDataset make_paired_dataset(const RunConfig& cfg);
AugmentationFamily make_augmentations(const RunConfig& cfg, std::size_t input_dim);
/// Encoder initialized from encoder.seed + seed_offset.
EncoderParams make_encoder(const RunConfig& cfg, std::size_t input_dim, std::uint64_t seed_offset = 0);

/// Records at step 0, every `cadence` steps and after the final step. Writes the
/// metrics file and checkpoints named in the config. A numeric abort is
/// rethrown with the failing step index.
TrainResult train(const RunConfig& cfg, const StepObserver& observer = {});

/// Two-way training for optimizer.kind = bimodal_sogclr. The text encoder is
/// seeded with encoder.seed + 1.
BimodalTrainResult train_bimodal(const RunConfig& cfg, const StepObserver& observer = {});

}  // namespace sogclr
