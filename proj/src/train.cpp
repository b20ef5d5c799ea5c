#include "sogclr/train.hpp"

#include <chrono>
#include <cmath>
#include <numbers>

#include "sogclr/errors.hpp"
#include "sogclr/synthetic.hpp"

namespace sogclr {

namespace {

class Clock {
 public:
  explicit Clock(bool enabled) : enabled_(enabled), start_(std::chrono::steady_clock::now()) {}
  double elapsed_ms() const {
    if (!enabled_) return 0.0;
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  bool enabled_;
  std::chrono::steady_clock::time_point start_;
};

bool records_at(std::size_t t, const RunConfig& cfg) {
  return t == 0 || t % cfg.metrics.cadence == 0 || t == cfg.optimizer.steps;
}

template <class F>
void with_step_context(std::size_t t, F&& step) {
  try {
    step();
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::numeric) fail(ErrorKind::numeric, "step " + std::to_string(t) + ": " + e.what());
    throw;
  }
}

MetricsRecord unimodal_record(std::size_t t, const RunConfig& cfg, const EncoderParams& params, const Dataset& ds,
                              const AugmentationFamily& fam, const SogclrState* state, const Clock& clock) {
  MetricsRecord r;
  r.step = static_cast<long long>(t);
  if (cfg.metrics.oracle) {
    const OracleResult o = oracle_F(params, cfg.objective, ds, fam);
    r.objective_value = o.value;
    r.oracle_grad_norm_sq = o.grad.squaredNorm();
    if (state != nullptr) {
      const Vector exact = o.per_sample_g.rowwise().mean();
      r.u_tracking_mse = (state->u - exact).squaredNorm() / static_cast<double>(exact.size());
    }
    r.eps_sq_mean = aug_consistency_eps_all(params, ds, fam).mean();
  }
  r.wall_clock_ms = clock.elapsed_ms();
  return r;
}

MetricsRecord bimodal_record(std::size_t t, const RunConfig& cfg, const BimodalParams& params, const PairedDataset& ds,
                             const BimodalState& state, const Clock& clock) {
  MetricsRecord r;
  r.step = static_cast<long long>(t);
  if (cfg.metrics.oracle) {
    const OracleResult o = twoway_oracle_F(params, cfg.objective, ds);
    r.objective_value = o.value;
    r.oracle_grad_norm_sq = o.grad.squaredNorm();
    const double sq = (state.u_image - o.per_sample_g.col(0)).squaredNorm() +
                      (state.u_text - o.per_sample_g.col(1)).squaredNorm();
    r.u_tracking_mse = sq / static_cast<double>(2 * ds.size());
  }
  r.wall_clock_ms = clock.elapsed_ms();
  return r;
}

void write_outputs(const RunConfig& cfg, const std::vector<MetricsRecord>& records) {
  if (!cfg.metrics.path.empty()) emit_metrics(records, cfg.metrics.path, cfg.metrics.format);
}

PairBatch pair_batch(const MiniBatch& b) { return PairBatch{b.indices}; }

}  // namespace

double learning_rate(const OptimizerSpec& spec, std::size_t t) {
  if (spec.schedule == Schedule::constant) return spec.eta;
  const double frac = static_cast<double>(t) / static_cast<double>(spec.steps);
  return spec.eta_min + (spec.eta - spec.eta_min) * 0.5 * (1.0 + std::cos(std::numbers::pi * frac));
}

Dataset make_dataset(const RunConfig& cfg) {
  if (!cfg.dataset.path.empty()) return read_dataset_csv(cfg.dataset.path, cfg.dataset.labelled);
  return generate_synthetic(cfg.dataset.n, cfg.dataset.input_dim, cfg.dataset.clusters, cfg.dataset.separation,
                            cfg.dataset.seed);
}

PairedDataset make_paired_dataset(const RunConfig& cfg) {
  if (!cfg.dataset.path.empty()) return read_paired_csv(cfg.dataset.path, cfg.dataset.input_dim);
  return generate_paired_synthetic(cfg.dataset.n, cfg.dataset.input_dim, cfg.dataset.text_dim, cfg.dataset.clusters,
                                   cfg.dataset.separation, cfg.dataset.seed);
}

AugmentationFamily make_augmentations(const RunConfig& cfg, std::size_t input_dim) {
  return AugmentationFamily::gaussian(cfg.augment.count, input_dim, cfg.augment.scale, cfg.augment.seed);
}

EncoderParams make_encoder(const RunConfig& cfg, std::size_t input_dim, std::uint64_t seed_offset) {
  return EncoderParams::random(cfg.encoder.arch, input_dim, cfg.encoder.hidden_dim, cfg.encoder.embed_dim,
                               cfg.encoder.seed + seed_offset, cfg.encoder.init_scale);
}

TrainResult train(const RunConfig& cfg, const StepObserver& observer) {
  cfg.validate();
  const auto& opt = cfg.optimizer;
  if (opt.kind == OptimizerKind::bimodal_sogclr) {
    fail(ErrorKind::config, "optimizer.kind: bimodal_sogclr needs the bimodal training loop");
  }
  const Dataset ds = make_dataset(cfg);
  const AugmentationFamily fam = make_augmentations(cfg, ds.input_dim());
  TrainResult result{{}, make_encoder(cfg, ds.input_dim()), std::nullopt};
  EncoderParams& params = result.params;
  BatchSampler sampler(ds.size(), fam.size(), opt.batch_size, opt.sampling, opt.seed);

  const bool uses_u = opt.kind == OptimizerKind::sogclr || opt.kind == OptimizerKind::sogclr_adam;
  SimclrState simclr;
  if (uses_u) {
    result.state = SogclrState::make(ds.size(), params.size(), opt.eta, opt.gamma, opt.beta,
                                     opt.kind == OptimizerKind::sogclr_adam ? StepRule::adam_style : StepRule::momentum,
                                     opt.u_lag);
  } else {
    simclr = SimclrState::make(params.size(), opt.eta, opt.kind == OptimizerKind::simclr_momentum ? opt.beta : 1.0);
  }

  const Clock clock(cfg.metrics.wall_clock);
  const SogclrState* state_view = result.state ? &*result.state : nullptr;
  result.records.push_back(unimodal_record(0, cfg, params, ds, fam, state_view, clock));
  if (observer) observer(0, params.flatten());
  for (std::size_t t = 1; t <= opt.steps; ++t) {
    const MiniBatch batch = sampler.next();
    const double eta = learning_rate(opt, t - 1);
    with_step_context(t, [&] {
      if (uses_u) {
        result.state->eta = eta;
        sogclr_step(*result.state, params, cfg.objective, ds, fam, batch);
      } else {
        simclr.eta = eta;
        simclr_step(simclr, params, cfg.objective, ds, fam, batch);
      }
    });
    if (observer) observer(t, params.flatten());
    if (records_at(t, cfg)) result.records.push_back(unimodal_record(t, cfg, params, ds, fam, state_view, clock));
  }

  write_outputs(cfg, result.records);
  if (!cfg.checkpoint.encoder.empty()) write_encoder_checkpoint(params, cfg.checkpoint.encoder);
  if (!cfg.checkpoint.state.empty() && result.state) write_sogclr_state(*result.state, cfg.checkpoint.state);
  return result;
}

BimodalTrainResult train_bimodal(const RunConfig& cfg, const StepObserver& observer) {
  cfg.validate();
  const auto& opt = cfg.optimizer;
  if (opt.kind != OptimizerKind::bimodal_sogclr) {
    fail(ErrorKind::config, "optimizer.kind: the bimodal loop needs bimodal_sogclr");
  }
  const PairedDataset ds = make_paired_dataset(cfg);
  BimodalTrainResult result{{}, {make_encoder(cfg, ds.image_dim()), make_encoder(cfg, ds.text_dim(), 1)}, {}};
  result.state = BimodalState::make(ds.size(), result.params.size(), opt.eta, opt.gamma, opt.beta,
                                    StepRule::momentum, opt.u_lag);
  BatchSampler sampler(ds.size(), 1, opt.batch_size, opt.sampling, opt.seed);

  const Clock clock(cfg.metrics.wall_clock);
  result.records.push_back(bimodal_record(0, cfg, result.params, ds, result.state, clock));
  if (observer) observer(0, result.params.flatten());
  for (std::size_t t = 1; t <= opt.steps; ++t) {
    const PairBatch batch = pair_batch(sampler.next());
    result.state.eta = learning_rate(opt, t - 1);
    with_step_context(t, [&] { twoway_step(result.state, result.params, cfg.objective, ds, batch); });
    if (observer) observer(t, result.params.flatten());
    if (records_at(t, cfg)) result.records.push_back(bimodal_record(t, cfg, result.params, ds, result.state, clock));
  }

  write_outputs(cfg, result.records);
  if (!cfg.checkpoint.encoder.empty()) {
    write_encoder_checkpoint(result.params.image, cfg.checkpoint.encoder + ".image");
    write_encoder_checkpoint(result.params.text, cfg.checkpoint.encoder + ".text");
  }
  return result;
}

}  // namespace sogclr
