#include "sogclr/gradcheck.hpp"

#include <algorithm>

#include "sogclr/bimodal.hpp"
#include "sogclr/errors.hpp"
#include "sogclr/optimizers.hpp"
#include "sogclr/text_io.hpp"
#include "sogclr/train.hpp"

namespace sogclr {

bool GradcheckReport::pass() const {
  return std::all_of(entries.begin(), entries.end(), [](const GradcheckEntry& e) { return e.pass; });
}

std::vector<std::string> GradcheckReport::failures() const {
  std::vector<std::string> out;
  for (const auto& e : entries) {
    if (!e.pass) out.push_back(e.name);
  }
  return out;
}

std::string GradcheckReport::format() const {
  std::string out;
  for (const auto& e : entries) {
    std::string name = e.name;
    name.resize(std::max<std::size_t>(name.size(), 28), ' ');
    out += name + "  rel_error=" + text::format_double(e.rel_error) + "  tol=" + text::format_double(e.tolerance) +
           "  " + (e.pass ? "PASS" : "FAIL") + '\n';
  }
  out += pass() ? "gradcheck: PASS\n" : "gradcheck: FAIL\n";
  return out;
}

namespace {

class Checker {
 public:
  Checker(GradcheckReport& report, const GradientHook& hook) : report_(report), hook_(hook) {}

  void compare(const std::string& name, Gradient analytic, const Gradient& reference, double tol) {
    if (hook_) hook_(name, analytic);
    const double scale = std::max({analytic.norm(), reference.norm(), kGradientNormFloor});
    const double err = (analytic - reference).norm() / scale;
    report_.entries.push_back({name, err, tol, err <= tol});
  }

 private:
  GradcheckReport& report_;
  const GradientHook& hook_;
};

void guard(std::size_t num_params, const char* what) {
  if (num_params > kGradcheckParamLimit) {
    fail(ErrorKind::size_limit, std::string(what) + " has " + std::to_string(num_params) + " parameters; gradcheck " +
                                    "is limited to " + std::to_string(kGradcheckParamLimit));
  }
}

}  // namespace

GradcheckReport gradcheck(const RunConfig& cfg, const GradientHook& hook) {
  cfg.validate();
  GradcheckReport report;
  Checker check(report, hook);
  const double h = kFiniteDiffStep;

  const Dataset ds = make_dataset(cfg);
  const AugmentationFamily fam = make_augmentations(cfg, ds.input_dim());
  const EncoderParams params = make_encoder(cfg, ds.input_dim());
  guard(params.size(), "encoder");

  for (const auto version : {ObjectiveVersion::v1, ObjectiveVersion::v2}) {
    GlobalObjectiveConfig ocfg = cfg.objective;
    ocfg.version = version;
    const OracleResult o = oracle_F(params, ocfg, ds, fam);
    const Gradient fd = finite_diff_grad(
        std::function<double(const EncoderParams&)>([&](const EncoderParams& p) { return oracle_value(p, ocfg, ds, fam); }),
        params, h);
    check.compare(std::string("oracle_") + to_string(version), o.grad, fd, kFiniteDiffTolerance);
  }

  Rng rng(cfg.optimizer.seed);
  const std::size_t b = std::min(cfg.optimizer.batch_size, ds.size());
  const MiniBatch batch = sample_minibatch(ds, fam, b, rng, cfg.optimizer.sampling);

  {
    const Gradient m = simclr_estimator(params, cfg.objective, ds, fam, batch);
    const Gradient fd = finite_diff_grad(std::function<double(const EncoderParams&)>([&](const EncoderParams& p) {
                                           return simclr_batch_loss(p, cfg.objective, ds, fam, batch);
                                         }),
                                         params, h);
    check.compare("simclr_estimator", m, fd, kFiniteDiffTolerance);
  }

  {
    SogclrState state = SogclrState::make(ds.size(), params.size(), cfg.optimizer.eta, 1.0, cfg.optimizer.beta);
    sogclr_update_u(state, params, cfg.objective, ds, fam, batch);
    const DclSurrogate dcl = dcl_surrogate(state, params, cfg.objective, ds, fam, batch);
    const Gradient dcl_grad = dcl.gradient(params);
    const Gradient fd = finite_diff_grad(
        std::function<double(const EncoderParams&)>([&](const EncoderParams& p) { return dcl.value(p); }), params, h);
    check.compare("dcl_surrogate", dcl_grad, fd, kFiniteDiffTolerance);
    check.compare("sogclr_estimator_vs_dcl", sogclr_estimator(state, params, cfg.objective, ds, fam, batch), dcl_grad,
                  kEstimatorTolerance);
  }

  {
    RunConfig paired_cfg = cfg;
    paired_cfg.dataset.path.clear();
    const PairedDataset pds = make_paired_dataset(paired_cfg);
    const BimodalParams bp{make_encoder(cfg, pds.image_dim()), make_encoder(cfg, pds.text_dim(), 1)};
    guard(bp.image.size(), "image encoder");
    guard(bp.text.size(), "text encoder");
    const OracleResult o = twoway_oracle_F(bp, cfg.objective, pds);
    const Vector flat = bp.flatten();
    const Gradient fd = finite_diff_grad(
        std::function<double(const Vector&)>(
            [&](const Vector& w) { return twoway_oracle_value(bp.with_values(w), cfg.objective, pds); }),
        flat, h);
    check.compare("twoway_oracle", o.grad, fd, kFiniteDiffTolerance);

    BimodalState state = BimodalState::make(pds.size(), bp.size(), cfg.optimizer.eta);
    state.u_image = o.per_sample_g.col(0);
    state.u_text = o.per_sample_g.col(1);
    PairBatch full;
    for (std::size_t i = 0; i < pds.size(); ++i) full.indices.push_back(i);
    check.compare("twoway_estimator_vs_oracle", twoway_estimator(state, bp, cfg.objective, pds, full), o.grad,
                  kEstimatorTolerance);
  }
  return report;
}

}  // namespace sogclr
