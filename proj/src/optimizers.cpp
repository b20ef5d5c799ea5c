#include "sogclr/optimizers.hpp"

#include <cmath>

#include "sogclr/embedding_tape.hpp"
#include "sogclr/errors.hpp"
#include "sogclr/text_io.hpp"

namespace sogclr {

const char* to_string(StepRule r) noexcept { return r == StepRule::momentum ? "momentum" : "adam_style"; }
const char* to_string(ULag l) noexcept { return l == ULag::fresh ? "fresh" : "lagged"; }

StepRule parse_step_rule(const std::string& name) {
  if (name == "momentum") return StepRule::momentum;
  if (name == "adam_style" || name == "adam") return StepRule::adam_style;
  fail(ErrorKind::invalid_argument, "unknown step rule '" + name + "'");
}

ULag parse_u_lag(const std::string& name) {
  if (name == "fresh") return ULag::fresh;
  if (name == "lagged") return ULag::lagged;
  fail(ErrorKind::invalid_argument, "unknown u_lag '" + name + "'");
}

SimclrState SimclrState::make(std::size_t num_params, double eta, double beta) {
  SimclrState s;
  s.eta = eta;
  s.beta = beta;
  s.v = Gradient::Zero(static_cast<Eigen::Index>(num_params));
  s.validate(num_params);
  return s;
}

void SimclrState::validate(std::size_t num_params) const {
  if (!(eta >= 0.0)) fail(ErrorKind::invalid_argument, "eta must be >= 0");
  if (!(beta > 0.0 && beta <= 1.0)) fail(ErrorKind::invalid_argument, "beta must lie in (0, 1]");
  if (static_cast<std::size_t>(v.size()) != num_params) fail(ErrorKind::state, "momentum buffer has wrong size");
}

SogclrState SogclrState::make(std::size_t n, std::size_t num_params, double eta, double gamma, double beta,
                              StepRule rule, ULag lag) {
  SogclrState s;
  s.u = Vector::Zero(static_cast<Eigen::Index>(n));
  s.gamma = gamma;
  s.beta = beta;
  s.eta = eta;
  s.v = Gradient::Zero(static_cast<Eigen::Index>(num_params));
  s.step_rule = rule;
  s.u_lag = lag;
  s.adam.first = Vector::Zero(static_cast<Eigen::Index>(num_params));
  s.adam.second = Vector::Zero(static_cast<Eigen::Index>(num_params));
  s.validate(n, num_params);
  return s;
}

void SogclrState::validate(std::size_t n, std::size_t num_params) const {
  if (!(eta >= 0.0)) fail(ErrorKind::invalid_argument, "eta must be >= 0");
  if (!(gamma >= 0.0 && gamma <= 1.0)) fail(ErrorKind::invalid_argument, "gamma must lie in [0, 1]");
  if (!(beta > 0.0 && beta <= 1.0)) fail(ErrorKind::invalid_argument, "beta must lie in (0, 1]");
  if (static_cast<std::size_t>(u.size()) != n) fail(ErrorKind::state, "u has wrong length");
  if (!u.allFinite() || (u.array() < 0.0).any()) fail(ErrorKind::state, "u entries must be finite and >= 0");
  if (static_cast<std::size_t>(v.size()) != num_params) fail(ErrorKind::state, "momentum buffer has wrong size");
  if (static_cast<std::size_t>(adam.first.size()) != num_params ||
      static_cast<std::size_t>(adam.second.size()) != num_params) {
    fail(ErrorKind::state, "adam moments have wrong size");
  }
}

namespace {

// Embeddings and masked similarity kernel for the 2B augmented views of a batch.
// View 2p is A(x_i) and view 2p + 1 is A'(x_i) for batch position p.
struct BatchGeometry {
  EmbeddingTape tape;
  Matrix views;
  Matrix expsim;  // exp(s / tau), zero for pairs sharing a dataset index
  Vector count;   // |B_i| per view
  Vector gbar;    // mini-batch gbar per view

  BatchGeometry(const EncoderParams& params, const GlobalObjectiveConfig& cfg, const Dataset& ds,
                const AugmentationFamily& fam, const MiniBatch& batch)
      : tape(params) {
    cfg.validate();
    const auto B = batch.size();
    if (B < 2) fail(ErrorKind::invalid_argument, "batch size must be >= 2");
    if (batch.aug_a.size() != B || batch.aug_b.size() != B) fail(ErrorKind::invalid_argument, "malformed batch");
    for (std::size_t p = 0; p < B; ++p) {
      const auto i = batch.indices[p];
      if (i >= ds.size()) fail(ErrorKind::invalid_argument, "batch index out of range");
      tape.add(fam.apply(batch.aug_a[p], ds[i]));
      tape.add(fam.apply(batch.aug_b[p], ds[i]));
    }
    const auto V = static_cast<Eigen::Index>(2 * B);
    views.resize(V, static_cast<Eigen::Index>(params.embed_dim()));
    for (Eigen::Index v = 0; v < V; ++v) views.row(v) = tape.embedding(static_cast<std::size_t>(v)).transpose();
    expsim = ((views * views.transpose()) / cfg.tau).array().exp().matrix();
    count.resize(V);
    gbar.resize(V);
    for (Eigen::Index v = 0; v < V; ++v) {
      const auto iv = batch.indices[static_cast<std::size_t>(v / 2)];
      double c = 0.0;
      for (Eigen::Index z = 0; z < V; ++z) {
        if (batch.indices[static_cast<std::size_t>(z / 2)] == iv) {
          expsim(v, z) = 0.0;
        } else {
          c += 1.0;
        }
      }
      if (c == 0.0) fail(ErrorKind::invalid_argument, "B_i is empty: batch has no member other than the anchor");
      count[v] = c;
      gbar[v] = expsim.row(v).sum() / c;
    }
  }

  std::size_t batch_size() const { return static_cast<std::size_t>(views.rows() / 2); }

  BatchStatistics statistics() const {
    BatchStatistics s;
    for (std::size_t p = 0; p < batch_size(); ++p) {
      s.g_a.push_back(gbar[static_cast<Eigen::Index>(2 * p)]);
      s.g_b.push_back(gbar[static_cast<Eigen::Index>(2 * p + 1)]);
    }
    return s;
  }

  // Per-view coefficient of sum_z x_z grad s(anchor, z) in the estimator.
  Vector view_coefficients(const ViewWeights& weights, double tau) const {
    const auto B = batch_size();
    if (weights.view_a.size() != B || weights.view_b.size() != B) {
      fail(ErrorKind::invalid_argument, "view weights do not match batch size");
    }
    Vector w(views.rows());
    const double scale = 0.5 / (static_cast<double>(B) * tau);
    for (std::size_t p = 0; p < B; ++p) {
      const auto a = static_cast<Eigen::Index>(2 * p);
      w[a] = scale * weights.view_a[p] / count[a];
      w[a + 1] = scale * weights.view_b[p] / count[a + 1];
    }
    return w;
  }

  Gradient estimator(const ViewWeights& weights, double tau) {
    const auto B = batch_size();
    const double inv_b = 1.0 / static_cast<double>(B);
    for (std::size_t p = 0; p < B; ++p) {
      tape.add_cotangent(2 * p, views.row(static_cast<Eigen::Index>(2 * p + 1)).transpose(), -inv_b);
      tape.add_cotangent(2 * p + 1, views.row(static_cast<Eigen::Index>(2 * p)).transpose(), -inv_b);
    }
    const Vector w = view_coefficients(weights, tau);
    const Matrix cot = w.asDiagonal() * (expsim * views) + expsim.transpose() * (w.asDiagonal() * views);
    for (Eigen::Index v = 0; v < views.rows(); ++v) tape.add_cotangent(static_cast<std::size_t>(v), cot.row(v).transpose(), 1.0);
    return tape.backward();
  }

  double surrogate(const ViewWeights& weights, double tau) const {
    const auto B = batch_size();
    double positive = 0.0;
    for (std::size_t p = 0; p < B; ++p) {
      positive += views.row(static_cast<Eigen::Index>(2 * p)).dot(views.row(static_cast<Eigen::Index>(2 * p + 1)));
    }
    const Vector w = view_coefficients(weights, tau);
    const Matrix sims = views * views.transpose();
    double negative = 0.0;
    for (Eigen::Index v = 0; v < views.rows(); ++v) negative += w[v] * expsim.row(v).dot(sims.row(v));
    return -positive / static_cast<double>(B) + negative;
  }
};

ViewWeights simclr_weights(const BatchStatistics& s, const GlobalObjectiveConfig& cfg) {
  ViewWeights w;
  for (std::size_t p = 0; p < s.g_a.size(); ++p) {
    w.view_a.push_back(cfg.tau / (cfg.eps0 + s.g_a[p]));
    w.view_b.push_back(cfg.tau / (cfg.eps0 + s.g_b[p]));
  }
  return w;
}

void require_finite(const Gradient& m, const char* what) {
  if (!m.allFinite()) fail(ErrorKind::numeric, std::string(what) + " is not finite");
}

UUpdate update_u(SogclrState& state, const BatchStatistics& stats, const MiniBatch& batch) {
  if (static_cast<std::size_t>(state.u.size()) == 0) fail(ErrorKind::state, "u is empty");
  UUpdate up;
  up.batch = stats;
  const double keep = 1.0 - state.gamma;
  for (std::size_t p = 0; p < batch.size(); ++p) {
    const auto i = static_cast<Eigen::Index>(batch.indices[p]);
    if (i >= state.u.size()) fail(ErrorKind::state, "batch index beyond u length");
    const double prev = state.u[i];
    up.fresh_a.push_back(keep * prev + state.gamma * stats.g_a[p]);
    up.fresh_b.push_back(keep * prev + state.gamma * stats.g_b[p]);
    const double next = keep * prev + state.gamma * (stats.g_a[p] + stats.g_b[p]) / 2.0;
    if (!std::isfinite(next)) fail(ErrorKind::numeric, "u update is not finite");
    state.u[i] = next;
  }
  return up;
}

}  // namespace

BatchStatistics batch_statistics(const EncoderParams& params, const GlobalObjectiveConfig& cfg, const Dataset& ds,
                                 const AugmentationFamily& fam, const MiniBatch& batch) {
  return BatchGeometry(params, cfg, ds, fam, batch).statistics();
}

Gradient weighted_estimator(const EncoderParams& params, const GlobalObjectiveConfig& cfg, const Dataset& ds,
                            const AugmentationFamily& fam, const MiniBatch& batch, const ViewWeights& weights) {
  BatchGeometry geo(params, cfg, ds, fam, batch);
  return geo.estimator(weights, cfg.tau);
}

double simclr_batch_loss(const EncoderParams& params, const GlobalObjectiveConfig& cfg, const Dataset& ds,
                         const AugmentationFamily& fam, const MiniBatch& batch) {
  const BatchGeometry geo(params, cfg, ds, fam, batch);
  const auto B = geo.batch_size();
  double acc = 0.0;
  for (std::size_t p = 0; p < B; ++p) {
    const auto a = static_cast<Eigen::Index>(2 * p);
    acc += -geo.views.row(a).dot(geo.views.row(a + 1));
    acc += 0.5 * cfg.tau * (std::log(cfg.eps0 + geo.gbar[a]) + std::log(cfg.eps0 + geo.gbar[a + 1]));
  }
  return acc / static_cast<double>(B);
}

Gradient simclr_estimator(const EncoderParams& params, const GlobalObjectiveConfig& cfg, const Dataset& ds,
                          const AugmentationFamily& fam, const MiniBatch& batch) {
  BatchGeometry geo(params, cfg, ds, fam, batch);
  return geo.estimator(simclr_weights(geo.statistics(), cfg), cfg.tau);
}

Gradient simclr_step(SimclrState& state, EncoderParams& params, const GlobalObjectiveConfig& cfg, const Dataset& ds,
                     const AugmentationFamily& fam, const MiniBatch& batch) {
  state.validate(params.size());
  const Gradient m = simclr_estimator(params, cfg, ds, fam, batch);
  AdamMoments unused;
  apply_step(params, state.v, unused, StepRule::momentum, state.eta, state.beta, m);
  return m;
}

UUpdate sogclr_update_u(SogclrState& state, const EncoderParams& params, const GlobalObjectiveConfig& cfg,
                        const Dataset& ds, const AugmentationFamily& fam, const MiniBatch& batch) {
  return update_u(state, batch_statistics(params, cfg, ds, fam, batch), batch);
}

ViewWeights weights_from_state(const SogclrState& state, const GlobalObjectiveConfig& cfg, const MiniBatch& batch) {
  ViewWeights w;
  for (const auto i : batch.indices) {
    if (static_cast<Eigen::Index>(i) >= state.u.size()) fail(ErrorKind::state, "batch index beyond u length");
    const double u = state.u[static_cast<Eigen::Index>(i)];
    if (!(cfg.eps0 + u > 0.0)) {
      fail(ErrorKind::state, "u[" + std::to_string(i) + "] <= 0 at use; update u before forming the estimator");
    }
    const double p = cfg.tau / (cfg.eps0 + u);
    w.view_a.push_back(p);
    w.view_b.push_back(p);
  }
  return w;
}

ViewWeights weights_from_update(const UUpdate& update, const GlobalObjectiveConfig& cfg) {
  ViewWeights w;
  for (std::size_t p = 0; p < update.fresh_a.size(); ++p) {
    w.view_a.push_back(cfg.tau / (cfg.eps0 + update.fresh_a[p]));
    w.view_b.push_back(cfg.tau / (cfg.eps0 + update.fresh_b[p]));
  }
  return w;
}

Gradient sogclr_estimator(const SogclrState& state, const EncoderParams& params, const GlobalObjectiveConfig& cfg,
                          const Dataset& ds, const AugmentationFamily& fam, const MiniBatch& batch) {
  return weighted_estimator(params, cfg, ds, fam, batch, weights_from_state(state, cfg, batch));
}

StepReport sogclr_step(SogclrState& state, EncoderParams& params, const GlobalObjectiveConfig& cfg,
                       const Dataset& ds, const AugmentationFamily& fam, const MiniBatch& batch) {
  state.validate(ds.size(), params.size());
  BatchGeometry geo(params, cfg, ds, fam, batch);
  const BatchStatistics stats = geo.statistics();

  SogclrState next = state;
  ViewWeights weights;
  if (state.u_lag == ULag::fresh) {
    weights = weights_from_update(update_u(next, stats, batch), cfg);
  } else {
    for (std::size_t p = 0; p < batch.size(); ++p) {
      const double u = state.u[static_cast<Eigen::Index>(batch.indices[p])];
      // Cold start: a sample never visited has u = 0; use its batch estimate.
      const double stat = u > 0.0 ? u : (stats.g_a[p] + stats.g_b[p]) / 2.0;
      weights.view_a.push_back(cfg.tau / (cfg.eps0 + stat));
      weights.view_b.push_back(cfg.tau / (cfg.eps0 + stat));
    }
    update_u(next, stats, batch);
  }

  StepReport report;
  report.surrogate_loss = geo.surrogate(weights, cfg.tau);
  report.estimator = geo.estimator(weights, cfg.tau);
  require_finite(report.estimator, "SogCLR estimator");
  apply_step(params, next.v, next.adam, next.step_rule, next.eta, next.beta, report.estimator);
  for (const auto i : batch.indices) report.u_batch_values.push_back(next.u[static_cast<Eigen::Index>(i)]);
  state = std::move(next);
  return report;
}

DclSurrogate::DclSurrogate(const EncoderParams& params, const GlobalObjectiveConfig& cfg, const Dataset& ds,
                           const AugmentationFamily& fam, const MiniBatch& batch, const ViewWeights& weights) {
  const BatchGeometry geo(params, cfg, ds, fam, batch);
  const Vector w = geo.view_coefficients(weights, cfg.tau);
  const auto B = geo.batch_size();
  auto input = [&](Eigen::Index v) {
    const auto p = static_cast<std::size_t>(v / 2);
    const auto k = (v % 2 == 0) ? batch.aug_a[p] : batch.aug_b[p];
    return fam.apply(k, ds[batch.indices[p]]);
  };
  for (std::size_t p = 0; p < B; ++p) {
    const auto a = static_cast<Eigen::Index>(2 * p);
    terms_.push_back({input(a), input(a + 1), -1.0 / static_cast<double>(B)});
  }
  for (Eigen::Index v = 0; v < geo.views.rows(); ++v) {
    for (Eigen::Index z = 0; z < geo.views.rows(); ++z) {
      if (geo.expsim(v, z) == 0.0) continue;
      terms_.push_back({input(v), input(z), w[v] * geo.expsim(v, z)});
    }
  }
}

double DclSurrogate::value(const EncoderParams& params) const {
  double acc = 0.0;
  for (const auto& t : terms_) acc += t.coef * encode(params, t.x_a).dot(encode(params, t.x_b));
  return acc;
}

Gradient DclSurrogate::gradient(const EncoderParams& params) const {
  Gradient g = Gradient::Zero(static_cast<Eigen::Index>(params.size()));
  for (const auto& t : terms_) g += vjp_sim(params, t.x_a, t.x_b, t.coef);
  return g;
}

DclSurrogate dcl_surrogate(const SogclrState& state, const EncoderParams& params, const GlobalObjectiveConfig& cfg,
                           const Dataset& ds, const AugmentationFamily& fam, const MiniBatch& batch) {
  return DclSurrogate(params, cfg, ds, fam, batch, weights_from_state(state, cfg, batch));
}

Vector step_update(Gradient& v, AdamMoments& adam, StepRule rule, double eta, double beta, const Gradient& m) {
  require_finite(m, "gradient estimator");
  if (rule == StepRule::momentum) {
    if (v.size() != m.size()) fail(ErrorKind::invalid_argument, "momentum buffer has wrong size");
    Gradient next_v = (1.0 - beta) * v + beta * m;
    Vector step = eta * next_v;
    require_finite(step, "parameter update");
    v = std::move(next_v);
    return step;
  }
  AdamMoments next = adam;
  if (next.first.size() != m.size()) next.first = Vector::Zero(m.size());
  if (next.second.size() != m.size()) next.second = Vector::Zero(m.size());
  next.t += 1;
  next.first = next.beta1 * next.first + (1.0 - next.beta1) * m;
  next.second = next.beta2 * next.second + (1.0 - next.beta2) * m.cwiseProduct(m);
  const double c1 = 1.0 - std::pow(next.beta1, static_cast<double>(next.t));
  const double c2 = 1.0 - std::pow(next.beta2, static_cast<double>(next.t));
  Vector step = eta * ((next.first / c1).array() / ((next.second / c2).array().sqrt() + next.eps)).matrix();
  require_finite(step, "parameter update");
  adam = std::move(next);
  return step;
}

void apply_step(EncoderParams& params, Gradient& v, AdamMoments& adam, StepRule rule, double eta, double beta,
                const Gradient& m) {
  if (static_cast<std::size_t>(m.size()) != params.size()) fail(ErrorKind::invalid_argument, "estimator has wrong size");
  Gradient next_v = v;
  AdamMoments next_adam = adam;
  const Vector step = step_update(next_v, next_adam, rule, eta, beta, m);
  params.subtract(step);
  v = std::move(next_v);
  adam = std::move(next_adam);
}

void write_sogclr_state(const SogclrState& state, const std::filesystem::path& path) {
  using text::format_double;
  std::string out = "sogclr_state " + std::to_string(state.u.size()) + ' ' + std::to_string(state.v.size()) + ' ' +
                    to_string(state.step_rule) + ' ' + to_string(state.u_lag) + ' ' + format_double(state.gamma) +
                    ' ' + format_double(state.beta) + ' ' + format_double(state.eta) + ' ' +
                    format_double(state.adam.beta1) + ' ' + format_double(state.adam.beta2) + ' ' +
                    format_double(state.adam.eps) + ' ' + std::to_string(state.adam.t) + '\n';
  for (const Vector* block : {&state.u, &state.v, &state.adam.first, &state.adam.second}) {
    for (double x : *block) {
      out += format_double(x);
      out += '\n';
    }
  }
  text::write_file(path, out);
}

SogclrState read_sogclr_state(const std::filesystem::path& path) {
  const auto lines = text::read_lines(path);
  if (lines.empty()) fail(ErrorKind::io, "empty state file '" + path.string() + "'");
  const auto h = text::split(text::trim(lines.front()), ' ');
  if (h.size() != 12 || h[0] != "sogclr_state") fail(ErrorKind::io, "bad state header in '" + path.string() + "'");
  const auto n = static_cast<std::size_t>(text::parse_int(h[1]));
  const auto d = static_cast<std::size_t>(text::parse_int(h[2]));
  SogclrState s = SogclrState::make(n, d, 0.0);
  s.step_rule = parse_step_rule(std::string(h[3]));
  s.u_lag = parse_u_lag(std::string(h[4]));
  s.gamma = text::parse_double(h[5]);
  s.beta = text::parse_double(h[6]);
  s.eta = text::parse_double(h[7]);
  s.adam.beta1 = text::parse_double(h[8]);
  s.adam.beta2 = text::parse_double(h[9]);
  s.adam.eps = text::parse_double(h[10]);
  s.adam.t = static_cast<std::size_t>(text::parse_int(h[11]));
  std::vector<double> values;
  for (std::size_t l = 1; l < lines.size(); ++l) {
    const auto tok = text::trim(lines[l]);
    if (!tok.empty()) values.push_back(text::parse_double(tok));
  }
  if (values.size() != n + 3 * d) fail(ErrorKind::io, "state file '" + path.string() + "' has wrong value count");
  std::size_t pos = 0;
  for (Vector* block : {&s.u, &s.v, &s.adam.first, &s.adam.second}) {
    for (auto& x : *block) x = values[pos++];
  }
  s.validate(n, d);
  return s;
}

}  // namespace sogclr
