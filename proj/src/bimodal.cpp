#include "sogclr/bimodal.hpp"

#include <cmath>

#include "sogclr/embedding_tape.hpp"
#include "sogclr/errors.hpp"
#include "sogclr/text_io.hpp"

namespace sogclr {

PairedDataset::PairedDataset(std::vector<Vector> image, std::vector<Vector> text)
    : image_(std::move(image)), text_(std::move(text)) {
  if (image_.size() != text_.size()) fail(ErrorKind::invalid_argument, "paired sides differ in length");
  if (image_.size() < 2) fail(ErrorKind::invalid_argument, "paired dataset needs at least 2 pairs");
  for (const auto* side : {&image_, &text_}) {
    const auto dim = side->front().size();
    if (dim == 0) fail(ErrorKind::invalid_argument, "paired inputs must be non-empty");
    for (const auto& v : *side) {
      if (v.size() != dim) fail(ErrorKind::invalid_argument, "paired inputs differ in dimension");
      if (!v.allFinite()) fail(ErrorKind::invalid_argument, "paired dataset contains non-finite entries");
    }
  }
}

PairedDataset PairedDataset::swapped() const { return PairedDataset(text_, image_); }

PairedDataset read_paired_csv(const std::filesystem::path& path, std::size_t image_dim) {
  std::vector<Vector> image;
  std::vector<Vector> text;
  std::size_t line_no = 0;
  for (const auto& raw : text::read_lines(path)) {
    ++line_no;
    const auto line = text::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto fields = text::split(line, ',');
    if (fields.size() <= image_dim || image_dim == 0) {
      fail(ErrorKind::io, path.string() + ":" + std::to_string(line_no) + ": expected more than " +
                              std::to_string(image_dim) + " columns");
    }
    Vector x(static_cast<Eigen::Index>(image_dim));
    Vector t(static_cast<Eigen::Index>(fields.size() - image_dim));
    for (std::size_t c = 0; c < fields.size(); ++c) {
      const double v = text::parse_double(fields[c]);
      if (c < image_dim) {
        x[static_cast<Eigen::Index>(c)] = v;
      } else {
        t[static_cast<Eigen::Index>(c - image_dim)] = v;
      }
    }
    image.push_back(std::move(x));
    text.push_back(std::move(t));
  }
  return PairedDataset(std::move(image), std::move(text));
}

void write_paired_csv(const PairedDataset& ds, const std::filesystem::path& path) {
  std::string out;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    bool first = true;
    for (const Vector* v : {&ds.image(i), &ds.text(i)}) {
      for (double x : *v) {
        if (!first) out += ',';
        out += text::format_double(x);
        first = false;
      }
    }
    out += '\n';
  }
  text::write_file(path, out);
}

Vector BimodalParams::flatten() const {
  Vector flat(static_cast<Eigen::Index>(size()));
  flat << image.flatten(), text.flatten();
  return flat;
}

BimodalParams BimodalParams::with_values(const Vector& flat) const {
  if (static_cast<std::size_t>(flat.size()) != size()) fail(ErrorKind::invalid_argument, "flat vector has wrong size");
  const auto ni = static_cast<Eigen::Index>(image.size());
  return {image.with_values(flat.head(ni)), text.with_values(flat.tail(flat.size() - ni))};
}

void BimodalParams::subtract(const Vector& step) {
  if (static_cast<std::size_t>(step.size()) != size()) fail(ErrorKind::invalid_argument, "update has wrong size");
  if (!(flatten() - step).allFinite()) fail(ErrorKind::numeric, "parameter update overflows");
  const auto ni = static_cast<Eigen::Index>(image.size());
  image.subtract(step.head(ni));
  text.subtract(step.tail(step.size() - ni));
}

BimodalState BimodalState::make(std::size_t n, std::size_t num_params, double eta, double gamma, double beta,
                                StepRule rule, ULag lag) {
  BimodalState s;
  s.u_image = Vector::Zero(static_cast<Eigen::Index>(n));
  s.u_text = Vector::Zero(static_cast<Eigen::Index>(n));
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

void BimodalState::validate(std::size_t n, std::size_t num_params) const {
  if (!(eta >= 0.0)) fail(ErrorKind::invalid_argument, "eta must be >= 0");
  if (!(gamma >= 0.0 && gamma <= 1.0)) fail(ErrorKind::invalid_argument, "gamma must lie in [0, 1]");
  if (!(beta > 0.0 && beta <= 1.0)) fail(ErrorKind::invalid_argument, "beta must lie in (0, 1]");
  for (const Vector* u : {&u_image, &u_text}) {
    if (static_cast<std::size_t>(u->size()) != n) fail(ErrorKind::state, "u has wrong length");
    if (!u->allFinite() || (u->array() < 0.0).any()) fail(ErrorKind::state, "u entries must be finite and >= 0");
  }
  if (static_cast<std::size_t>(v.size()) != num_params) fail(ErrorKind::state, "momentum buffer has wrong size");
}

namespace {

void check_pair_encoders(const BimodalParams& params, const PairedDataset& ds) {
  if (params.image.embed_dim() != params.text.embed_dim()) {
    fail(ErrorKind::invalid_argument, "image and text embeddings must share a dimension");
  }
  if (params.image.input_dim() != ds.image_dim() || params.text.input_dim() != ds.text_dim()) {
    fail(ErrorKind::invalid_argument, "encoder input dimensions do not match the paired dataset");
  }
}

Matrix stack(const EmbeddingTape& tape) {
  Matrix m(static_cast<Eigen::Index>(tape.size()), tape.embedding(0).size());
  for (std::size_t v = 0; v < tape.size(); ++v) m.row(static_cast<Eigen::Index>(v)) = tape.embedding(v).transpose();
  return m;
}

OracleResult run_twoway_oracle(const BimodalParams& params, const GlobalObjectiveConfig& cfg, const PairedDataset& ds,
                               bool with_grad) {
  cfg.validate();
  check_pair_encoders(params, ds);
  const auto n = ds.size();
  if (n > kTwowayOracleLimit) {
    fail(ErrorKind::size_limit, "two-way oracle refuses n = " + std::to_string(n) + " > " +
                                    std::to_string(kTwowayOracleLimit));
  }
  const double nd = static_cast<double>(n);
  const double tau = cfg.tau;
  EmbeddingTape image_tape(params.image);
  EmbeddingTape text_tape(params.text);
  for (std::size_t i = 0; i < n; ++i) {
    image_tape.add(ds.image(i));
    text_tape.add(ds.text(i));
  }
  const Matrix ei = stack(image_tape);
  const Matrix et = stack(text_tape);
  const Matrix sims = ei * et.transpose();
  const Matrix x = (sims / tau).array().exp().matrix();
  const Vector g_image = x.rowwise().sum() / nd;
  const Vector g_text = x.colwise().sum().transpose() / nd;

  OracleResult r;
  r.per_sample_g.resize(static_cast<Eigen::Index>(n), 2);
  r.per_sample_g.col(0) = g_image;
  r.per_sample_g.col(1) = g_text;
  double value = 0.0;
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(n); ++i) {
    value += -2.0 * sims(i, i) + tau * std::log(cfg.eps0 + g_image[i]) + tau * std::log(cfg.eps0 + g_text[i]);
  }
  r.value = value / nd;
  if (!std::isfinite(r.value)) fail(ErrorKind::numeric, "two-way objective is not finite");
  if (!with_grad) return r;

  // dF/ds_ij = -2/n [i == j] + x_ij / n^2 (1/(eps0 + gI_i) + 1/(eps0 + gT_j)).
  const Vector inv_i = (cfg.eps0 + g_image.array()).inverse().matrix();
  const Vector inv_t = (cfg.eps0 + g_text.array()).inverse().matrix();
  const Matrix scaled = x / (nd * nd);
  Matrix ds_mat = (scaled.array().colwise() * inv_i.array()).matrix() +
                  (scaled.array().rowwise() * inv_t.transpose().array()).matrix();
  ds_mat.diagonal().array() -= 2.0 / nd;
  const Matrix ct_image = ds_mat * et;
  const Matrix ct_text = ds_mat.transpose() * ei;
  for (std::size_t i = 0; i < n; ++i) {
    image_tape.add_cotangent(i, ct_image.row(static_cast<Eigen::Index>(i)).transpose(), 1.0);
    text_tape.add_cotangent(i, ct_text.row(static_cast<Eigen::Index>(i)).transpose(), 1.0);
  }
  r.grad.resize(static_cast<Eigen::Index>(params.size()));
  r.grad << image_tape.backward(), text_tape.backward();
  if (!r.grad.allFinite()) fail(ErrorKind::numeric, "two-way gradient is not finite");
  return r;
}

// Batch embeddings plus the unbiased candidate weighting of each (p, q) cell.
struct PairGeometry {
  EmbeddingTape image_tape;
  EmbeddingTape text_tape;
  Matrix ei;
  Matrix et;
  Matrix x;       // exp(s_pq / tau)
  Matrix weight;      // share of cell (p, q) in g(x_p, B)
  Matrix col_weight;  // share of cell (p, q) in g(t_q, B)
  Vector g_image;
  Vector g_text;

  PairGeometry(const BimodalParams& params, const GlobalObjectiveConfig& cfg, const PairedDataset& ds,
               const PairBatch& batch)
      : image_tape(params.image), text_tape(params.text) {
    cfg.validate();
    check_pair_encoders(params, ds);
    const auto B = batch.size();
    if (B < 2) fail(ErrorKind::invalid_argument, "batch size must be >= 2");
    for (const auto i : batch.indices) {
      if (i >= ds.size()) fail(ErrorKind::invalid_argument, "batch index out of range");
      image_tape.add(ds.image(i));
      text_tape.add(ds.text(i));
    }
    ei = stack(image_tape);
    et = stack(text_tape);
    x = ((ei * et.transpose()) / cfg.tau).array().exp().matrix();
    const double nd = static_cast<double>(ds.size());
    const auto Bi = static_cast<Eigen::Index>(B);
    // Row weights: anchor image p over text candidates q. Column weights: anchor
    // text q over image candidates p. Both use the same candidate counts because
    // "j != i" is symmetric in the batch.
    weight = Matrix::Zero(Bi, Bi);
    for (Eigen::Index p = 0; p < Bi; ++p) {
      double others = 0.0;
      for (Eigen::Index q = 0; q < Bi; ++q) {
        if (batch.indices[static_cast<std::size_t>(q)] != batch.indices[static_cast<std::size_t>(p)]) others += 1.0;
      }
      if (others == 0.0) fail(ErrorKind::invalid_argument, "batch has no candidate other than the anchor");
      for (Eigen::Index q = 0; q < Bi; ++q) {
        if (q == p) {
          weight(p, q) = 1.0 / nd;
        } else if (batch.indices[static_cast<std::size_t>(q)] != batch.indices[static_cast<std::size_t>(p)]) {
          weight(p, q) = (nd - 1.0) / (nd * others);
        }
      }
    }
    // The "others" count of an anchor is the same whether it acts as a row or a
    // column, so the column weighting is the transpose.
    col_weight = weight.transpose();
    g_image = (weight.array() * x.array()).rowwise().sum().matrix();
    g_text = (col_weight.array() * x.array()).colwise().sum().transpose().matrix();
  }

  TwowayStatistics statistics() const {
    TwowayStatistics s;
    for (Eigen::Index p = 0; p < g_image.size(); ++p) {
      s.g_image.push_back(g_image[p]);
      s.g_text.push_back(g_text[p]);
    }
    return s;
  }

  Gradient estimator(const std::vector<double>& p_image, const std::vector<double>& p_text, double tau) {
    const auto Bi = ei.rows();
    if (static_cast<Eigen::Index>(p_image.size()) != Bi || static_cast<Eigen::Index>(p_text.size()) != Bi) {
      fail(ErrorKind::invalid_argument, "weights do not match batch size");
    }
    const double inv_b = 1.0 / static_cast<double>(Bi);
    Matrix coef(Bi, Bi);
    for (Eigen::Index p = 0; p < Bi; ++p) {
      for (Eigen::Index q = 0; q < Bi; ++q) {
        coef(p, q) = inv_b * x(p, q) / tau *
                     (p_image[static_cast<std::size_t>(p)] * weight(p, q) +
                      p_text[static_cast<std::size_t>(q)] * col_weight(p, q));
      }
      coef(p, p) -= 2.0 * inv_b;
    }
    const Matrix ct_image = coef * et;
    const Matrix ct_text = coef.transpose() * ei;
    for (Eigen::Index p = 0; p < Bi; ++p) {
      image_tape.add_cotangent(static_cast<std::size_t>(p), ct_image.row(p).transpose(), 1.0);
      text_tape.add_cotangent(static_cast<std::size_t>(p), ct_text.row(p).transpose(), 1.0);
    }
    const Gradient gi = image_tape.backward();
    const Gradient gt = text_tape.backward();
    Gradient g(gi.size() + gt.size());
    g << gi, gt;
    return g;
  }
};

TwowayStatistics update_twoway_u(BimodalState& state, const TwowayStatistics& stats, const PairBatch& batch) {
  const double keep = 1.0 - state.gamma;
  for (std::size_t p = 0; p < batch.size(); ++p) {
    const auto i = static_cast<Eigen::Index>(batch.indices[p]);
    if (i >= state.u_image.size()) fail(ErrorKind::state, "batch index beyond u length");
    state.u_image[i] = keep * state.u_image[i] + state.gamma * stats.g_image[p];
    state.u_text[i] = keep * state.u_text[i] + state.gamma * stats.g_text[p];
  }
  if (!state.u_image.allFinite() || !state.u_text.allFinite()) fail(ErrorKind::numeric, "u update is not finite");
  return stats;
}

void weights_from_u(const BimodalState& state, const GlobalObjectiveConfig& cfg, const PairBatch& batch,
                    const TwowayStatistics* cold_start, std::vector<double>& p_image, std::vector<double>& p_text) {
  p_image.clear();
  p_text.clear();
  for (std::size_t p = 0; p < batch.size(); ++p) {
    const auto i = static_cast<Eigen::Index>(batch.indices[p]);
    if (i >= state.u_image.size()) fail(ErrorKind::state, "batch index beyond u length");
    double ui = state.u_image[i];
    double ut = state.u_text[i];
    if (cold_start != nullptr) {
      if (!(ui > 0.0)) ui = cold_start->g_image[p];
      if (!(ut > 0.0)) ut = cold_start->g_text[p];
    }
    if (!(cfg.eps0 + ui > 0.0) || !(cfg.eps0 + ut > 0.0)) {
      fail(ErrorKind::state, "u[" + std::to_string(i) + "] <= 0 at use; update u before forming the estimator");
    }
    p_image.push_back(cfg.tau / (cfg.eps0 + ui));
    p_text.push_back(cfg.tau / (cfg.eps0 + ut));
  }
}

}  // namespace

OracleResult twoway_oracle_F(const BimodalParams& params, const GlobalObjectiveConfig& cfg, const PairedDataset& ds) {
  return run_twoway_oracle(params, cfg, ds, true);
}

double twoway_oracle_value(const BimodalParams& params, const GlobalObjectiveConfig& cfg, const PairedDataset& ds) {
  return run_twoway_oracle(params, cfg, ds, false).value;
}

TwowayStatistics twoway_batch_statistics(const BimodalParams& params, const GlobalObjectiveConfig& cfg,
                                         const PairedDataset& ds, const PairBatch& batch) {
  return PairGeometry(params, cfg, ds, batch).statistics();
}

TwowayStatistics twoway_update_u(BimodalState& state, const BimodalParams& params, const GlobalObjectiveConfig& cfg,
                                 const PairedDataset& ds, const PairBatch& batch) {
  return update_twoway_u(state, twoway_batch_statistics(params, cfg, ds, batch), batch);
}

Gradient twoway_weighted_estimator(const BimodalParams& params, const GlobalObjectiveConfig& cfg,
                                   const PairedDataset& ds, const PairBatch& batch,
                                   const std::vector<double>& p_image, const std::vector<double>& p_text) {
  PairGeometry geo(params, cfg, ds, batch);
  return geo.estimator(p_image, p_text, cfg.tau);
}

Gradient twoway_estimator(const BimodalState& state, const BimodalParams& params, const GlobalObjectiveConfig& cfg,
                          const PairedDataset& ds, const PairBatch& batch) {
  std::vector<double> p_image;
  std::vector<double> p_text;
  weights_from_u(state, cfg, batch, nullptr, p_image, p_text);
  return twoway_weighted_estimator(params, cfg, ds, batch, p_image, p_text);
}

StepReport twoway_step(BimodalState& state, BimodalParams& params, const GlobalObjectiveConfig& cfg,
                       const PairedDataset& ds, const PairBatch& batch) {
  state.validate(ds.size(), params.size());
  PairGeometry geo(params, cfg, ds, batch);
  const TwowayStatistics stats = geo.statistics();
  BimodalState next = state;
  std::vector<double> p_image;
  std::vector<double> p_text;
  if (state.u_lag == ULag::fresh) {
    update_twoway_u(next, stats, batch);
    weights_from_u(next, cfg, batch, nullptr, p_image, p_text);
  } else {
    weights_from_u(state, cfg, batch, &stats, p_image, p_text);
    update_twoway_u(next, stats, batch);
  }
  StepReport report;
  report.estimator = geo.estimator(p_image, p_text, cfg.tau);
  if (!report.estimator.allFinite()) fail(ErrorKind::numeric, "two-way estimator is not finite");
  const Vector step = step_update(next.v, next.adam, next.step_rule, next.eta, next.beta, report.estimator);
  params.subtract(step);
  for (const auto i : batch.indices) report.u_batch_values.push_back(next.u_image[static_cast<Eigen::Index>(i)]);
  for (const auto i : batch.indices) report.u_batch_values.push_back(next.u_text[static_cast<Eigen::Index>(i)]);
  state = std::move(next);
  return report;
}

}  // namespace sogclr
