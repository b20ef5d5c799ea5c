#include "sogclr/objective.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "sogclr/embedding_tape.hpp"
#include "sogclr/errors.hpp"

namespace sogclr {

const char* to_string(ObjectiveVersion v) noexcept { return v == ObjectiveVersion::v1 ? "v1" : "v2"; }

ObjectiveVersion parse_objective_version(const std::string& name) {
  if (name == "v1" || name == "V1") return ObjectiveVersion::v1;
  if (name == "v2" || name == "V2") return ObjectiveVersion::v2;
  fail(ErrorKind::invalid_argument, "unknown objective version '" + name + "'");
}

void GlobalObjectiveConfig::validate() const {
  if (!(tau > 0.0) || !std::isfinite(tau)) fail(ErrorKind::invalid_argument, "tau must be > 0");
  if (!(eps0 >= 0.0) || !std::isfinite(eps0)) fail(ErrorKind::invalid_argument, "eps0 must be >= 0");
}

std::string to_json(const OracleResult& r) {
  nlohmann::json j;
  j["value"] = r.value;
  j["grad"] = std::vector<double>(r.grad.data(), r.grad.data() + r.grad.size());
  auto rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < r.per_sample_g.rows(); ++i) {
    std::vector<double> row(static_cast<std::size_t>(r.per_sample_g.cols()));
    for (Eigen::Index k = 0; k < r.per_sample_g.cols(); ++k) row[static_cast<std::size_t>(k)] = r.per_sample_g(i, k);
    rows.push_back(row);
  }
  j["per_sample_g"] = rows;
  return j.dump();
}

OracleResult oracle_result_from_json(std::string_view json) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::io, std::string("bad oracle record: ") + e.what());
  }
  OracleResult r;
  r.value = j.at("value").get<double>();
  const auto grad = j.at("grad").get<std::vector<double>>();
  r.grad = Eigen::Map<const Vector>(grad.data(), static_cast<Eigen::Index>(grad.size()));
  const auto rows = j.at("per_sample_g").get<std::vector<std::vector<double>>>();
  const auto cols = rows.empty() ? 0 : rows.front().size();
  r.per_sample_g.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != cols) fail(ErrorKind::io, "ragged per_sample_g in oracle record");
    for (std::size_t k = 0; k < cols; ++k) {
      r.per_sample_g(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
    }
  }
  return r;
}

Matrix embed_views(const EncoderParams& params, const Dataset& ds, const AugmentationFamily& fam) {
  const auto n = ds.size();
  const auto K = fam.size();
  Matrix e(static_cast<Eigen::Index>(n * K), static_cast<Eigen::Index>(params.embed_dim()));
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t k = 0; k < K; ++k)
      e.row(static_cast<Eigen::Index>(j * K + k)) = encode(params, fam.apply(k, ds[j])).transpose();
  return e;
}

namespace {

void check_index(const Dataset& ds, std::size_t i) {
  if (i >= ds.size()) fail(ErrorKind::invalid_argument, "sample index " + std::to_string(i) + " out of range");
}

// Embeddings of B_i for anchor index i.
std::vector<Vector> batch_negatives(const EncoderParams& params, const Dataset& ds, const AugmentationFamily& fam,
                                    std::size_t i, const MiniBatch& batch) {
  std::vector<Vector> out;
  for (std::size_t q = 0; q < batch.size(); ++q) {
    const auto j = batch.indices[q];
    if (j == i) continue;
    out.push_back(encode(params, fam.apply(batch.aug_a[q], ds[j])));
    out.push_back(encode(params, fam.apply(batch.aug_b[q], ds[j])));
  }
  if (out.empty()) fail(ErrorKind::invalid_argument, "B_i is empty: batch has no member other than the anchor");
  return out;
}

double log_sum_exp(const std::vector<double>& logits) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  double s = 0.0;
  for (double l : logits) s += std::exp(l - mx);
  return mx + std::log(s);
}

// exp(s(a, z) / tau) for every pair of views, zeroed where a and z come from the
// same sample (those pairs are outside S_i).
Matrix masked_exp_sims(const Matrix& views, std::size_t n, std::size_t K, double tau) {
  Matrix x = ((views * views.transpose()) / tau).array().exp().matrix();
  for (std::size_t i = 0; i < n; ++i) {
    const auto off = static_cast<Eigen::Index>(i * K);
    const auto k = static_cast<Eigen::Index>(K);
    x.block(off, off, k, k).setZero();
  }
  return x;
}

OracleResult run_oracle(const EncoderParams& params, const GlobalObjectiveConfig& cfg, const Dataset& ds,
                        const AugmentationFamily& fam, bool with_grad) {
  cfg.validate();
  const auto n = ds.size();
  const auto K = fam.size();
  if (n * K > kOracleViewLimit) {
    fail(ErrorKind::size_limit, "oracle refuses n*K = " + std::to_string(n * K) + " > " +
                                    std::to_string(kOracleViewLimit));
  }
  const double tau = cfg.tau;
  const double nd = static_cast<double>(n);
  const double Kd = static_cast<double>(K);

  EmbeddingTape tape(params);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t k = 0; k < K; ++k) tape.add(fam.apply(k, ds[j]));
  Matrix views(static_cast<Eigen::Index>(n * K), static_cast<Eigen::Index>(params.embed_dim()));
  for (std::size_t v = 0; v < n * K; ++v) views.row(static_cast<Eigen::Index>(v)) = tape.embedding(v).transpose();

  const Matrix expsim = masked_exp_sims(views, n, K, tau);
  const double inv_size = 1.0 / static_cast<double>((n - 1) * K);
  OracleResult r;
  r.per_sample_g.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(K));
  for (std::size_t v = 0; v < n * K; ++v) {
    r.per_sample_g(static_cast<Eigen::Index>(v / K), static_cast<Eigen::Index>(v % K)) =
        expsim.row(static_cast<Eigen::Index>(v)).sum() * inv_size;
  }

  // Positive-pair term.
  double positive = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    Vector sum = Vector::Zero(views.cols());
    for (std::size_t k = 0; k < K; ++k) sum += views.row(static_cast<Eigen::Index>(i * K + k)).transpose();
    positive += sum.squaredNorm();
    if (with_grad) {
      for (std::size_t k = 0; k < K; ++k) tape.add_cotangent(i * K + k, sum, -2.0 / (nd * Kd * Kd));
    }
  }
  double value = -positive / (nd * Kd * Kd);

  // Compositional term and the weights d F / d gbar_ik.
  Matrix weight(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(K));
  for (std::size_t i = 0; i < n; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    if (cfg.version == ObjectiveVersion::v1) {
      double acc = 0.0;
      for (std::size_t k = 0; k < K; ++k) {
        const double g = r.per_sample_g(ii, static_cast<Eigen::Index>(k));
        acc += tau * std::log(cfg.eps0 + g);
        weight(ii, static_cast<Eigen::Index>(k)) = tau / (nd * Kd * (cfg.eps0 + g));
      }
      value += acc / (nd * Kd);
    } else {
      const double mean_g = r.per_sample_g.row(ii).mean();
      value += tau * std::log(cfg.eps0 + mean_g) / nd;
      weight.row(ii).setConstant(tau / (nd * Kd * (cfg.eps0 + mean_g)));
    }
  }
  r.value = value;
  if (!std::isfinite(value)) fail(ErrorKind::numeric, "oracle objective is not finite");
  if (!with_grad) return r;

  // d gbar_ik / d e_ik = 1/(|S| tau) sum_z x_z e_z and d gbar_ik / d e_z = 1/(|S| tau) x_z e_ik,
  // with x_z = exp(s(ik, z) / tau). Stacked over views:
  //   C = diag(w) X E + X^T diag(w) E.
  Vector w(static_cast<Eigen::Index>(n * K));
  for (std::size_t v = 0; v < n * K; ++v) {
    w[static_cast<Eigen::Index>(v)] = weight(static_cast<Eigen::Index>(v / K), static_cast<Eigen::Index>(v % K)) * inv_size / tau;
  }
  const Matrix weighted = w.asDiagonal() * views;
  const Matrix cot = w.asDiagonal() * (expsim * views) + expsim.transpose() * weighted;
  for (std::size_t v = 0; v < n * K; ++v) tape.add_cotangent(v, cot.row(static_cast<Eigen::Index>(v)).transpose(), 1.0);
  r.grad = tape.backward();
  if (!r.grad.allFinite()) fail(ErrorKind::numeric, "oracle gradient is not finite");
  return r;
}

}  // namespace

double g_minibatch(const EncoderParams& params, const GlobalObjectiveConfig& cfg, const Dataset& ds,
                   const AugmentationFamily& fam, std::size_t i, std::size_t aug_k, const MiniBatch& batch) {
  cfg.validate();
  check_index(ds, i);
  const Vector anchor = encode(params, fam.apply(aug_k, ds[i]));
  const auto negatives = batch_negatives(params, ds, fam, i, batch);
  double acc = 0.0;
  for (const auto& z : negatives) acc += std::exp(anchor.dot(z) / cfg.tau);
  return acc / static_cast<double>(negatives.size());
}

double g_exact(const EncoderParams& params, const GlobalObjectiveConfig& cfg, const Dataset& ds,
               const AugmentationFamily& fam, std::size_t i, std::size_t aug_k) {
  cfg.validate();
  check_index(ds, i);
  const Vector anchor = encode(params, fam.apply(aug_k, ds[i]));
  const NegativeSet negatives(i, ds.size(), fam.size());
  double acc = 0.0;
  for (const auto ref : negatives) acc += std::exp(anchor.dot(encode(params, fam.apply(ref.aug, ds[ref.index]))) / cfg.tau);
  return acc / static_cast<double>(negatives.size());
}

double local_loss(const EncoderParams& params, const GlobalObjectiveConfig& cfg, const Dataset& ds,
                  const AugmentationFamily& fam, std::size_t i, std::size_t aug_a, std::size_t aug_b,
                  const MiniBatch& batch) {
  cfg.validate();
  check_index(ds, i);
  const Vector ea = encode(params, fam.apply(aug_a, ds[i]));
  const Vector eb = encode(params, fam.apply(aug_b, ds[i]));
  const auto negatives = batch_negatives(params, ds, fam, i, batch);
  std::vector<double> logits;
  logits.reserve(negatives.size());
  for (const auto& z : negatives) logits.push_back(ea.dot(z) / cfg.tau);
  return -ea.dot(eb) / cfg.tau + log_sum_exp(logits);
}

double global_loss_v1(const EncoderParams& params, const GlobalObjectiveConfig& cfg, const Dataset& ds,
                      const AugmentationFamily& fam, std::size_t i, std::size_t aug_a, std::size_t aug_b) {
  const double s = encode(params, fam.apply(aug_a, ds[i])).dot(encode(params, fam.apply(aug_b, ds[i])));
  return -s + cfg.tau * std::log(cfg.eps0 + g_exact(params, cfg, ds, fam, i, aug_a));
}

double global_loss_v2(const EncoderParams& params, const GlobalObjectiveConfig& cfg, const Dataset& ds,
                      const AugmentationFamily& fam, std::size_t i, std::size_t aug_a, std::size_t aug_b) {
  const double s = encode(params, fam.apply(aug_a, ds[i])).dot(encode(params, fam.apply(aug_b, ds[i])));
  double mean_g = 0.0;
  for (std::size_t k = 0; k < fam.size(); ++k) mean_g += g_exact(params, cfg, ds, fam, i, k);
  mean_g /= static_cast<double>(fam.size());
  return -s + cfg.tau * std::log(cfg.eps0 + mean_g);
}

OracleResult oracle_F(const EncoderParams& params, const GlobalObjectiveConfig& cfg, const Dataset& ds,
                      const AugmentationFamily& fam) {
  return run_oracle(params, cfg, ds, fam, true);
}

double oracle_value(const EncoderParams& params, const GlobalObjectiveConfig& cfg, const Dataset& ds,
                    const AugmentationFamily& fam) {
  return run_oracle(params, cfg, ds, fam, false).value;
}

namespace {

std::vector<Vector> view_list(const EncoderParams& params, const Dataset& ds, const AugmentationFamily& fam) {
  std::vector<Vector> views;
  views.reserve(ds.size() * fam.size());
  for (std::size_t j = 0; j < ds.size(); ++j)
    for (std::size_t k = 0; k < fam.size(); ++k) views.push_back(encode(params, fam.apply(k, ds[j])));
  return views;
}

// Mean over (A, A', z) in that loop order.
double eps_from_views(const std::vector<Vector>& views, std::size_t n, std::size_t K, std::size_t i) {
  if (K == 1) return 0.0;
  double acc = 0.0;
  for (std::size_t a = 0; a < K; ++a) {
    for (std::size_t b = 0; b < K; ++b) {
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        for (std::size_t kz = 0; kz < K; ++kz) {
          const Vector& z = views[j * K + kz];
          const double d = views[i * K + a].dot(z) - views[i * K + b].dot(z);
          acc += d * d;
        }
      }
    }
  }
  return acc / static_cast<double>(K * K * (n - 1) * K);
}

}  // namespace

double aug_consistency_eps(const EncoderParams& params, const Dataset& ds, const AugmentationFamily& fam,
                           std::size_t i) {
  check_index(ds, i);
  return eps_from_views(view_list(params, ds, fam), ds.size(), fam.size(), i);
}

Vector aug_consistency_eps_all(const EncoderParams& params, const Dataset& ds, const AugmentationFamily& fam) {
  const auto views = view_list(params, ds, fam);
  Vector out(static_cast<Eigen::Index>(ds.size()));
  for (std::size_t i = 0; i < ds.size(); ++i) out[static_cast<Eigen::Index>(i)] = eps_from_views(views, ds.size(), fam.size(), i);
  return out;
}

}  // namespace sogclr
