#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

#include "sogclr/embed_core.hpp"
#include "sogclr/encoder.hpp"
#include "sogclr/objective.hpp"
#include "sogclr/optimizers.hpp"

namespace sogclr {

// Two-way (image <-> text) global contrastive objective over paired data:
//
//   F = 1/n sum_i [ -s_ii + f(gI_i) ] + 1/n sum_i [ -s_ii + f(gT_i) ],
//   s_ij = E_I(x_i)^T E_T(t_j),  gI_i = 1/n sum_j exp(s_ij / tau),
//   gT_j = 1/n sum_i exp(s_ij / tau),  f(g) = tau ln(eps0 + g).
//
// The positive pair belongs to both normalizers. There is no augmentation
// family; the pairing supplies the two views.

class PairedDataset {
 public:
  PairedDataset() = default;
  PairedDataset(std::vector<Vector> image, std::vector<Vector> text);

  std::size_t size() const noexcept { return image_.size(); }
  std::size_t image_dim() const noexcept { return image_.empty() ? 0 : image_.front().size(); }
  std::size_t text_dim() const noexcept { return text_.empty() ? 0 : text_.front().size(); }
  const Vector& image(std::size_t i) const { return image_.at(i); }
  const Vector& text(std::size_t i) const { return text_.at(i); }

  /// Both sides swapped.
  PairedDataset swapped() const;

 private:
  std::vector<Vector> image_;
  std::vector<Vector> text_;
};

/// One CSV table; the first `image_dim` columns of each row are the image side,
/// the remaining columns the text side.
PairedDataset read_paired_csv(const std::filesystem::path& path, std::size_t image_dim);
void write_paired_csv(const PairedDataset& ds, const std::filesystem::path& path);

/// Image and text encoders. Flattened layout: image parameters, then text.
struct BimodalParams {
  EncoderParams image;
  EncoderParams text;

  std::size_t size() const noexcept { return image.size() + text.size(); }
  Vector flatten() const;
  BimodalParams with_values(const Vector& flat) const;
  void subtract(const Vector& step);
};

struct BimodalState {
  Vector u_image;
  Vector u_text;
  double gamma = 0.8;
  double beta = 0.9;
  double eta = 0.1;
  Gradient v;
  StepRule step_rule = StepRule::momentum;
  ULag u_lag = ULag::fresh;
  AdamMoments adam;

  static BimodalState make(std::size_t n, std::size_t num_params, double eta, double gamma = 0.8,
                           double beta = 0.9, StepRule rule = StepRule::momentum, ULag lag = ULag::fresh);
  void validate(std::size_t n, std::size_t num_params) const;
};

/// Dataset indices only; the two sides of each pair are the views.
struct PairBatch {
  std::vector<std::size_t> indices;
  std::size_t size() const noexcept { return indices.size(); }
};

/// Per batch position: mini-batch estimate of gI (image row) and gT (text column).
struct TwowayStatistics {
  std::vector<double> g_image;
  std::vector<double> g_text;
};

inline constexpr std::size_t kTwowayOracleLimit = 1'000;

/// Exact value and gradient; per_sample_g holds columns (gI, gT).
OracleResult twoway_oracle_F(const BimodalParams& params, const GlobalObjectiveConfig& cfg, const PairedDataset& ds);
double twoway_oracle_value(const BimodalParams& params, const GlobalObjectiveConfig& cfg, const PairedDataset& ds);

/// Mini-batch estimates. For anchor i with c in-batch candidates j != i:
///   g(x_i, B) = 1/n exp(s_ii / tau) + (n - 1) / (n c) sum_{j in B, j != i} exp(s_ij / tau),
/// which is unbiased for gI_i under uniform sampling and equals the plain
/// in-batch average when B = n.
TwowayStatistics twoway_batch_statistics(const BimodalParams& params, const GlobalObjectiveConfig& cfg,
                                         const PairedDataset& ds, const PairBatch& batch);

/// u <- (1 - gamma) u + gamma g for both directions, in position order.
TwowayStatistics twoway_update_u(BimodalState& state, const BimodalParams& params, const GlobalObjectiveConfig& cfg,
                                 const PairedDataset& ds, const PairBatch& batch);

/// 1/B sum_{i in B} [ -2 grad s_ii + p_image,i grad g(x_i, B) + p_text,i grad g(t_i, B) ].
Gradient twoway_weighted_estimator(const BimodalParams& params, const GlobalObjectiveConfig& cfg,
                                   const PairedDataset& ds, const PairBatch& batch,
                                   const std::vector<double>& p_image, const std::vector<double>& p_text);

/// Estimator with p = tau / (eps0 + u) read from the state (state error when u <= 0).
Gradient twoway_estimator(const BimodalState& state, const BimodalParams& params, const GlobalObjectiveConfig& cfg,
                          const PairedDataset& ds, const PairBatch& batch);

/// u update, estimator and parameter step over both encoders jointly. The
/// report's u_batch_values lists the image statistics then the text ones.
StepReport twoway_step(BimodalState& state, BimodalParams& params, const GlobalObjectiveConfig& cfg,
                       const PairedDataset& ds, const PairBatch& batch);

}  // namespace sogclr
