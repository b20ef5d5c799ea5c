#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "sogclr/embed_core.hpp"
#include "sogclr/encoder.hpp"
#include "sogclr/objective.hpp"

namespace sogclr {

enum class StepRule { momentum, adam_style };

/// When the per-sample statistic is refreshed relative to its use.
///   fresh:  update u from the current batch first, then weight each view by its
///           own freshly updated value (u1 / u2 of the reference pseudocode).
///   lagged: weight by u from the previous visit, then update. A sample seen for
///           the first time is weighted by its current batch estimate.
enum class ULag { fresh, lagged };

const char* to_string(StepRule r) noexcept;
const char* to_string(ULag l) noexcept;
StepRule parse_step_rule(const std::string& name);
ULag parse_u_lag(const std::string& name);

/// Bias-corrected first/second moment buffers for the Adam-style step.
struct AdamMoments {
  Vector first;
  Vector second;
  std::size_t t = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct SimclrState {
  double eta = 0.1;
  double beta = 1.0;  // 1 gives the plain mini-batch update
  Gradient v;

  static SimclrState make(std::size_t num_params, double eta, double beta = 1.0);
  void validate(std::size_t num_params) const;
};

struct SogclrState {
  Vector u;  // one moving average per dataset sample, zero-initialized
  double gamma = 0.8;
  double beta = 0.9;
  double eta = 0.1;
  Gradient v;
  StepRule step_rule = StepRule::momentum;
  ULag u_lag = ULag::fresh;
  AdamMoments adam;

  static SogclrState make(std::size_t n, std::size_t num_params, double eta, double gamma = 0.8,
                          double beta = 0.9, StepRule rule = StepRule::momentum, ULag lag = ULag::fresh);
  void validate(std::size_t n, std::size_t num_params) const;
};

struct StepReport {
  Gradient estimator;
  std::vector<double> u_batch_values;  // post-update u for each batch position
  double surrogate_loss = 0.0;
};

/// Mini-batch gbar for the anchor of each batch position, one value per view.
struct BatchStatistics {
  std::vector<double> g_a;
  std::vector<double> g_b;
};

/// Per-position weight p applied to grad gbar of each view's anchor.
struct ViewWeights {
  std::vector<double> view_a;
  std::vector<double> view_b;
};

/// Fresh per-view statistics produced while updating u:
///   fresh_a[p] = (1 - gamma) u_prev + gamma * g_a[p], likewise fresh_b.
struct UUpdate {
  BatchStatistics batch;
  std::vector<double> fresh_a;
  std::vector<double> fresh_b;
};

BatchStatistics batch_statistics(const EncoderParams& params, const GlobalObjectiveConfig& cfg, const Dataset& ds,
                                 const AugmentationFamily& fam, const MiniBatch& batch);

/// 1/B sum_p [ -grad s(A x_i, A' x_i) + 1/2 (p_a grad gbar_a + p_b grad gbar_b) ].
Gradient weighted_estimator(const EncoderParams& params, const GlobalObjectiveConfig& cfg, const Dataset& ds,
                            const AugmentationFamily& fam, const MiniBatch& batch, const ViewWeights& weights);

/// Symmetrized mini-batch loss 1/B sum_p [ -s_pos + 1/2 f(gbar_a) + 1/2 f(gbar_b) ] with
/// f(g) = tau ln(eps0 + g). Its gradient is simclr_estimator.
double simclr_batch_loss(const EncoderParams& params, const GlobalObjectiveConfig& cfg, const Dataset& ds,
                         const AugmentationFamily& fam, const MiniBatch& batch);

/// Mini-batch gradient with p = tau / (eps0 + gbar_view) taken from the batch itself.
Gradient simclr_estimator(const EncoderParams& params, const GlobalObjectiveConfig& cfg, const Dataset& ds,
                          const AugmentationFamily& fam, const MiniBatch& batch);

/// v <- (1 - beta) v + beta m;  w <- w - eta v. Returns the estimator m.
Gradient simclr_step(SimclrState& state, EncoderParams& params, const GlobalObjectiveConfig& cfg,
                     const Dataset& ds, const AugmentationFamily& fam, const MiniBatch& batch);

/// u_i <- (1 - gamma) u_i + gamma (g_a + g_b) / 2 for every batch position, in
/// position order. Entries of samples outside the batch are untouched.
UUpdate sogclr_update_u(SogclrState& state, const EncoderParams& params, const GlobalObjectiveConfig& cfg,
                        const Dataset& ds, const AugmentationFamily& fam, const MiniBatch& batch);

/// p_i = tau / (eps0 + u_i) for both views of every position.
ViewWeights weights_from_state(const SogclrState& state, const GlobalObjectiveConfig& cfg, const MiniBatch& batch);
/// p = tau / (eps0 + fresh) per view.
ViewWeights weights_from_update(const UUpdate& update, const GlobalObjectiveConfig& cfg);

/// Stochastic gradient estimator weighted by the current u (state error when a
/// batch member still has u_i <= 0).
Gradient sogclr_estimator(const SogclrState& state, const EncoderParams& params, const GlobalObjectiveConfig& cfg,
                          const Dataset& ds, const AugmentationFamily& fam, const MiniBatch& batch);

/// One full iteration: update u, form the estimator, then take a momentum or
/// Adam-style step. Parameters and state are left untouched on numeric failure.
StepReport sogclr_step(SogclrState& state, EncoderParams& params, const GlobalObjectiveConfig& cfg,
                       const Dataset& ds, const AugmentationFamily& fam, const MiniBatch& batch);

/// Dynamic contrastive loss with its weights frozen at construction:
///
///   L(w) = 1/B sum_p 1/2 sum_{view} [ -s_pos(w) + sum_z c_z s(anchor, z; w) ],
///   c_z = p_view * exp(s_z(w0) / tau) / (tau |B_i|).
///
/// grad L at w0 equals weighted_estimator with the same weights. This is the
/// reference pseudocode's normalized-logit loss scaled by tau / 2.
class DclSurrogate {
 public:
  DclSurrogate(const EncoderParams& params, const GlobalObjectiveConfig& cfg, const Dataset& ds,
               const AugmentationFamily& fam, const MiniBatch& batch, const ViewWeights& weights);

  double value(const EncoderParams& params) const;
  /// Gradient by summing vjp_sim over every term; independent of the batched
  /// path used by weighted_estimator.
  Gradient gradient(const EncoderParams& params) const;

 private:
  struct Term {
    Vector x_a;
    Vector x_b;
    double coef;
  };
  std::vector<Term> terms_;
};

DclSurrogate dcl_surrogate(const SogclrState& state, const EncoderParams& params, const GlobalObjectiveConfig& cfg,
                           const Dataset& ds, const AugmentationFamily& fam, const MiniBatch& batch);

/// Advances v (momentum) or the Adam moments and returns the step to subtract.
/// Buffers are left untouched when m or the step is not finite.
Vector step_update(Gradient& v, AdamMoments& adam, StepRule rule, double eta, double beta, const Gradient& m);

/// Applies a momentum (v <- (1-beta) v + beta m, w <- w - eta v) or Adam-style
/// step with the given estimator. Throws numeric error before mutating anything
/// when m is not finite.
void apply_step(EncoderParams& params, Gradient& v, AdamMoments& adam, StepRule rule, double eta, double beta,
                const Gradient& m);

/// Header line "sogclr_state <n> <d> <step_rule> <u_lag> <gamma> <beta> <eta>
/// <adam_beta1> <adam_beta2> <adam_eps> <adam_t>", then one real per line: u
/// (n), v (d), adam first moment (d), adam second moment (d).
void write_sogclr_state(const SogclrState& state, const std::filesystem::path& path);
SogclrState read_sogclr_state(const std::filesystem::path& path);

}  // namespace sogclr
