#pragma once

#include <cstddef>
#include <string>
#include <string_view>

#include "sogclr/embed_core.hpp"
#include "sogclr/encoder.hpp"

namespace sogclr {

// Global contrastive objectives over a finite dataset and augmentation family.
//
// Every g quantity here is an average over its index set:
//
//   gbar(w; i, A, S) = 1/|S| * sum_{z in S} exp(E(A(x_i))^T E(z) / tau)
//
// and the outer function is f(g) = tau * ln(eps0 + g). Reported objective values
// drop the parameter-independent constant tau * ln|S_i| that separates this
// convention from a summed normalizer; gradients are unaffected.

enum class ObjectiveVersion { v1, v2 };

const char* to_string(ObjectiveVersion v) noexcept;
ObjectiveVersion parse_objective_version(const std::string& name);

struct GlobalObjectiveConfig {
  double tau = 0.1;
  double eps0 = 0.0;
  ObjectiveVersion version = ObjectiveVersion::v1;

  void validate() const;
};

struct OracleResult {
  double value = 0.0;
  Gradient grad;
  /// Unimodal: n x K matrix of exact gbar(i, k). Two-way: n x 2 matrix whose
  /// columns are the image-row and text-column averages.
  Matrix per_sample_g;
};

std::string to_json(const OracleResult& r);
OracleResult oracle_result_from_json(std::string_view json);

/// Embeddings of every augmented view, one row per view (j * K + k).
Matrix embed_views(const EncoderParams& params, const Dataset& ds, const AugmentationFamily& fam);

/// Mini-batch estimate of gbar(i, aug_k) over B_i: both augmented copies of every
/// batch member whose dataset index differs from i. Members equal to i are
/// masked, which keeps the estimate unbiased under sampling with replacement.
double g_minibatch(const EncoderParams& params, const GlobalObjectiveConfig& cfg, const Dataset& ds,
                   const AugmentationFamily& fam, std::size_t i, std::size_t aug_k, const MiniBatch& batch);

/// Exact gbar(i, aug_k) over all (n - 1) * K members of S_i.
double g_exact(const EncoderParams& params, const GlobalObjectiveConfig& cfg, const Dataset& ds,
               const AugmentationFamily& fam, std::size_t i, std::size_t aug_k);

/// InfoNCE-style loss with a summed in-batch normalizer:
///   -s_pos / tau + ln sum_{z in B_i} exp(s(A x_i, z) / tau).
double local_loss(const EncoderParams& params, const GlobalObjectiveConfig& cfg, const Dataset& ds,
                  const AugmentationFamily& fam, std::size_t i, std::size_t aug_a, std::size_t aug_b,
                  const MiniBatch& batch);

/// -s(A x_i, A' x_i) + tau ln(eps0 + gbar(i, A)).
double global_loss_v1(const EncoderParams& params, const GlobalObjectiveConfig& cfg, const Dataset& ds,
                      const AugmentationFamily& fam, std::size_t i, std::size_t aug_a, std::size_t aug_b);

/// -s(A x_i, A' x_i) + tau ln(eps0 + 1/K sum_k gbar(i, k)).
double global_loss_v2(const EncoderParams& params, const GlobalObjectiveConfig& cfg, const Dataset& ds,
                      const AugmentationFamily& fam, std::size_t i, std::size_t aug_a, std::size_t aug_b);

/// Largest n * K the exact oracle will enumerate.
inline constexpr std::size_t kOracleViewLimit = 10'000;

/// Exact F(w) (constant dropped) and its gradient by full enumeration:
///   F = -1/(n K^2) sum_{i,k,k'} s(A_k x_i, A_k' x_i)
///       + 1/n sum_i [ v1: 1/K sum_k f(gbar_ik)  |  v2: f(1/K sum_k gbar_ik) ].
OracleResult oracle_F(const EncoderParams& params, const GlobalObjectiveConfig& cfg, const Dataset& ds,
                      const AugmentationFamily& fam);

/// Value-only variant of oracle_F.
double oracle_value(const EncoderParams& params, const GlobalObjectiveConfig& cfg, const Dataset& ds,
                    const AugmentationFamily& fam);

/// E_{A, A', z in S_i} |E(A x_i)^T E(z) - E(A' x_i)^T E(z)|^2, exact over the family.
double aug_consistency_eps(const EncoderParams& params, const Dataset& ds, const AugmentationFamily& fam,
                           std::size_t i);

/// aug_consistency_eps for every i, sharing one embedding pass.
Vector aug_consistency_eps_all(const EncoderParams& params, const Dataset& ds, const AugmentationFamily& fam);

}  // namespace sogclr
