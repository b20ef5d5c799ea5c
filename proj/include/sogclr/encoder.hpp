#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>

#include "sogclr/embed_core.hpp"

namespace sogclr {

/// Flat parameter-space vector. Layout follows EncoderParams::flatten().
using Gradient = Vector;

enum class Architecture { linear, one_hidden };

const char* to_string(Architecture arch) noexcept;
Architecture parse_architecture(const std::string& name);

/// Parameters of E(x; w) = normalize(W1 x)            (linear)
///                      or normalize(W2 tanh(W1 x))    (one_hidden).
///
/// Flattening order: W1 row-major, then W2 row-major (one_hidden only). The
/// same order is used by gradients and checkpoint files.
class EncoderParams {
 public:
  EncoderParams() = default;

  static EncoderParams linear(Matrix w);
  static EncoderParams one_hidden(Matrix w1, Matrix w2);
  /// Gaussian init with entries N(0, scale^2 / fan_in).
  static EncoderParams random(Architecture arch, std::size_t input_dim, std::size_t hidden_dim,
                              std::size_t embed_dim, std::uint64_t seed, double scale = 1.0);

  Architecture architecture() const noexcept { return arch_; }
  std::size_t input_dim() const noexcept { return static_cast<std::size_t>(w1_.cols()); }
  std::size_t hidden_dim() const noexcept {
    return arch_ == Architecture::one_hidden ? static_cast<std::size_t>(w1_.rows()) : 0;
  }
  std::size_t embed_dim() const noexcept {
    return static_cast<std::size_t>(arch_ == Architecture::linear ? w1_.rows() : w2_.rows());
  }
  /// Total parameter count d.
  std::size_t size() const noexcept { return static_cast<std::size_t>(w1_.size() + w2_.size()); }

  const Matrix& w1() const noexcept { return w1_; }
  const Matrix& w2() const noexcept { return w2_; }

  Vector flatten() const;
  /// Same architecture and shapes, values taken from `flat`.
  EncoderParams with_values(const Vector& flat) const;
  /// w <- w - step. Throws numeric error, leaving w untouched, if the result
  /// would not be finite.
  void subtract(const Vector& step);

 private:
  void validate() const;

  Architecture arch_ = Architecture::linear;
  Matrix w1_;
  Matrix w2_;
};

/// Forward-pass cache for one input; enough to run the backward pass.
struct Forward {
  Vector input;
  Vector hidden;  // tanh activations, empty for linear
  Vector raw;     // pre-normalization output
  Vector embedding;
  double raw_norm = 0.0;
};

/// Throws degenerate_input when the pre-normalization output has norm < 1e-12,
/// numeric error when it is not finite.
Forward forward(const EncoderParams& params, const Vector& x);
Vector encode(const EncoderParams& params, const Vector& x);

/// out += d/dw <cotangent, E(x; w)>, using the exact Jacobian of the
/// normalization, (I - e e^T) / ||raw||.
void accumulate_vjp(const EncoderParams& params, const Forward& fwd, const Vector& cotangent,
                    Gradient& out);

/// cotangent * d/dw [E(x_a; w)^T E(x_b; w)], through both branches.
Gradient vjp_sim(const EncoderParams& params, const Vector& x_a, const Vector& x_b, double cotangent);

/// Central differences (f(w + h e_j) - f(w - h e_j)) / 2h for every coordinate.
Gradient finite_diff_grad(const std::function<double(const Vector&)>& f, const Vector& w, double h);
Gradient finite_diff_grad(const std::function<double(const EncoderParams&)>& f,
                          const EncoderParams& params, double h);

/// ||a - b|| / max(||a||, ||b||, 1e-10). The floor keeps comparisons of two
/// (near-)zero gradients from dividing by zero.
double relative_error(const Vector& a, const Vector& b);

/// Header line "encoder <arch> <input_dim> <hidden_dim> <embed_dim>", then one
/// real per line in flattening order.
void write_encoder_checkpoint(const EncoderParams& params, const std::filesystem::path& path);
EncoderParams read_encoder_checkpoint(const std::filesystem::path& path);

}  // namespace sogclr
