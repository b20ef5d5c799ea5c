#pragma once

#include <cstddef>
#include <vector>

#include "sogclr/encoder.hpp"

namespace sogclr {

// Forward passes for a fixed set of inputs under one parameter vector, plus a
// cotangent slot per embedding. Losses accumulate dL/de into the slots and a
// single backward sweep turns them into a parameter gradient.
class EmbeddingTape {
 public:
  explicit EmbeddingTape(const EncoderParams& params) : params_(&params) {}

  std::size_t add(const Vector& x);
  const Vector& embedding(std::size_t id) const { return views_[id].embedding; }
  std::size_t size() const noexcept { return views_.size(); }

  void add_cotangent(std::size_t id, const Vector& c, double scale);

  /// Sum over views of the VJP of each cotangent, in insertion order.
  Gradient backward() const;

 private:
  const EncoderParams* params_;
  std::vector<Forward> views_;
  std::vector<Vector> cotangents_;
};

}  // namespace sogclr
