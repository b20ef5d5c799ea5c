#include "sogclr/embedding_tape.hpp"

namespace sogclr {

std::size_t EmbeddingTape::add(const Vector& x) {
  views_.push_back(forward(*params_, x));
  cotangents_.push_back(Vector::Zero(views_.back().embedding.size()));
  return views_.size() - 1;
}

void EmbeddingTape::add_cotangent(std::size_t id, const Vector& c, double scale) {
  cotangents_[id].noalias() += scale * c;
}

Gradient EmbeddingTape::backward() const {
  Gradient g = Gradient::Zero(static_cast<Eigen::Index>(params_->size()));
  for (std::size_t v = 0; v < views_.size(); ++v) accumulate_vjp(*params_, views_[v], cotangents_[v], g);
  return g;
}

}  // namespace sogclr
