#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iterator>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace sogclr {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Rng = std::mt19937_64;

/// Scales `v` to unit Euclidean norm. Throws degenerate_input when the norm is
/// below 1e-30.
Vector l2_normalize(const Vector& v);

/// Inner product of two unit vectors, clamped to [-1, 1].
double cosine_sim(const Vector& u, const Vector& v);

/// n input points of a common dimension, optionally labelled by class (labels
/// are only used by synthetic probes).
class Dataset {
 public:
  Dataset() = default;
  explicit Dataset(std::vector<Vector> points, std::vector<int> labels = {});

  std::size_t size() const noexcept { return points_.size(); }
  std::size_t input_dim() const noexcept { return points_.empty() ? 0 : points_.front().size(); }
  const Vector& operator[](std::size_t i) const { return points_.at(i); }
  const std::vector<Vector>& points() const noexcept { return points_; }
  const std::vector<int>& labels() const noexcept { return labels_; }
  bool labelled() const noexcept { return !labels_.empty(); }

 private:
  std::vector<Vector> points_;
  std::vector<int> labels_;
};

/// Comma-separated reals, one point per row; when `labelled` the last column is
/// an integer class id.
Dataset read_dataset_csv(const std::filesystem::path& path, bool labelled);
void write_dataset_csv(const Dataset& ds, const std::filesystem::path& path);

/// A finite family of additive perturbations A_k(x) = x + delta_k. Because the
/// family is enumerable, every expectation over augmentations is an exact sum.
class AugmentationFamily {
 public:
  AugmentationFamily() = default;
  AugmentationFamily(std::vector<Vector> deltas, std::uint64_t seed);

  /// K deltas with i.i.d. N(0, scale^2) entries drawn once from `seed`.
  static AugmentationFamily gaussian(std::size_t count, std::size_t input_dim, double scale,
                                     std::uint64_t seed);

  std::size_t size() const noexcept { return deltas_.size(); }
  std::uint64_t seed() const noexcept { return seed_; }
  const Vector& delta(std::size_t k) const;
  Vector apply(std::size_t k, const Vector& x) const;

 private:
  std::vector<Vector> deltas_;
  std::uint64_t seed_ = 0;
};

/// Augmentation indices are zero-based: k in [0, K).
Vector apply_augmentation(const AugmentationFamily& fam, std::size_t k, const Vector& x);

struct NegativeRef {
  std::size_t index;
  std::size_t aug;
  bool operator==(const NegativeRef&) const = default;
};

/// S_i = {A_k(x_j) : j != i, k in [0, K)}, iterated lazily in (j, k) order.
class NegativeSet {
 public:
  class iterator {
   public:
    using iterator_category = std::forward_iterator_tag;
    using value_type = NegativeRef;
    using difference_type = std::ptrdiff_t;
    using pointer = const NegativeRef*;
    using reference = NegativeRef;

    iterator() = default;
    iterator(const NegativeSet* set, std::size_t j, std::size_t k) : set_(set), j_(j), k_(k) {}

    NegativeRef operator*() const { return {j_, k_}; }
    iterator& operator++();
    iterator operator++(int) {
      auto copy = *this;
      ++*this;
      return copy;
    }
    bool operator==(const iterator& o) const { return j_ == o.j_ && k_ == o.k_; }

   private:
    const NegativeSet* set_ = nullptr;
    std::size_t j_ = 0;
    std::size_t k_ = 0;
  };

  NegativeSet(std::size_t owner, std::size_t n, std::size_t K);

  std::size_t owner() const noexcept { return owner_; }
  std::size_t size() const noexcept { return (n_ - 1) * K_; }
  iterator begin() const;
  iterator end() const { return {this, n_, 0}; }

 private:
  friend class iterator;
  std::size_t owner_;
  std::size_t n_;
  std::size_t K_;
};

/// B dataset indices with two independently drawn augmentation choices each.
struct MiniBatch {
  std::vector<std::size_t> indices;
  std::vector<std::size_t> aug_a;
  std::vector<std::size_t> aug_b;

  std::size_t size() const noexcept { return indices.size(); }
};

enum class SamplingMode { with_replacement, epoch_shuffle };

/// One batch draw. With `epoch_shuffle` the indices are a uniformly random
/// subset of size B (no repeats); `with_replacement` draws them i.i.d.
MiniBatch sample_minibatch(const Dataset& ds, const AugmentationFamily& fam, std::size_t batch_size,
                           Rng& rng, SamplingMode mode);

/// Stateful batch stream used by the training loops. In epoch_shuffle mode each
/// epoch is a fresh permutation cut into floor(n / B) batches; a trailing
/// remainder is dropped, so every index appears exactly once per epoch whenever
/// B divides n.
class BatchSampler {
 public:
  BatchSampler(std::size_t n, std::size_t num_augmentations, std::size_t batch_size,
               SamplingMode mode, std::uint64_t seed);

  MiniBatch next();

  std::size_t batch_size() const noexcept { return batch_size_; }
  SamplingMode mode() const noexcept { return mode_; }

 private:
  void reshuffle();

  std::size_t n_;
  std::size_t num_aug_;
  std::size_t batch_size_;
  SamplingMode mode_;
  Rng rng_;
  std::vector<std::size_t> perm_;
  std::size_t cursor_ = 0;
};

}  // namespace sogclr
