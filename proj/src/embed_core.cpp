#include "sogclr/embed_core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "sogclr/errors.hpp"
#include "sogclr/text_io.hpp"

namespace sogclr {

Vector l2_normalize(const Vector& v) {
  const double norm = v.norm();
  if (!(norm >= 1e-30)) fail(ErrorKind::degenerate_input, "cannot normalize a zero vector");
  return v / norm;
}

double cosine_sim(const Vector& u, const Vector& v) {
  if (u.size() != v.size()) {
    fail(ErrorKind::invalid_argument, "cosine_sim: dimension mismatch (" + std::to_string(u.size()) +
                                          " vs " + std::to_string(v.size()) + ")");
  }
  return std::clamp(u.dot(v), -1.0, 1.0);
}

Dataset::Dataset(std::vector<Vector> points, std::vector<int> labels)
    : points_(std::move(points)), labels_(std::move(labels)) {
  if (points_.size() < 2) fail(ErrorKind::invalid_argument, "dataset needs at least 2 points");
  const auto dim = points_.front().size();
  if (dim == 0) fail(ErrorKind::invalid_argument, "dataset points must be non-empty");
  for (const auto& p : points_) {
    if (p.size() != dim) fail(ErrorKind::invalid_argument, "dataset points differ in dimension");
    if (!p.allFinite()) fail(ErrorKind::invalid_argument, "dataset contains non-finite entries");
  }
  if (!labels_.empty() && labels_.size() != points_.size()) {
    fail(ErrorKind::invalid_argument, "label count does not match point count");
  }
}

Dataset read_dataset_csv(const std::filesystem::path& path, bool labelled) {
  std::vector<Vector> points;
  std::vector<int> labels;
  std::size_t line_no = 0;
  for (const auto& raw : text::read_lines(path)) {
    ++line_no;
    const auto line = text::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    auto fields = text::split(line, ',');
    if (labelled) {
      if (fields.size() < 2) {
        fail(ErrorKind::io, path.string() + ":" + std::to_string(line_no) + ": missing label column");
      }
      labels.push_back(static_cast<int>(text::parse_int(fields.back())));
      fields.pop_back();
    }
    Vector p(static_cast<Eigen::Index>(fields.size()));
    try {
      for (std::size_t c = 0; c < fields.size(); ++c) p[static_cast<Eigen::Index>(c)] = text::parse_double(fields[c]);
    } catch (const Error& e) {
      fail(ErrorKind::io, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    points.push_back(std::move(p));
  }
  return Dataset(std::move(points), std::move(labels));
}

void write_dataset_csv(const Dataset& ds, const std::filesystem::path& path) {
  std::string out;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& p = ds[i];
    for (Eigen::Index c = 0; c < p.size(); ++c) {
      if (c > 0) out += ',';
      out += text::format_double(p[c]);
    }
    if (ds.labelled()) {
      out += ',';
      out += std::to_string(ds.labels()[i]);
    }
    out += '\n';
  }
  text::write_file(path, out);
}

AugmentationFamily::AugmentationFamily(std::vector<Vector> deltas, std::uint64_t seed)
    : deltas_(std::move(deltas)), seed_(seed) {
  if (deltas_.empty()) fail(ErrorKind::invalid_argument, "augmentation family is empty");
  const auto dim = deltas_.front().size();
  for (const auto& d : deltas_) {
    if (d.size() != dim) fail(ErrorKind::invalid_argument, "augmentation deltas differ in dimension");
    if (!d.allFinite()) fail(ErrorKind::invalid_argument, "augmentation delta is not finite");
  }
}

AugmentationFamily AugmentationFamily::gaussian(std::size_t count, std::size_t input_dim, double scale,
                                                std::uint64_t seed) {
  if (count == 0 || input_dim == 0) fail(ErrorKind::invalid_argument, "augmentation family needs K >= 1");
  if (!(scale >= 0.0)) fail(ErrorKind::invalid_argument, "augmentation scale must be >= 0");
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Vector> deltas;
  deltas.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    Vector d(static_cast<Eigen::Index>(input_dim));
    for (auto& v : d) v = scale * normal(rng);
    deltas.push_back(std::move(d));
  }
  return AugmentationFamily(std::move(deltas), seed);
}

const Vector& AugmentationFamily::delta(std::size_t k) const {
  if (k >= deltas_.size()) {
    fail(ErrorKind::invalid_argument, "augmentation index " + std::to_string(k) + " out of range [0, " +
                                          std::to_string(deltas_.size()) + ")");
  }
  return deltas_[k];
}

Vector AugmentationFamily::apply(std::size_t k, const Vector& x) const {
  const auto& d = delta(k);
  if (d.size() != x.size()) fail(ErrorKind::invalid_argument, "augmentation/input dimension mismatch");
  return x + d;
}

Vector apply_augmentation(const AugmentationFamily& fam, std::size_t k, const Vector& x) {
  return fam.apply(k, x);
}

NegativeSet::NegativeSet(std::size_t owner, std::size_t n, std::size_t K) : owner_(owner), n_(n), K_(K) {
  if (n < 2 || K == 0) fail(ErrorKind::invalid_argument, "negative set needs n >= 2 and K >= 1");
  if (owner >= n) fail(ErrorKind::invalid_argument, "negative set owner out of range");
}

NegativeSet::iterator NegativeSet::begin() const { return {this, owner_ == 0 ? std::size_t{1} : std::size_t{0}, 0}; }

NegativeSet::iterator& NegativeSet::iterator::operator++() {
  if (++k_ == set_->K_) {
    k_ = 0;
    ++j_;
    if (j_ == set_->owner_) ++j_;
    if (j_ > set_->n_) j_ = set_->n_;
  }
  return *this;
}

namespace {

void check_batch_size(std::size_t n, std::size_t batch_size, SamplingMode mode) {
  if (batch_size < 2) fail(ErrorKind::invalid_argument, "batch size must be >= 2 (no in-batch negatives)");
  if (mode == SamplingMode::epoch_shuffle && batch_size > n) {
    fail(ErrorKind::invalid_argument, "batch size " + std::to_string(batch_size) +
                                          " exceeds dataset size " + std::to_string(n));
  }
}

void draw_augmentations(MiniBatch& batch, std::size_t K, Rng& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, K - 1);
  batch.aug_a.resize(batch.indices.size());
  batch.aug_b.resize(batch.indices.size());
  for (std::size_t p = 0; p < batch.indices.size(); ++p) {
    batch.aug_a[p] = pick(rng);
    batch.aug_b[p] = pick(rng);
  }
}

}  // namespace

MiniBatch sample_minibatch(const Dataset& ds, const AugmentationFamily& fam, std::size_t batch_size,
                           Rng& rng, SamplingMode mode) {
  const auto n = ds.size();
  check_batch_size(n, batch_size, mode);
  MiniBatch batch;
  if (mode == SamplingMode::with_replacement) {
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    batch.indices.resize(batch_size);
    for (auto& i : batch.indices) i = pick(rng);
  } else {
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    batch.indices.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(batch_size));
  }
  draw_augmentations(batch, fam.size(), rng);
  return batch;
}

BatchSampler::BatchSampler(std::size_t n, std::size_t num_augmentations, std::size_t batch_size,
                           SamplingMode mode, std::uint64_t seed)
    : n_(n), num_aug_(num_augmentations), batch_size_(batch_size), mode_(mode), rng_(seed) {
  if (num_aug_ == 0) fail(ErrorKind::invalid_argument, "sampler needs K >= 1");
  check_batch_size(n, batch_size, mode);
  perm_.resize(n_);
  cursor_ = n_;
}

void BatchSampler::reshuffle() {
  std::iota(perm_.begin(), perm_.end(), std::size_t{0});
  std::shuffle(perm_.begin(), perm_.end(), rng_);
  cursor_ = 0;
}

MiniBatch BatchSampler::next() {
  MiniBatch batch;
  if (mode_ == SamplingMode::with_replacement) {
    std::uniform_int_distribution<std::size_t> pick(0, n_ - 1);
    batch.indices.resize(batch_size_);
    for (auto& i : batch.indices) i = pick(rng_);
  } else {
    if (cursor_ + batch_size_ > n_) reshuffle();
    batch.indices.assign(perm_.begin() + static_cast<std::ptrdiff_t>(cursor_),
                         perm_.begin() + static_cast<std::ptrdiff_t>(cursor_ + batch_size_));
    cursor_ += batch_size_;
  }
  draw_augmentations(batch, num_aug_, rng_);
  return batch;
}

}  // namespace sogclr
