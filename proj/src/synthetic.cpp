#include "sogclr/synthetic.hpp"

#include "sogclr/errors.hpp"

namespace sogclr {

namespace {

void check_sizes(std::size_t n, std::size_t dim, std::size_t clusters, double separation) {
  if (clusters < 1) fail(ErrorKind::invalid_argument, "clusters must be >= 1");
  if (n < clusters) fail(ErrorKind::invalid_argument, "n must be >= clusters");
  if (n < 2) fail(ErrorKind::invalid_argument, "n must be >= 2");
  if (dim < 1) fail(ErrorKind::invalid_argument, "input dimension must be >= 1");
  if (!(separation >= 0.0)) fail(ErrorKind::invalid_argument, "separation must be >= 0");
}

Vector sphere_point(std::size_t dim, double radius, Rng& rng, std::normal_distribution<double>& normal) {
  Vector c(static_cast<Eigen::Index>(dim));
  for (auto& x : c) x = normal(rng);
  if (radius == 0.0) return Vector::Zero(c.size());
  const double norm = c.norm();
  if (norm == 0.0) {
    c.setZero();
    c[0] = radius;
    return c;
  }
  return c * (radius / norm);
}

Vector noisy(const Vector& center, Rng& rng, std::normal_distribution<double>& normal) {
  Vector x = center;
  for (auto& v : x) v += normal(rng);
  return x;
}

}  // namespace

Dataset generate_synthetic(std::size_t n, std::size_t input_dim, std::size_t clusters, double separation,
                           std::uint64_t seed) {
  check_sizes(n, input_dim, clusters, separation);
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Vector> centers;
  for (std::size_t c = 0; c < clusters; ++c) centers.push_back(sphere_point(input_dim, separation, rng, normal));
  std::vector<Vector> points;
  std::vector<int> labels;
  for (std::size_t i = 0; i < n; ++i) {
    const auto c = i % clusters;
    points.push_back(noisy(centers[c], rng, normal));
    labels.push_back(static_cast<int>(c));
  }
  return Dataset(std::move(points), std::move(labels));
}

PairedDataset generate_paired_synthetic(std::size_t n, std::size_t image_dim, std::size_t text_dim,
                                        std::size_t clusters, double separation, std::uint64_t seed) {
  check_sizes(n, image_dim, clusters, separation);
  check_sizes(n, text_dim, clusters, separation);
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Vector> image_centers;
  std::vector<Vector> text_centers;
  for (std::size_t c = 0; c < clusters; ++c) {
    image_centers.push_back(sphere_point(image_dim, separation, rng, normal));
    text_centers.push_back(sphere_point(text_dim, separation, rng, normal));
  }
  std::vector<Vector> image;
  std::vector<Vector> text;
  for (std::size_t i = 0; i < n; ++i) {
    const auto c = i % clusters;
    image.push_back(noisy(image_centers[c], rng, normal));
    text.push_back(noisy(text_centers[c], rng, normal));
  }
  return PairedDataset(std::move(image), std::move(text));
}

}  // namespace sogclr
