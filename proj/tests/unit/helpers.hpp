#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "sogclr/embed_core.hpp"
#include "sogclr/encoder.hpp"

namespace testing {

using sogclr::Vector;

inline Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

inline sogclr::Dataset random_dataset(std::size_t n, std::size_t d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::vector<Vector> pts;
  for (std::size_t i = 0; i < n; ++i) {
    Vector x(static_cast<Eigen::Index>(d));
    for (auto& v : x) v = g(rng);
    pts.push_back(x);
  }
  return sogclr::Dataset(pts);
}

inline sogclr::AugmentationFamily zero_family(std::size_t K, std::size_t d) {
  return sogclr::AugmentationFamily(std::vector<Vector>(K, Vector::Zero(static_cast<Eigen::Index>(d))), 0);
}

// n copies of one point: every embedding is identical.
inline sogclr::Dataset identical_dataset(std::size_t n, const Vector& x) {
  return sogclr::Dataset(std::vector<Vector>(n, x));
}

// Standard basis points; with an identity encoder the embeddings are orthogonal.
inline sogclr::Dataset basis_dataset(std::size_t n) {
  std::vector<Vector> pts;
  for (std::size_t i = 0; i < n; ++i) pts.push_back(Vector::Unit(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(i)));
  return sogclr::Dataset(pts);
}

inline sogclr::MiniBatch full_batch(std::size_t n, std::size_t aug_a = 0, std::size_t aug_b = 0) {
  sogclr::MiniBatch b;
  for (std::size_t i = 0; i < n; ++i) {
    b.indices.push_back(i);
    b.aug_a.push_back(aug_a);
    b.aug_b.push_back(aug_b);
  }
  return b;
}

inline std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("sogclr_test_" + name);
}

}  // namespace testing
