#pragma once

#include <cstddef>
#include <cstdint>

#include "sogclr/bimodal.hpp"
#include "sogclr/embed_core.hpp"

namespace sogclr {

/// Cluster centers drawn uniformly on a sphere of radius `separation`; point i
/// belongs to cluster i mod clusters and equals its center plus N(0, I) noise.
Dataset generate_synthetic(std::size_t n, std::size_t input_dim, std::size_t clusters, double separation,
                           std::uint64_t seed);

/// Paired variant: each cluster has one center per side; pair i draws its image
/// and text points around the centers of cluster i mod clusters.
PairedDataset generate_paired_synthetic(std::size_t n, std::size_t image_dim, std::size_t text_dim,
                                        std::size_t clusters, double separation, std::uint64_t seed);

}  // namespace sogclr
