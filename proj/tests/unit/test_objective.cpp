#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "helpers.hpp"
#include "sogclr/errors.hpp"
#include "sogclr/objective.hpp"

using namespace sogclr;
using testing::vec;

namespace {

struct Instance {
  Dataset ds;
  AugmentationFamily fam;
  EncoderParams params;
};

Instance seeded(std::size_t n, std::size_t K, std::uint64_t seed, Architecture arch = Architecture::linear) {
  return {testing::random_dataset(n, 3, seed), AugmentationFamily::gaussian(K, 3, 0.4, seed + 100),
          EncoderParams::random(arch, 3, 4, 2, seed + 200)};
}

// All views embed to the same unit vector.
Instance identical(std::size_t n, std::size_t K) {
  return {testing::identical_dataset(n, vec({0.3, -0.7, 1.1})), testing::zero_family(K, 3),
          EncoderParams::random(Architecture::linear, 3, 0, 2, 5)};
}

Vector view(const Instance& in, std::size_t i, std::size_t k) {
  return encode(in.params, apply_augmentation(in.fam, k, in.ds[i]));
}

double brute_g(const Instance& in, double tau, std::size_t i, std::size_t k) {
  const Vector anchor = view(in, i, k);
  double acc = 0.0;
  for (std::size_t j = 0; j < in.ds.size(); ++j) {
    if (j == i) continue;
    for (std::size_t kz = 0; kz < in.fam.size(); ++kz) acc += std::exp(anchor.dot(view(in, j, kz)) / tau);
  }
  return acc / static_cast<double>((in.ds.size() - 1) * in.fam.size());
}

double brute_F(const Instance& in, const GlobalObjectiveConfig& cfg) {
  const auto n = in.ds.size();
  const auto K = in.fam.size();
  double pos = 0.0;
  double neg = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t a = 0; a < K; ++a)
      for (std::size_t b = 0; b < K; ++b) pos += view(in, i, a).dot(view(in, i, b));
    double mean_g = 0.0;
    double mean_f = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      const double g = brute_g(in, cfg.tau, i, k);
      mean_g += g / static_cast<double>(K);
      mean_f += cfg.tau * std::log(cfg.eps0 + g) / static_cast<double>(K);
    }
    neg += cfg.version == ObjectiveVersion::v1 ? mean_f : cfg.tau * std::log(cfg.eps0 + mean_g);
  }
  return -pos / static_cast<double>(n * K * K) + neg / static_cast<double>(n);
}

MiniBatch batch_of(std::vector<std::size_t> idx, std::vector<std::size_t> a, std::vector<std::size_t> b) {
  return MiniBatch{std::move(idx), std::move(a), std::move(b)};
}

}  // namespace

TEST_CASE("g_minibatch") {
  GlobalObjectiveConfig cfg;
  cfg.tau = 0.1;
  const auto same = identical(4, 2);
  const auto batch = testing::full_batch(4);
  CHECK(g_minibatch(same.params, cfg, same.ds, same.fam, 0, 1, batch) == doctest::Approx(std::exp(10.0)).epsilon(1e-12));

  const Instance ortho{testing::basis_dataset(3), testing::zero_family(1, 3), EncoderParams::linear(Matrix::Identity(3, 3))};
  CHECK(g_minibatch(ortho.params, cfg, ortho.ds, ortho.fam, 1, 0, testing::full_batch(3)) == doctest::Approx(1.0));

  CHECK_THROWS_AS(g_minibatch(same.params, cfg, same.ds, same.fam, 2, 0, batch_of({2, 2}, {0, 1}, {1, 0})), Error);

  SUBCASE("mean over resampled batches approaches g_exact") {
    const auto in = seeded(6, 2, 31);
    cfg.tau = 0.5;
    const double exact = g_exact(in.params, cfg, in.ds, in.fam, 0, 1);
    Rng rng(77);
    double sum = 0.0, sum_sq = 0.0;
    int draws = 0;
    while (draws < 20000) {
      const auto b = sample_minibatch(in.ds, in.fam, 3, rng, SamplingMode::with_replacement);
      if (std::all_of(b.indices.begin(), b.indices.end(), [](auto i) { return i == 0; })) continue;
      const double g = g_minibatch(in.params, cfg, in.ds, in.fam, 0, 1, b);
      sum += g;
      sum_sq += g * g;
      ++draws;
    }
    const double mean = sum / draws;
    const double se = std::sqrt((sum_sq / draws - mean * mean) / draws);
    CHECK(std::abs(mean - exact) <= 3.0 * se);
  }
}

TEST_CASE("g_exact") {
  GlobalObjectiveConfig cfg;
  cfg.tau = 0.1;
  const auto same = identical(3, 2);
  CHECK(g_exact(same.params, cfg, same.ds, same.fam, 1, 0) == doctest::Approx(std::exp(10.0)).epsilon(1e-12));

  const Instance ortho{testing::basis_dataset(2), testing::zero_family(1, 2), EncoderParams::linear(Matrix::Identity(2, 2))};
  CHECK(g_exact(ortho.params, cfg, ortho.ds, ortho.fam, 0, 0) == doctest::Approx(1.0));

  const auto in = seeded(5, 3, 8);
  cfg.tau = 0.3;
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t k = 0; k < 3; ++k)
      CHECK(g_exact(in.params, cfg, in.ds, in.fam, i, k) == doctest::Approx(brute_g(in, cfg.tau, i, k)).epsilon(1e-13));
}

TEST_CASE("local_loss") {
  GlobalObjectiveConfig cfg;
  cfg.tau = 0.2;
  const auto same = identical(3, 1);
  CHECK(local_loss(same.params, cfg, same.ds, same.fam, 0, 0, 0, testing::full_batch(2)) == doctest::Approx(std::log(2.0)));
  CHECK(local_loss(same.params, cfg, same.ds, same.fam, 0, 0, 0, testing::full_batch(3)) == doctest::Approx(std::log(4.0)));

  const auto in = seeded(6, 3, 12);
  const auto b = batch_of({4, 1, 0, 3}, {0, 2, 1, 1}, {2, 2, 0, 1});
  for (std::size_t p = 0; p < b.size(); ++p) {
    const auto i = b.indices[p];
    std::vector<double> logits;
    for (std::size_t q = 0; q < b.size(); ++q) {
      if (b.indices[q] == i) continue;
      logits.push_back(view(in, i, b.aug_a[p]).dot(view(in, b.indices[q], b.aug_a[q])) / cfg.tau);
      logits.push_back(view(in, i, b.aug_a[p]).dot(view(in, b.indices[q], b.aug_b[q])) / cfg.tau);
    }
    const double top = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (double l : logits) z += std::exp(l - top);
    const double pos = view(in, i, b.aug_a[p]).dot(view(in, i, b.aug_b[p])) / cfg.tau;
    const double expect = top + std::log(z) - pos;
    CHECK(local_loss(in.params, cfg, in.ds, in.fam, i, b.aug_a[p], b.aug_b[p], b) == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("global losses") {
  GlobalObjectiveConfig cfg;
  cfg.tau = 0.1;
  const auto same = identical(4, 2);
  CHECK(std::abs(global_loss_v1(same.params, cfg, same.ds, same.fam, 0, 0, 1)) <= 1e-12);
  CHECK(std::abs(global_loss_v2(same.params, cfg, same.ds, same.fam, 0, 0, 1)) <= 1e-12);

  // Orthogonal negatives, identical positive pair: -1 + tau ln 1.
  const Instance ortho{testing::basis_dataset(4), testing::zero_family(2, 4),
                       EncoderParams::linear(Matrix::Identity(4, 4))};
  CHECK(std::abs(global_loss_v1(ortho.params, cfg, ortho.ds, ortho.fam, 0, 0, 1) - (-1.0)) <= 1e-12);

  const auto in = seeded(5, 3, 21);
  cfg.eps0 = 1e-8;
  cfg.tau = 0.25;
  for (std::size_t i = 0; i < 5; ++i) {
    const double direct = -view(in, i, 0).dot(view(in, i, 2)) + cfg.tau * std::log(cfg.eps0 + brute_g(in, cfg.tau, i, 0));
    CHECK(global_loss_v1(in.params, cfg, in.ds, in.fam, i, 0, 2) == doctest::Approx(direct).epsilon(1e-12));
  }

  SUBCASE("K = 1 makes the versions agree") {
    const auto one = seeded(5, 1, 4);
    for (std::size_t i = 0; i < 5; ++i)
      CHECK(global_loss_v1(one.params, cfg, one.ds, one.fam, i, 0, 0) == global_loss_v2(one.params, cfg, one.ds, one.fam, i, 0, 0));
  }
  SUBCASE("Jensen per sample") {
    cfg.eps0 = 0.0;
    const auto r = oracle_F(in.params, cfg, in.ds, in.fam);
    for (Eigen::Index i = 0; i < r.per_sample_g.rows(); ++i) {
      double mean_f = 0.0;
      for (Eigen::Index k = 0; k < r.per_sample_g.cols(); ++k) mean_f += cfg.tau * std::log(r.per_sample_g(i, k)) / 3.0;
      CHECK(mean_f <= cfg.tau * std::log(r.per_sample_g.row(i).mean()) + 1e-15);
    }
    cfg.version = ObjectiveVersion::v2;
    const double v2 = oracle_value(in.params, cfg, in.ds, in.fam);
    cfg.version = ObjectiveVersion::v1;
    CHECK(oracle_value(in.params, cfg, in.ds, in.fam) <= v2);
  }
}

TEST_CASE("oracle_F") {
  GlobalObjectiveConfig cfg;
  cfg.tau = 0.1;

  SUBCASE("identical embeddings") {
    const auto same = identical(4, 2);
    const auto r = oracle_F(same.params, cfg, same.ds, same.fam);
    CHECK(std::abs(r.value) <= 1e-12);
    const auto fd = finite_diff_grad([&](const EncoderParams& w) { return oracle_value(w, cfg, same.ds, same.fam); },
                                     same.params, 1e-5);
    CHECK(r.grad.norm() <= 1e-9);
    CHECK(fd.norm() <= 1e-8);
  }
  SUBCASE("two orthogonal samples") {
    const Instance ortho{testing::basis_dataset(2), testing::zero_family(1, 2), EncoderParams::linear(Matrix::Identity(2, 2))};
    CHECK(oracle_F(ortho.params, cfg, ortho.ds, ortho.fam).value == doctest::Approx(-1.0).epsilon(1e-14));
  }
  SUBCASE("seeded instances against brute force and finite differences") {
    for (auto version : {ObjectiveVersion::v1, ObjectiveVersion::v2}) {
      for (std::uint64_t seed : {1u, 2u, 3u}) {
        const auto in = seeded(5, 3, seed, seed == 2 ? Architecture::one_hidden : Architecture::linear);
        cfg.version = version;
        cfg.tau = 0.3;
        cfg.eps0 = seed == 3 ? 0.01 : 0.0;
        const auto r = oracle_F(in.params, cfg, in.ds, in.fam);
        CHECK(r.value == doctest::Approx(brute_F(in, cfg)).epsilon(1e-12));
        CHECK(r.value == oracle_value(in.params, cfg, in.ds, in.fam));
        const auto fd = finite_diff_grad([&](const EncoderParams& w) { return oracle_value(w, cfg, in.ds, in.fam); },
                                         in.params, 1e-5);
        CHECK(relative_error(r.grad, fd) <= 1e-5);
        for (std::size_t i = 0; i < 5; ++i)
          CHECK(r.per_sample_g(static_cast<Eigen::Index>(i), 1) == doctest::Approx(brute_g(in, cfg.tau, i, 1)).epsilon(1e-13));
      }
    }
  }
  SUBCASE("size guard") {
    const auto big = Instance{testing::random_dataset(5001, 1, 1), testing::zero_family(2, 1),
                              EncoderParams::linear(Matrix::Ones(2, 1))};
    try {
      oracle_F(big.params, cfg, big.ds, big.fam);
      FAIL("guard not enforced");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::size_limit);
    }
  }
  SUBCASE("json round trip") {
    const auto in = seeded(4, 2, 9);
    const auto r = oracle_F(in.params, cfg, in.ds, in.fam);
    const auto back = oracle_result_from_json(to_json(r));
    CHECK(back.value == r.value);
    CHECK(back.grad == r.grad);
    CHECK(back.per_sample_g == r.per_sample_g);
  }
}

TEST_CASE("config validation") {
  GlobalObjectiveConfig cfg;
  cfg.tau = 0.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg.tau = 0.1;
  cfg.eps0 = -1.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  CHECK(parse_objective_version("v2") == ObjectiveVersion::v2);
  CHECK_THROWS_AS(parse_objective_version("v3"), Error);
}

TEST_CASE("aug_consistency_eps") {
  const auto p = EncoderParams::random(Architecture::linear, 3, 0, 2, 1);
  const auto ds = testing::random_dataset(5, 3, 2);
  const AugmentationFamily equal({vec({0.1, 0.2, 0.3}), vec({0.1, 0.2, 0.3}), vec({0.1, 0.2, 0.3})}, 0);
  CHECK(aug_consistency_eps(p, ds, equal, 0) == 0.0);
  CHECK(aug_consistency_eps(p, ds, AugmentationFamily::gaussian(1, 3, 1.0, 4), 2) == 0.0);

  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto in = seeded(5, 3, seed);
    const auto all = aug_consistency_eps_all(in.params, in.ds, in.fam);
    for (std::size_t i = 0; i < 5; ++i) {
      double acc = 0.0;
      for (std::size_t a = 0; a < 3; ++a)
        for (std::size_t b = 0; b < 3; ++b)
          for (std::size_t j = 0; j < 5; ++j) {
            if (j == i) continue;
            for (std::size_t kz = 0; kz < 3; ++kz) {
              const Vector z = view(in, j, kz);
              const double d = view(in, i, a).dot(z) - view(in, i, b).dot(z);
              acc += d * d;
            }
          }
      const double brute = acc / static_cast<double>(3 * 3 * 4 * 3);
      CHECK(aug_consistency_eps(in.params, in.ds, in.fam, i) == brute);
      CHECK(all[static_cast<Eigen::Index>(i)] == brute);
      CHECK(brute > 0.0);
    }
  }
}
