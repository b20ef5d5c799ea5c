#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "sogclr/errors.hpp"
#include "sogclr/optimizers.hpp"
#include "sogclr/synthetic.hpp"

using namespace sogclr;
using testing::vec;

namespace {

struct Instance {
  Dataset ds;
  AugmentationFamily fam;
  EncoderParams params;
};

Instance seeded(std::size_t n, std::size_t K, std::uint64_t seed) {
  return {testing::random_dataset(n, 3, seed), AugmentationFamily::gaussian(K, 3, 0.4, seed + 100),
          EncoderParams::random(Architecture::linear, 3, 0, 2, seed + 200)};
}

Instance identical(std::size_t n, std::size_t K) {
  Matrix w(2, 3);
  w << 1, 0, 0, 0, 1, 0;  // orthonormal rows
  return {testing::identical_dataset(n, vec({0.3, -0.7, 1.1})), testing::zero_family(K, 3), EncoderParams::linear(w)};
}

GlobalObjectiveConfig config(double tau, ObjectiveVersion v = ObjectiveVersion::v1) {
  GlobalObjectiveConfig cfg;
  cfg.tau = tau;
  cfg.version = v;
  return cfg;
}

Vector v2_grad(const Instance& in, double tau) {
  return oracle_F(in.params, config(tau, ObjectiveVersion::v2), in.ds, in.fam).grad;
}

}  // namespace

TEST_CASE("simclr_estimator") {
  SUBCASE("full batch with one augmentation is the oracle gradient") {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
      const auto in = seeded(6, 1, seed);
      const auto cfg = config(0.3);
      const auto m = simclr_estimator(in.params, cfg, in.ds, in.fam, testing::full_batch(6));
      CHECK(relative_error(m, oracle_F(in.params, cfg, in.ds, in.fam).grad) <= 1e-10);
    }
  }
  SUBCASE("constant landscape") {
    const auto in = identical(4, 2);
    CHECK(simclr_estimator(in.params, config(0.1), in.ds, in.fam, testing::full_batch(4)).norm() <= 1e-12);
  }
  SUBCASE("gradient of the symmetrized local loss") {
    const auto in = seeded(6, 3, 5);
    const auto cfg = config(0.4);
    const MiniBatch b{{3, 0, 5, 0}, {1, 2, 0, 0}, {2, 2, 1, 1}};
    // tau/2 (L(A, A') + L(A', A)) per position; the summed normalizer only adds a constant.
    const auto loss = [&](const EncoderParams& w) {
      double acc = 0.0;
      for (std::size_t p = 0; p < b.size(); ++p) {
        acc += local_loss(w, cfg, in.ds, in.fam, b.indices[p], b.aug_a[p], b.aug_b[p], b);
        acc += local_loss(w, cfg, in.ds, in.fam, b.indices[p], b.aug_b[p], b.aug_a[p], b);
      }
      return cfg.tau * acc / (2.0 * static_cast<double>(b.size()));
    };
    const auto m = simclr_estimator(in.params, cfg, in.ds, in.fam, b);
    CHECK(relative_error(m, finite_diff_grad(loss, in.params, 1e-5)) <= 1e-5);
    const auto own = [&](const EncoderParams& w) { return simclr_batch_loss(w, cfg, in.ds, in.fam, b); };
    CHECK(relative_error(m, finite_diff_grad(own, in.params, 1e-5)) <= 1e-5);
  }
}

TEST_CASE("momentum arithmetic") {
  auto params = EncoderParams::linear(Matrix::Constant(2, 2, 1.0));
  Gradient v = Vector::Zero(4);
  AdamMoments adam;
  apply_step(params, v, adam, StepRule::momentum, 0.1, 1.0, Vector::Ones(4));
  CHECK((params.flatten() - Vector::Constant(4, 0.9)).norm() <= 1e-15);

  const Vector g = vec({1, -2, 0.5, 4});
  v.setZero();
  apply_step(params, v, adam, StepRule::momentum, 0.1, 0.5, g);
  apply_step(params, v, adam, StepRule::momentum, 0.1, 0.5, g);
  CHECK((v - 0.75 * g).norm() <= 1e-15);
}

TEST_CASE("adam-style step") {
  Gradient v = Vector::Zero(3);
  AdamMoments adam;
  const Vector m = vec({0.5, -2, 1e-3});
  const Vector step = step_update(v, adam, StepRule::adam_style, 0.01, 0.9, m);
  for (Eigen::Index j = 0; j < 3; ++j) CHECK(step[j] == doctest::Approx(0.01 * m[j] / (std::abs(m[j]) + 1e-8)).epsilon(1e-12));
  CHECK(adam.t == 1);
}

TEST_CASE("non-finite estimator aborts before mutation") {
  auto params = EncoderParams::linear(Matrix::Constant(2, 2, 1.0));
  const Vector before = params.flatten();
  Gradient v = vec({1, 2, 3, 4});
  AdamMoments adam;
  try {
    apply_step(params, v, adam, StepRule::momentum, 0.1, 0.9, vec({1, NAN, 0, 0}));
    FAIL("non-finite estimator accepted");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::numeric);
  }
  CHECK(params.flatten() == before);
  CHECK(v == vec({1, 2, 3, 4}));
}

TEST_CASE("simclr_step") {
  const auto in = identical(4, 2);
  auto params = in.params;
  auto state = SimclrState::make(params.size(), 0.1, 0.9);
  Rng rng(1);
  for (int t = 0; t < 20; ++t) {
    simclr_step(state, params, config(0.1), in.ds, in.fam, sample_minibatch(in.ds, in.fam, 2, rng, SamplingMode::epoch_shuffle));
  }
  CHECK((params.flatten() - in.params.flatten()).norm() <= 1e-12);
  CHECK_THROWS_AS(SimclrState::make(3, 0.1).validate(4), Error);
}

TEST_CASE("sogclr_update_u") {
  const auto in = seeded(6, 3, 7);
  const auto cfg = config(0.5);
  const MiniBatch b{{4, 1, 2}, {0, 2, 1}, {1, 1, 2}};

  SUBCASE("gamma = 1 stores the batch estimate") {
    auto state = SogclrState::make(6, in.params.size(), 0.1, 1.0);
    state.u.setConstant(3.0);
    sogclr_update_u(state, in.params, cfg, in.ds, in.fam, b);
    for (std::size_t p = 0; p < 3; ++p) {
      const auto i = b.indices[p];
      const double expect = (g_minibatch(in.params, cfg, in.ds, in.fam, i, b.aug_a[p], b) +
                             g_minibatch(in.params, cfg, in.ds, in.fam, i, b.aug_b[p], b)) / 2.0;
      CHECK(state.u[static_cast<Eigen::Index>(i)] == doctest::Approx(expect).epsilon(1e-14));
    }
    CHECK(state.u[0] == 3.0);
    CHECK(state.u[3] == 3.0);
    CHECK(state.u[5] == 3.0);
  }
  SUBCASE("gamma = 0.8 from zero with estimate 5") {
    const auto same = identical(3, 1);
    auto state = SogclrState::make(3, same.params.size(), 0.1, 0.8);
    sogclr_update_u(state, same.params, config(1.0 / std::log(5.0)), same.ds, same.fam, testing::full_batch(3));
    for (Eigen::Index i = 0; i < 3; ++i) CHECK(state.u[i] == doctest::Approx(4.0).epsilon(1e-12));
  }
  SUBCASE("geometric approach to the exact statistic") {
    const auto one = seeded(5, 1, 3);
    const double gamma = 0.3;
    auto state = SogclrState::make(5, one.params.size(), 0.1, gamma);
    const auto target = oracle_F(one.params, cfg, one.ds, one.fam).per_sample_g;
    for (int t = 1; t <= 30; ++t) {
      sogclr_update_u(state, one.params, cfg, one.ds, one.fam, testing::full_batch(5));
      for (Eigen::Index i = 0; i < 5; ++i) {
        const double gap = target(i, 0) - state.u[i];
        CHECK(gap == doctest::Approx(std::pow(1.0 - gamma, t) * target(i, 0)).epsilon(1e-9));
      }
    }
  }
}

TEST_CASE("sogclr_estimator") {
  SUBCASE("full batch, one augmentation, gamma = 1 gives the V2 oracle gradient") {
    for (std::uint64_t seed : {1u, 2u}) {
      const auto in = seeded(5, 1, seed);
      auto state = SogclrState::make(5, in.params.size(), 0.1, 1.0);
      const auto cfg = config(0.3);
      sogclr_update_u(state, in.params, cfg, in.ds, in.fam, testing::full_batch(5));
      const auto m = sogclr_estimator(state, in.params, cfg, in.ds, in.fam, testing::full_batch(5));
      CHECK(relative_error(m, v2_grad(in, 0.3)) <= 1e-10);
    }
  }
  SUBCASE("planted u, every augmentation assignment enumerated") {
    const std::size_t n = 3, K = 2;
    const auto in = seeded(n, K, 11);
    const auto cfg = config(0.4);
    auto state = SogclrState::make(n, in.params.size(), 0.1);
    state.u = oracle_F(in.params, cfg, in.ds, in.fam).per_sample_g.rowwise().mean();
    Gradient mean = Vector::Zero(static_cast<Eigen::Index>(in.params.size()));
    std::size_t configs = 1;
    for (std::size_t p = 0; p < 2 * n; ++p) configs *= K;
    for (std::size_t code = 0; code < configs; ++code) {
      MiniBatch b = testing::full_batch(n);
      std::size_t c = code;
      for (std::size_t p = 0; p < n; ++p) {
        b.aug_a[p] = c % K;
        c /= K;
        b.aug_b[p] = c % K;
        c /= K;
      }
      mean += sogclr_estimator(state, in.params, cfg, in.ds, in.fam, b);
    }
    mean /= static_cast<double>(configs);
    CHECK(relative_error(mean, v2_grad(in, 0.4)) <= 1e-10);
  }
  SUBCASE("constant landscape") {
    const auto in = identical(4, 2);
    auto state = SogclrState::make(4, in.params.size(), 0.1);
    state.u.setConstant(std::exp(10.0));
    CHECK(sogclr_estimator(state, in.params, config(0.1), in.ds, in.fam, testing::full_batch(4)).norm() <= 1e-12);
  }
  SUBCASE("unset u is a state error") {
    const auto in = seeded(4, 2, 1);
    const auto state = SogclrState::make(4, in.params.size(), 0.1);
    try {
      sogclr_estimator(state, in.params, config(0.1), in.ds, in.fam, testing::full_batch(4));
      FAIL("u = 0 accepted");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::state);
    }
  }
}

TEST_CASE("sogclr_step") {
  SUBCASE("gamma = 1, beta = 1 reproduces simclr_step") {
    const auto in = seeded(8, 2, 4);
    const auto cfg = config(0.2);
    auto p_sim = in.params;
    auto p_sog = in.params;
    auto sim = SimclrState::make(in.params.size(), 0.3, 1.0);
    auto sog = SogclrState::make(8, in.params.size(), 0.3, 1.0, 1.0);
    Rng rng(3);
    for (int t = 0; t < 5; ++t) {
      const auto b = sample_minibatch(in.ds, in.fam, 4, rng, SamplingMode::epoch_shuffle);
      const Gradient m_sim = simclr_step(sim, p_sim, cfg, in.ds, in.fam, b);
      const auto report = sogclr_step(sog, p_sog, cfg, in.ds, in.fam, b);
      CHECK(report.estimator == m_sim);
      CHECK(p_sog.flatten() == p_sim.flatten());
    }
  }
  SUBCASE("zero estimator is a fixed point") {
    const auto in = identical(4, 2);
    auto params = in.params;
    auto state = SogclrState::make(4, params.size(), 0.5);
    Rng rng(2);
    for (int t = 0; t < 10; ++t) sogclr_step(state, params, config(0.1), in.ds, in.fam, sample_minibatch(in.ds, in.fam, 2, rng, SamplingMode::epoch_shuffle));
    CHECK((params.flatten() - in.params.flatten()).norm() <= 1e-12);
  }
  SUBCASE("lagged mode weights a first visit by its batch estimate") {
    const auto in = seeded(6, 2, 8);
    const auto cfg = config(0.3);
    const MiniBatch b{{0, 3, 5}, {1, 0, 1}, {0, 0, 1}};
    auto params = in.params;
    auto state = SogclrState::make(6, params.size(), 0.1, 0.5, 1.0, StepRule::momentum, ULag::lagged);
    const auto stats = batch_statistics(in.params, cfg, in.ds, in.fam, b);
    ViewWeights w;
    for (std::size_t p = 0; p < 3; ++p) {
      const double g = (stats.g_a[p] + stats.g_b[p]) / 2.0;
      w.view_a.push_back(cfg.tau / g);
      w.view_b.push_back(cfg.tau / g);
    }
    const auto report = sogclr_step(state, params, cfg, in.ds, in.fam, b);
    CHECK(relative_error(report.estimator, weighted_estimator(in.params, cfg, in.ds, in.fam, b, w)) <= 1e-14);
    CHECK(state.u[3] == doctest::Approx(0.5 * (stats.g_a[1] + stats.g_b[1]) / 2.0));

    // Second visit uses the stored u from before this step's update.
    const auto stored = state.u;
    const auto stats2 = batch_statistics(params, cfg, in.ds, in.fam, b);
    ViewWeights w2;
    for (auto i : b.indices) {
      w2.view_a.push_back(cfg.tau / stored[static_cast<Eigen::Index>(i)]);
      w2.view_b.push_back(cfg.tau / stored[static_cast<Eigen::Index>(i)]);
    }
    const auto expect = weighted_estimator(params, cfg, in.ds, in.fam, b, w2);
    const auto second = sogclr_step(state, params, cfg, in.ds, in.fam, b);
    CHECK(relative_error(second.estimator, expect) <= 1e-14);
    CHECK(state.u[0] == doctest::Approx(0.5 * stored[0] + 0.5 * (stats2.g_a[0] + stats2.g_b[0]) / 2.0));
  }
  SUBCASE("state validation") {
    const auto in = seeded(4, 2, 1);
    auto params = in.params;
    auto state = SogclrState::make(3, params.size(), 0.1);
    CHECK_THROWS_AS(sogclr_step(state, params, config(0.1), in.ds, in.fam, testing::full_batch(4)), Error);
  }
  SUBCASE("200 steps on two clusters") {
    const auto ds = generate_synthetic(32, 2, 2, 3.0, 5);
    const auto fam = AugmentationFamily::gaussian(2, 2, 0.3, 6);
    auto params = EncoderParams::random(Architecture::linear, 2, 0, 2, 7);
    const auto cfg = config(0.2, ObjectiveVersion::v2);
    auto state = SogclrState::make(32, params.size(), 1.0, 0.8, 0.9);
    BatchSampler sampler(32, 2, 8, SamplingMode::epoch_shuffle, 8);
    double first = 0.0;
    double last = 0.0;
    for (int t = 1; t <= 200; ++t) {
      sogclr_step(state, params, cfg, ds, fam, sampler.next());
      if (t == 1 || t % 10 == 0) {
        const double norm_sq = oracle_F(params, cfg, ds, fam).grad.squaredNorm();
        if (t == 1) first = norm_sq;
        last = norm_sq;
      }
    }
    MESSAGE("grad norm^2 step 1: " << first << ", step 200: " << last);
    CHECK(last * 10.0 <= first);
  }
}

TEST_CASE("dcl_surrogate") {
  SUBCASE("constant landscape") {
    const auto in = identical(4, 2);
    auto state = SogclrState::make(4, in.params.size(), 0.1);
    state.u.setConstant(1.5);
    const auto dcl = dcl_surrogate(state, in.params, config(0.1), in.ds, in.fam, testing::full_batch(4));
    CHECK(dcl.gradient(in.params).norm() <= 1e-12);
  }
  SUBCASE("matches the estimator and its own finite differences") {
    const auto in = seeded(7, 3, 13);
    const auto cfg = config(0.35);
    auto state = SogclrState::make(7, in.params.size(), 0.1);
    for (Eigen::Index i = 0; i < 7; ++i) state.u[i] = 0.5 + 0.1 * static_cast<double>(i);
    const MiniBatch b{{6, 2, 2, 0}, {1, 0, 2, 2}, {2, 1, 0, 0}};
    const auto dcl = dcl_surrogate(state, in.params, cfg, in.ds, in.fam, b);
    const auto m = sogclr_estimator(state, in.params, cfg, in.ds, in.fam, b);
    CHECK(relative_error(dcl.gradient(in.params), m) <= 1e-8);
    const auto fd = finite_diff_grad([&](const EncoderParams& w) { return dcl.value(w); }, in.params, 1e-5);
    CHECK(relative_error(fd, m) <= 1e-5);
  }
  SUBCASE("full batch, one augmentation, gamma = 1") {
    const auto in = seeded(5, 1, 17);
    const auto cfg = config(0.3);
    auto state = SogclrState::make(5, in.params.size(), 0.1, 1.0);
    sogclr_update_u(state, in.params, cfg, in.ds, in.fam, testing::full_batch(5));
    const auto dcl = dcl_surrogate(state, in.params, cfg, in.ds, in.fam, testing::full_batch(5));
    CHECK(relative_error(dcl.gradient(in.params), v2_grad(in, 0.3)) <= 1e-10);
  }
}

TEST_CASE("sogclr state checkpoint round trip") {
  auto state = SogclrState::make(4, 6, 0.05, 0.7, 0.8, StepRule::adam_style, ULag::lagged);
  state.u = vec({1.5, 0.25, 3, 1e-7});
  state.v = Vector::LinSpaced(6, -1, 1);
  state.adam.first = Vector::LinSpaced(6, 0, 0.5);
  state.adam.second = Vector::LinSpaced(6, 1, 2);
  state.adam.t = 17;
  const auto path = testing::temp_path("state.txt");
  write_sogclr_state(state, path);
  const auto back = read_sogclr_state(path);
  CHECK(back.u == state.u);
  CHECK(back.v == state.v);
  CHECK(back.adam.first == state.adam.first);
  CHECK(back.adam.second == state.adam.second);
  CHECK(back.adam.t == 17);
  CHECK(back.gamma == 0.7);
  CHECK(back.beta == 0.8);
  CHECK(back.eta == 0.05);
  CHECK(back.step_rule == StepRule::adam_style);
  CHECK(back.u_lag == ULag::lagged);
  std::filesystem::remove(path);
}
