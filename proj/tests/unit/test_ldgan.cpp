// Copyright 2026 The tldg Authors.
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <filesystem>
#include <random>

#include <doctest.h>

#include <json.hpp>

#include "gradcheck.hpp"
#include "tldg/checkpoint.hpp"
#include "tldg/error.hpp"
#include "tldg/ldgan.hpp"
#include "tldg/ops.hpp"
#include "tldg/trainer.hpp"

using namespace tldg;
using ag::Tensor;
using ag::Var;
using tldg::testing::gradcheck;
using tldg::testing::random_tensor;

namespace {

LdganConfig tiny_config() {
  LdganConfig c;
  c.n_mels = 16;
  c.n_frames = 20;
  c.d_z = 8;
  c.enc_channels = {4, 8};
  c.disc_channels = {4, 8};
  c.denoiser_hidden = 32;
  c.time_embed_dim = 8;
  c.n_steps = 10;
  return c;
}

std::vector<Eigen::MatrixXd> tiny_specs(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 0.3);
  std::vector<Eigen::MatrixXd> out;
  for (int i = 0; i < n; ++i) {
    Eigen::MatrixXd m(16, 20);
    for (int f = 0; f < 16; ++f)
      for (int t = 0; t < 20; ++t) m(f, t) = -6.0 + 3.0 * std::exp(-0.3 * f) + (f == 5 ? 2.0 : 0.0) + g(rng);
    out.push_back(m);
  }
  return out;
}

TrainConfig tiny_train() {
  TrainConfig t;
  t.epochs = 2;
  t.batch = 4;
  t.ae_epochs = 2;
  t.probe_size = 4;
  t.seed = 3;
  return t;
}

}  // namespace

TEST_CASE("loss values") {
  const Tensor eps = random_tensor({3, 5}, 1);
  Tensor shifted = eps;
  for (double& v : shifted.vec()) v += 0.5;
  CHECK(noise_loss(Var::constant(shifted), eps).item() == doctest::Approx(0.25 * 5));

  const Var real = Var::constant(Tensor({2, 2}, {1, 1, 1, 1}));
  const Var fake = Var::constant(Tensor({2, 2}, {0, 0, 0, 0}));
  CHECK(stat_loss(real, fake).item() == doctest::Approx(2.0));
  CHECK(stat_loss(real, real).item() == 0.0);

  CHECK(generator_loss(Var::constant(Tensor::scalar(0.5)), Var::constant(Tensor::scalar(0.2)), 1.0).item() ==
        doctest::Approx(0.7));
  CHECK(discriminator_loss(Var::constant(Tensor::scalar(1.2)), Var::constant(Tensor::scalar(0.05)), 10.0).item() ==
        doctest::Approx(1.7));

  const Var zero = Var::constant(Tensor({4, 1}, 0.0));
  CHECK(adversarial_loss(zero, zero, zero).item() == doctest::Approx(2.0 * std::log(2.0)));
}

TEST_CASE("gradient penalty closed forms") {
  const Tensor real = random_tensor({3, 1, 4, 5}, 2);
  const Tensor fake = random_tensor({3, 1, 4, 5}, 3);
  const std::vector<double> u = {0.1, 0.5, 0.9};
  const Critic linear = [](const Var& x) { return ag::sample_sum(x); };
  CHECK(gradient_penalty(linear, real, fake, u).item() == doctest::Approx(std::pow(std::sqrt(20.0) - 1.0, 2)));
  const Critic constant = [](const Var& x) { return ag::scale(ag::sample_sum(x), 0.0); };
  CHECK(gradient_penalty(constant, real, fake, u).item() == doctest::Approx(1.0));
  CHECK_THROWS_AS(gradient_penalty(linear, real, random_tensor({2, 1, 4, 5}, 4), u), Error);
}

TEST_CASE("gradient penalty is differentiable in the critic parameters") {
  const Tensor real = random_tensor({3, 6}, 5);
  const Tensor fake = random_tensor({3, 6}, 6);
  const std::vector<double> u = {0.2, 0.6, 0.7};
  auto f = [&](const std::vector<Var>& p) {
    const Critic d = [&](const Var& x) { return ag::matmul(ag::silu(ag::matmul(x, p[0])), p[1]); };
    return gradient_penalty(d, real, fake, u);
  };
  const Var w1 = Var::parameter(random_tensor({6, 5}, 7));
  const Var w2 = Var::parameter(random_tensor({5, 1}, 8));
  CHECK(gradcheck(f, {w1, w2}, 1e-6, 1e-3) < 1e-3);
}

TEST_CASE("model shapes and geometry checks") {
  const LdganModel m(tiny_config(), 1);
  const auto specs = tiny_specs(2, 1);
  const Tensor x = m.to_model({&specs[0], &specs[1]});
  CHECK(x.shape() == ag::Shape{2, 1, 16, 20});
  const Var z = m.encode(Var::constant(x));
  CHECK(z.shape() == ag::Shape{2, 8});
  CHECK(m.decode(z).shape() == ag::Shape{2, 1, 16, 20});
  CHECK(m.denoise(z, {1, 5}).shape() == ag::Shape{2, 8});
  CHECK(m.discriminate(Var::constant(x), {0, 3}).logits.shape() == ag::Shape{2, 1});
  CHECK_THROWS_AS(m.encode(Var::constant(Tensor({1, 1, 15, 20}))), Error);

  LdganConfig bad = tiny_config();
  bad.t0_fraction = 1.5;
  CHECK_THROWS_AS(bad.validate(), Error);
  CHECK(tiny_config().t0() == 3);
}

TEST_CASE("spectral norm power iteration") {
  nn::Rng rng(4);
  const Var w = Var::parameter(random_tensor({6, 3, 3, 3}, 9));
  nn::SpectralNorm sn(w, 6, rng);
  sn.refresh();
  CHECK(sn.sigma() == doctest::Approx(nn::top_singular_value(sn.matrix())).epsilon(1e-10));
  const Var wn = sn.normalized();
  Eigen::MatrixXd mat = Eigen::Map<const Eigen::Matrix<double, -1, -1, Eigen::RowMajor>>(wn.value().data(), 6, 27);
  CHECK(nn::top_singular_value(mat) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("training keeps spectral norms at one and is deterministic") {
  const auto specs = tiny_specs(12, 2);
  TrainHooks hooks;
  int steps = 0;
  double worst = 0.0;
  hooks.on_step = [&](const StepStats& s, const LdganModel& m) {
    ++steps;
    CHECK(std::isfinite(s.l_d));
    for (const auto& sn : m.spectral_norms()) {
      const double top = nn::top_singular_value(sn.matrix()) / sn.sigma();
      worst = std::max(worst, std::abs(top - 1.0));
    }
  };
  const auto a = train(specs, tiny_config(), tiny_train(), hooks);
  CHECK(steps == 6);
  CHECK(worst < 1e-3);
  CHECK(a.model.trained());
  CHECK(a.history.probe_noise.size() == 3);
  CHECK(a.history.ae_loss.size() == 2);

  const auto b = train(specs, tiny_config(), tiny_train());
  const auto ra = a.model.reconstruct({specs[0]}, {11});
  const auto rb = b.model.reconstruct({specs[0]}, {11});
  CHECK(ra[0].spec == rb[0].spec);
  CHECK(ra[0].z_reencoded == rb[0].z_reencoded);
  CHECK(ra[0].spec.rows() == 16);
  CHECK(ra[0].spec.cols() == 20);
  // Same noise seed -> same output; different seed -> different chain.
  CHECK(a.model.reconstruct({specs[0]}, {11})[0].spec == ra[0].spec);
  CHECK(a.model.reconstruct({specs[0]}, {12})[0].z_denoised != ra[0].z_denoised);
}

TEST_CASE("checkpoint round trip and resume") {
  const auto specs = tiny_specs(8, 3);
  const auto dir = std::filesystem::temp_directory_path() / "tldg_ldgan_test";
  std::filesystem::create_directories(dir);
  auto cfg = tiny_train();
  cfg.epochs = 1;
  const auto r = train(specs, tiny_config(), cfg);
  Archive a;
  save_training(a, r, cfg);
  write_archive(dir / "m.ckpt", a);
  const Archive back = read_archive(dir / "m.ckpt");
  const auto m = LdganModel::load(back);
  CHECK(m.reconstruct({specs[1]}, {4})[0].spec == r.model.reconstruct({specs[1]}, {4})[0].spec);
  CHECK(m.train_average() == r.model.train_average());

  // Rewriting the same archive gives the same bytes.
  write_archive(dir / "m2.ckpt", back);
  CHECK(std::filesystem::file_size(dir / "m.ckpt") == std::filesystem::file_size(dir / "m2.ckpt"));

  auto more = cfg;
  more.epochs = 2;
  const auto resumed = train(specs, tiny_config(), more, {}, &back);
  CHECK(resumed.epochs_done == 2);
  const auto straight = train(specs, tiny_config(), more);
  CHECK(resumed.model.reconstruct({specs[2]}, {5})[0].spec == straight.model.reconstruct({specs[2]}, {5})[0].spec);

  std::filesystem::remove_all(dir);
}

TEST_CASE("untrained model refuses to reconstruct") {
  const LdganModel m(tiny_config(), 1);
  CHECK_THROWS_AS(m.reconstruct(tiny_specs(1, 1), {1}), Error);
}

TEST_CASE("preset hyperparameters are echoed into the checkpoint") {
  auto cfg = tiny_train();
  cfg.epochs = 0;
  cfg.ae_epochs = 1;
  const auto r = train(tiny_specs(4, 5), tiny_config(), cfg);
  TrainConfig paper = cfg;
  paper.lr = 1e-4;
  paper.batch = 512;
  paper.epochs = 150;
  Archive a;
  save_training(a, r, paper);
  const auto echo = nlohmann::json::parse(a.meta("train.config"));
  CHECK(echo.at("lr").get<double>() == 0.0001);
  CHECK(echo.at("batch").get<int>() == 512);
  CHECK(echo.at("epochs").get<int>() == 150);
}
