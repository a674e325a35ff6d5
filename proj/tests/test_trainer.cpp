#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include "annpricer/arbitrage.hpp"
#include "annpricer/bs_oracle.hpp"
#include "annpricer/errors.hpp"
#include "annpricer/trainer.hpp"
#include "doctest.h"

using namespace annp;
namespace fs = std::filesystem;

namespace {

Network small_net(std::uint64_t seed) {
  Network net({5, 16, 16, 1}, {Activation::leaky_relu(1.0), Activation::melu(0.49), Activation::softplus_shift()});
  net.initialize(seed);
  return net;
}

TrainingData small_data(std::size_t n, std::uint64_t seed) {
  const auto ds = with_split(generate(n, SamplingRanges{}, seed), 0.8, 1);
  const auto d = scale_direct(ds);
  return {d.train, d.test, d.scaling.shift};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("phi") {
  CHECK(phi(-1.0, 3.0, 4) == 0.0);
  CHECK(phi(2.0, 1.0, 4) == 16.0);
  CHECK(phi(0.5, 1.0, 0) == 1.0);
  CHECK(phi(0.0, 1.0, 0) == 1.0);
  CHECK(phi(0.0, 1.0, 4) == 0.0);
  CHECK(phi_d1(2.0, 1.0, 4) == 32.0);
  CHECK(phi_d1(-2.0, 1.0, 4) == 0.0);
  CHECK(phi_d1(0.5, 1.0, 0) == 0.0);
  PenaltyConfig bad = PenaltyConfig::uniform(-1.0, 4);
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("clip by norm") {
  Eigen::VectorXd g(2);
  g << 6.0, 8.0;
  const auto c = clip_gradients(g, 5.0);
  CHECK(c.norm() == doctest::Approx(5.0).epsilon(1e-15));
  CHECK(c(0) / c(1) == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(clip_gradients(g, 10.0) == g);
  CHECK(clip_gradients(g, 20.0) == g);
}

TEST_CASE("dynamic clipper sets a positive threshold after the first epoch") {
  GradientClipper clip(ClipPolicy::Dynamic, 0.0);
  CHECK(clip.threshold() == 0.0);
  for (double n : {1.0, 3.0, 2.0, 10.0, 4.0}) {
    Eigen::VectorXd g = Eigen::VectorXd::Constant(1, n);
    CHECK(clip.apply(g) == n);
    CHECK(g(0) == n);  // first epoch observes only
  }
  clip.end_epoch(true);
  CHECK(clip.threshold() == 3.0);
  Eigen::VectorXd g = Eigen::VectorXd::Constant(1, 12.0);
  clip.apply(g);
  CHECK(g(0) == 3.0);
  clip.end_epoch(true);
  CHECK(clip.threshold() == 3.0);  // improving epochs keep it
  for (double n : {0.5, 0.7, 0.9}) {
    Eigen::VectorXd h = Eigen::VectorXd::Constant(1, n);
    clip.apply(h);
  }
  clip.end_epoch(false);
  CHECK(clip.threshold() == 0.7);

  // Toy training run.
  auto data = small_data(3000, 3);
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.clip = ClipPolicy::Dynamic;
  const auto res = train(small_net(1), data, cfg);
  CHECK(res.final_clip_threshold > 0.0);
}

TEST_CASE("plateau schedule") {
  PlateauConfig pc;
  pc.patience = 2;
  pc.factor = 0.5;
  pc.min_lr = 0.3;
  const double improving[] = {5, 4, 3, 2, 1};
  CHECK(plateau_schedule(improving, pc, 1.0) == 1.0);
  const double flat3[] = {1, 1, 1};
  CHECK(plateau_schedule(flat3, pc, 1.0) == 0.5);
  const double flat2[] = {1, 1};
  CHECK(plateau_schedule(flat2, pc, 1.0) == 1.0);
  const double flat9[] = {1, 1, 1, 1, 1, 1, 1, 1, 1};
  CHECK(plateau_schedule(flat9, pc, 1.0) == 0.3);
  pc.enabled = false;
  CHECK(plateau_schedule(flat9, pc, 1.0) == 1.0);
}

TEST_CASE("optimizer steps") {
  TrainConfig cfg;
  Eigen::VectorXd p = Eigen::VectorXd::Zero(2);
  Eigen::VectorXd g(2);
  g << 2.0, -0.5;
  Optimizer adam(cfg, 2);
  const long before = Optimizer::total_steps();
  adam.step(p, g, 0.1);
  CHECK(Optimizer::total_steps() == before + 1);
  // First bias-corrected Adam step is lr * sign(g).
  CHECK(p(0) == doctest::Approx(-0.1).epsilon(1e-6));
  CHECK(p(1) == doctest::Approx(0.1).epsilon(1e-6));

  cfg.optimizer = OptimizerKind::RMSprop;
  Optimizer rms(cfg, 2);
  Eigen::VectorXd q = Eigen::VectorXd::Zero(2);
  rms.step(q, g, 0.01);
  CHECK(q(0) == doctest::Approx(-0.01 * 2.0 / (std::sqrt(0.1 * 4.0) + 1e-8)).epsilon(1e-12));
}

TEST_CASE("config validation") {
  TrainConfig cfg;
  cfg.epochs = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.plateau.factor = 1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("penalized loss decomposition") {
  auto data = small_data(2000, 5);
  const auto net = small_net(2);
  SUBCASE("zero lambdas equal the MSE bit for bit") {
    PenaltyConfig zero;
    CHECK(penalized_loss(net, data.train, data.shift, zero) == mse_loss(net, data.train));
    PenaltyConfig zero_active_powers = PenaltyConfig::uniform(0.0, 4);
    CHECK(penalized_loss(net, data.train, data.shift, zero_active_powers) == mse_loss(net, data.train));
  }
  SUBCASE("penalty part equals the audit metric on the same net") {
    const auto pcfg = PenaltyConfig::uniform(2.0, 4);
    Network direct = net;
    direct.scaling.kind = ScalingMeta::Kind::Direct;
    direct.scaling.shift = data.shift;
    const auto ds = with_split(generate(2000, SamplingRanges{}, 5), 0.8, 1);
    const auto train_s = ds.train_samples();
    const double n = static_cast<double>(train_s.size());
    const double pen = penalty_metric(NetworkPricer(direct), train_s, pcfg).total / n;
    CHECK(penalized_loss(net, data.train, data.shift, pcfg) - mse_loss(net, data.train) ==
          doctest::Approx(pen).epsilon(1e-10));
  }
}

TEST_CASE("exact Black-Scholes scaled derivatives carry no penalty") {
  // c(m, T) = C(mK, K)/K - shift - 0.5: c_m = delta, c_mm = K * gamma, c_T = dC/dT / K.
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double shift = 1e-4;
  for (int i = 0; i < 500; ++i) {
    const double S = 5 + 15 * u(rng), K = 5 + 15 * u(rng), T = 0.05 + 2.45 * u(rng), r = 0.05 * u(rng);
    const double sigma = 0.05 + 0.75 * u(rng);
    const double C = bs_call(S, K, T, r, 0.0, sigma);
    if (C < 0.001 || C > 10) continue;
    const auto g = bs_greeks(S, K, T, r, 0.0, sigma);
    const double h = 1e-4 * S;
    const double gamma = (bs_greeks(S + h, K, T, r, 0.0, sigma).delta - bs_greeks(S - h, K, T, r, 0.0, sigma).delta) / (2 * h);
    const auto d = price_derivs_from_scaled(K, S / K, C / K - shift - 0.5, g.delta, K * gamma, g.dCdT / K, shift);
    CHECK(d.C == doctest::Approx(C).epsilon(1e-12));
    CHECK(d.dCdK == doctest::Approx(g.dCdK).epsilon(1e-9));
    const auto v = violation_magnitudes(d, K, T);
    double pen = 0.0;
    for (double x : v) pen += phi(x, 1.0, 4);
    if (g.d2CdK2 > 1e-8) CHECK(pen == 0.0);
  }
}

TEST_CASE("zero learning rate leaves weights unchanged") {
  auto data = small_data(1000, 7);
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.learning_rate = 0.0;
  const auto net = small_net(4);
  const auto res = train(net, data, cfg);
  CHECK(res.net.parameters() == net.parameters());
  REQUIRE(res.train.history.size() == 1);
}

TEST_CASE("training reduces the loss and is deterministic") {
  auto data = small_data(6000, 8);
  TrainConfig cfg;
  cfg.epochs = 4;
  const auto a = train(small_net(5), data, cfg);
  const auto b = train(small_net(5), data, cfg);
  CHECK(a.net.parameters() == b.net.parameters());
  CHECK(a.train.history.back().train_mse_bps < 0.5 * a.train.history.front().train_mse_bps);
  CHECK(a.test.mse_bps < a.train.history.front().test_mse_bps);
  cfg.seed = 99;
  const auto c = train(small_net(5), data, cfg);
  CHECK(c.net.parameters() != a.net.parameters());

  const auto path = fs::temp_directory_path() / "annpricer_metrics.csv";
  write_metrics_csv(a.train.history, path);
  const auto text = slurp(path);
  CHECK(text.rfind("epoch,train_mse_bps,test_mse_bps,penalty,lr,grad_norm,seconds\n", 0) == 0);
  write_metrics_csv(b.train.history, path);
  CHECK(slurp(path) == text);
  fs::remove(path);
}

TEST_CASE("penalized training runs and lowers violations from a warm start") {
  auto data = small_data(6000, 9);
  TrainConfig cfg;
  cfg.epochs = 3;
  auto base = train(small_net(6), data, cfg);
  base.net.scaling = {ScalingMeta::Kind::Direct, data.shift, 0.0, 0.0, 0};
  const auto ds = with_split(generate(6000, SamplingRanges{}, 9), 0.8, 1);
  const auto train_s = ds.train_samples();
  const auto before = penalty_metric(NetworkPricer(base.net), train_s).total;

  TrainConfig pc = cfg;
  pc.learning_rate = 1e-4;
  pc.clip = ClipPolicy::Fixed;
  pc.clip_threshold = 1.0;
  auto pen = train(base.net, data, pc, PenaltyConfig::uniform(100.0, 4));
  pen.net.scaling = base.net.scaling;
  const auto after = penalty_metric(NetworkPricer(pen.net), train_s).total;
  CHECK(after < before);
  CHECK(pen.train.history.front().penalty > 0.0);
}

TEST_CASE("evaluate: perfect predictor and constant bias") {
  Network net({5, 1}, {Activation::leaky_relu(1.0)});
  net.weights(0) << 1, 0, 0, 0, 0;
  ScaledSet set;
  set.X = Eigen::MatrixXd::Random(5, 50);
  set.y = set.X.row(0).transpose();
  auto m = evaluate(net, set);
  CHECK(m.mse_bps == 0.0);
  CHECK(m.mean_pct_error == 0.0);
  net.bias(0)(0) = 1e-4;
  m = evaluate(net, set);
  CHECK(m.mse_bps == doctest::Approx(1e-4).epsilon(1e-9));
  double pct = 0.0;
  for (Eigen::Index j = 0; j < 50; ++j) pct += 1e-4 / set.y(j);
  CHECK(m.mean_pct_error == doctest::Approx(100.0 * pct / 50.0).epsilon(1e-6));
}

TEST_CASE("divergence is reported with its location") {
  auto data = small_data(1000, 10);
  data.train.y(3) = std::numeric_limits<double>::quiet_NaN();
  TrainConfig cfg;
  cfg.epochs = 1;
  try {
    train(small_net(1), data, cfg);
    FAIL("expected divergence");
  } catch (const DivergenceError& e) {
    CHECK(e.epoch() == 1);
    CHECK(std::string(e.what()).find("clip") != std::string::npos);
  }
}
