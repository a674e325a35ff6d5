#include "annpricer/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "annpricer/autodiff.hpp"
#include "annpricer/errors.hpp"
#include "annpricer/random.hpp"

namespace annp {
namespace {

std::atomic<long> g_optimizer_steps{0};

// Moneyness carries the second-order (butterfly) term; maturity only needs a slope.
constexpr Direction kPenaltyDirs[] = {{0, true}, {1, false}};

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (v.size() % 2) return *mid;
  const double hi = *mid;
  const double lo = *std::max_element(v.begin(), mid);
  return 0.5 * (lo + hi);
}

void gather(const ScaledSet& set, std::span<const std::size_t> idx, Eigen::MatrixXd& X, Eigen::VectorXd& y,
            std::vector<double>& strikes) {
  const auto n = static_cast<Eigen::Index>(idx.size());
  X.resize(set.X.rows(), n);
  y.resize(n);
  strikes.resize(idx.size());
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto i = idx[static_cast<std::size_t>(j)];
    X.col(j) = set.X.col(static_cast<Eigen::Index>(i));
    y(j) = set.y(static_cast<Eigen::Index>(i));
    strikes[static_cast<std::size_t>(j)] = set.strike.empty() ? 1.0 : set.strike[i];
  }
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (!(learning_rate >= 0.0)) throw ConfigError("learning rate must be >= 0");
  if (!(plateau.factor > 0.0 && plateau.factor < 1.0)) throw ConfigError("plateau factor must lie in (0, 1)");
  if (plateau.patience < 0) throw ConfigError("plateau patience must be >= 0");
  if (!(plateau.min_lr >= 0.0)) throw ConfigError("plateau min_lr must be >= 0");
  if (clip == ClipPolicy::Fixed && !(clip_threshold > 0.0)) throw ConfigError("fixed clip threshold must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) || !(rho >= 0.0 && rho < 1.0)) {
    throw ConfigError("optimizer decay rates must lie in [0, 1)");
  }
  if (!(epsilon > 0.0)) throw ConfigError("optimizer epsilon must be > 0");
}

// ---------------------------------------------------------------------------

Optimizer::Optimizer(const TrainConfig& cfg, std::size_t parameters)
    : kind_(cfg.optimizer), beta1_(cfg.beta1), beta2_(cfg.beta2), rho_(cfg.rho), eps_(cfg.epsilon) {
  m_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(parameters));
  v_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(parameters));
}

void Optimizer::step(Eigen::VectorXd& params, const Eigen::VectorXd& grad, double lr) {
  g_optimizer_steps.fetch_add(1, std::memory_order_relaxed);
  ++t_;
  if (kind_ == OptimizerKind::Adam) {
    m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
    v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseAbs2();
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    params.array() -= lr * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
  } else {
    v_ = rho_ * v_ + (1.0 - rho_) * grad.cwiseAbs2();
    params.array() -= lr * grad.array() / (v_.array().sqrt() + eps_);
  }
}

long Optimizer::total_steps() { return g_optimizer_steps.load(std::memory_order_relaxed); }

Eigen::VectorXd clip_gradients(const Eigen::VectorXd& g, double threshold) {
  const double norm = g.norm();
  if (threshold > 0.0 && norm > threshold) return g * (threshold / norm);
  return g;
}

GradientClipper::GradientClipper(ClipPolicy policy, double fixed_threshold)
    : policy_(policy), threshold_(policy == ClipPolicy::Fixed ? fixed_threshold : 0.0) {}

double GradientClipper::apply(Eigen::VectorXd& g) {
  const double norm = g.norm();
  if (policy_ == ClipPolicy::Off) return norm;
  epoch_norms_.push_back(norm);
  if (threshold_ > 0.0 && norm > threshold_) g *= threshold_ / norm;
  return norm;
}

void GradientClipper::end_epoch(bool improved) {
  if (policy_ == ClipPolicy::Dynamic && !epoch_norms_.empty() && (threshold_ == 0.0 || !improved)) {
    const double m = median(epoch_norms_);
    if (m > 0.0 && std::isfinite(m)) threshold_ = m;
  }
  epoch_norms_.clear();
}

double PlateauSchedule::step(double monitored) {
  improved_ = !has_best_ || monitored < best_ * (1.0 - cfg_.min_rel_improvement);
  if (improved_) {
    best_ = monitored;
    has_best_ = true;
    wait_ = 0;
    return lr_;
  }
  if (!cfg_.enabled) return lr_;
  if (++wait_ >= cfg_.patience) {
    lr_ = std::max(lr_ * cfg_.factor, cfg_.min_lr);
    wait_ = 0;
  }
  return lr_;
}

double plateau_schedule(std::span<const double> history, const PlateauConfig& cfg, double initial_lr) {
  PlateauSchedule s(cfg, initial_lr);
  for (double v : history) s.step(v);
  return s.learning_rate();
}

// ---------------------------------------------------------------------------

JetKernel penalized_kernel(const Eigen::MatrixXd& X, const Eigen::VectorXd& targets,
                           const std::vector<double>& strikes, double shift, const PenaltyConfig& pcfg,
                           double normalizer, double* penalty_sum) {
  return [&X, &targets, &strikes, shift, pcfg, normalizer, penalty_sum](const BatchJet& jet, Eigen::Index first,
                                                                        BatchJet& adj) {
    double loss = 0.0;
    double pen_total = 0.0;
    const auto& lam = pcfg.lambda;
    const auto& pw = pcfg.power;
    for (Eigen::Index j = 0; j < jet.size(); ++j) {
      const Eigen::Index col = first + j;
      const double K = strikes[static_cast<std::size_t>(col)];
      const double m = X(0, col);
      const double T = X(1, col);
      const double c = jet.y(j);
      const auto d = price_derivs_from_scaled(K, m, c, jet.d1(0, j), jet.d2(0, j), jet.d1(1, j), shift);
      const auto v = violation_magnitudes(d, K, T);
      const double e = c - targets(col);
      double pen = 0.0;
      for (std::size_t k = 0; k < 3; ++k) pen += phi(v[k], lam[k], pw[k]);
      loss += e * e + pen;
      pen_total += pen;
      // d v / d(c, c_m, c_mm, c_T): v0 = -K m^2 c_mm, v1 = -T K c_T, v2 = K (c + shift + 0.5 - m c_m).
      const double g0 = phi_d1(v[0], lam[0], pw[0]);
      const double g1 = phi_d1(v[1], lam[1], pw[1]);
      const double g2 = phi_d1(v[2], lam[2], pw[2]);
      adj.y(j) = (2.0 * e + g2 * K) / normalizer;
      adj.d1(0, j) = -g2 * K * m / normalizer;
      adj.d2(0, j) = -g0 * K * m * m / normalizer;
      adj.d1(1, j) = -g1 * T * K / normalizer;
    }
    if (penalty_sum) {
#pragma omp atomic
      *penalty_sum += pen_total / normalizer;
    }
    return loss / normalizer;
  };
}

double penalized_loss(const Network& net, const ScaledSet& set, double shift, const PenaltyConfig& pcfg) {
  pcfg.validate();
  const double n = static_cast<double>(set.size());
  if (!pcfg.active()) {
    const BatchJet jet = forward_jet(net, set.X, {});
    double loss = 0.0;
    for (Eigen::Index j = 0; j < jet.size(); ++j) {
      const double e = jet.y(j) - set.y(j);
      loss += e * e;
    }
    return loss / n;
  }
  const BatchJet jet = forward_jet(net, set.X, kPenaltyDirs);
  BatchJet adj = BatchJet::zeros(2, jet.size());
  const auto kernel = penalized_kernel(set.X, set.y, set.strike, shift, pcfg, n, nullptr);
  return kernel(jet, 0, adj);
}

double mse_loss(const Network& net, const ScaledSet& set) { return penalized_loss(net, set, 0.0, PenaltyConfig{}); }

// ---------------------------------------------------------------------------

Metrics evaluate(const Network& net, const ScaledSet& set, std::span<const OptionSample> originals) {
  Metrics m;
  m.samples = set.size();
  if (set.size() == 0) throw ConfigError("evaluate: empty split");
  const Eigen::RowVectorXd pred = forward_jet(net, set.X, {}).y;
  double se = 0.0, pct = 0.0;
  std::size_t pct_n = 0;
  for (Eigen::Index j = 0; j < pred.size(); ++j) {
    const double y = set.y(j);
    const double e = pred(j) - y;
    se += e * e;
    if (std::abs(y) > 1e-8) {
      pct += e / y;
      ++pct_n;
    }
  }
  m.mse_bps = 1e4 * se / static_cast<double>(set.size());
  m.mean_pct_error = pct_n ? 100.0 * pct / static_cast<double>(pct_n) : 0.0;
  if (net.scaling.kind == ScalingMeta::Kind::Direct && !originals.empty()) {
    m.penalty_value = penalty_metric(NetworkPricer(net), originals, PenaltyConfig::counting()).total;
  }
  return m;
}

TrainResult train(Network net, const TrainingData& data, const TrainConfig& tcfg,
                  const std::optional<PenaltyConfig>& pcfg, const EpochCallback& on_epoch) {
  tcfg.validate();
  if (pcfg) pcfg->validate();
  const bool penalized = pcfg && pcfg->active();
  const std::size_t n = data.train.size();
  if (n == 0) throw ConfigError("train: empty training split");
  if (data.train.X.rows() != net.input_dim()) throw ShapeError("train: feature count does not match network input");
  if (penalized && data.train.strike.size() != n) throw ConfigError("train: penalties need the original strikes");

  Optimizer opt(tcfg, net.parameter_count());
  GradientClipper clipper(tcfg.clip, tcfg.clip_threshold);
  PlateauSchedule schedule(tcfg.plateau, tcfg.learning_rate);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainResult result;
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  std::vector<double> strikes;
  const auto bs = static_cast<std::size_t>(tcfg.batch_size);

  for (int epoch = 1; epoch <= tcfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(derive_seed(tcfg.seed, static_cast<std::uint64_t>(epoch)));
    shuffle(order.begin(), order.end(), rng);
    const double lr = schedule.learning_rate();

    double loss_sum = 0.0, mse_sum = 0.0, pen_sum = 0.0, norm_sum = 0.0;
    long batches = 0;
    for (std::size_t start = 0; start < n; start += bs) {
      const std::size_t len = std::min(bs, n - start);
      gather(data.train, std::span<const std::size_t>(order).subspan(start, len), X, y, strikes);
      const double norm_by = static_cast<double>(len);
      double batch_pen = 0.0;
      LossGradient lg = penalized
          ? penalty_grad(net, X, kPenaltyDirs,
                         penalized_kernel(X, y, strikes, data.shift, *pcfg, norm_by, &batch_pen))
          : grad_params(net, X, mse_kernel(y, norm_by));
      const double gnorm = clipper.apply(lg.gradient);
      if (!std::isfinite(lg.loss) || !std::isfinite(gnorm)) {
        throw DivergenceError("training diverged: non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                                  std::to_string(batches) + ", gradient norm " + std::to_string(gnorm) +
                                  " (check the clip policy)",
                              epoch, batches, gnorm);
      }
      opt.step(net.parameters(), lg.gradient, lr);
      loss_sum += lg.loss;
      pen_sum += batch_pen;
      mse_sum += lg.loss - batch_pen;
      norm_sum += gnorm;
      ++batches;
    }

    const double mean_loss = loss_sum / static_cast<double>(batches);
    schedule.step(mean_loss);
    clipper.end_epoch(schedule.improved());

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_mse_bps = 1e4 * mse_sum / static_cast<double>(batches);
    rec.test_mse_bps = data.test.size() ? 1e4 * mse_loss(net, data.test) : 0.0;
    rec.penalty = pen_sum / static_cast<double>(batches);
    rec.lr = lr;
    rec.grad_norm = norm_sum / static_cast<double>(batches);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    rec.seconds = tcfg.log_seconds ? secs : 0.0;
    result.train.history.push_back(rec);
    if (on_epoch) {
      EpochRecord shown = rec;
      shown.seconds = secs;
      on_epoch(shown);
    }
  }

  result.final_clip_threshold = clipper.threshold();
  auto history = std::move(result.train.history);
  result.train = evaluate(net, data.train);
  result.train.history = std::move(history);
  if (data.test.size()) result.test = evaluate(net, data.test);
  result.net = std::move(net);
  return result;
}

void write_metrics_csv(const std::vector<EpochRecord>& history, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "epoch,train_mse_bps,test_mse_bps,penalty,lr,grad_norm,seconds\n";
  for (const auto& r : history) {
    out << r.epoch << ',' << format_double(r.train_mse_bps) << ',' << format_double(r.test_mse_bps) << ','
        << format_double(r.penalty) << ',' << format_double(r.lr) << ',' << format_double(r.grad_norm) << ','
        << format_double(r.seconds) << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace annp
