#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "annpricer/arbitrage.hpp"
#include "annpricer/autodiff.hpp"
#include "annpricer/dataset.hpp"
#include "annpricer/network.hpp"
#include "annpricer/penalty.hpp"

namespace annp {

enum class OptimizerKind { Adam, RMSprop };
enum class ClipPolicy { Off, Fixed, Dynamic };

struct PlateauConfig {
  bool enabled = true;
  double factor = 0.5;
  int patience = 2;
  double min_lr = 1e-6;
  double min_rel_improvement = 1e-4;  // improvement must beat best * (1 - this)
};

struct TrainConfig {
  OptimizerKind optimizer = OptimizerKind::Adam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;    // Adam
  double beta2 = 0.999;  // Adam
  double rho = 0.9;      // RMSprop
  double epsilon = 1e-8;
  int epochs = 15;
  int batch_size = 64;
  ClipPolicy clip = ClipPolicy::Off;
  double clip_threshold = 1.0;  // fixed policy only
  PlateauConfig plateau;
  std::uint64_t seed = 1;
  bool log_seconds = false;

  /// Throws ConfigError.
  void validate() const;
};

/// Per-parameter adaptive first-order optimizer over the flat parameter vector.
class Optimizer {
 public:
  Optimizer(const TrainConfig& cfg, std::size_t parameters);
  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad, double lr);

  /// Steps taken by every optimizer in this process.
  static long total_steps();

 private:
  OptimizerKind kind_;
  double beta1_, beta2_, rho_, eps_;
  long t_ = 0;
  Eigen::VectorXd m_, v_;
};

/// Scales g to norm `threshold` when its L2 norm exceeds it; otherwise returns it unchanged.
Eigen::VectorXd clip_gradients(const Eigen::VectorXd& g, double threshold);

/// Clip-by-norm with an off, fixed or dynamic threshold. The dynamic policy
/// leaves the first epoch unclipped, then uses the median batch gradient norm
/// observed in it; after any later epoch whose monitored loss fails to improve,
/// the threshold is re-set to that epoch's median.
class GradientClipper {
 public:
  GradientClipper(ClipPolicy policy, double fixed_threshold);

  /// Clips in place; returns the norm before clipping.
  double apply(Eigen::VectorXd& g);
  void end_epoch(bool improved);

  ClipPolicy policy() const { return policy_; }
  /// Current threshold; 0 while the dynamic policy is still observing.
  double threshold() const { return threshold_; }

 private:
  ClipPolicy policy_;
  double threshold_;
  std::vector<double> epoch_norms_;
};

/// Reduce-on-plateau learning-rate schedule monitoring a loss to minimize.
class PlateauSchedule {
 public:
  PlateauSchedule(PlateauConfig cfg, double initial_lr) : cfg_(cfg), lr_(initial_lr) {}

  /// Feeds one epoch's monitored value; returns the learning rate for the next epoch.
  double step(double monitored);
  double learning_rate() const { return lr_; }
  /// True when the last step() improved on the best value seen so far.
  bool improved() const { return improved_; }

 private:
  PlateauConfig cfg_;
  double lr_;
  double best_ = 0.0;
  bool has_best_ = false;
  bool improved_ = false;
  int wait_ = 0;
};

/// Replays a monitored-loss history through a fresh schedule.
double plateau_schedule(std::span<const double> history, const PlateauConfig& cfg, double initial_lr);

struct EpochRecord {
  int epoch = 0;
  double train_mse_bps = 0.0;  // mean of batch MSEs over the epoch
  double test_mse_bps = 0.0;
  double penalty = 0.0;        // mean penalty term of the training loss
  double lr = 0.0;             // learning rate used during the epoch
  double grad_norm = 0.0;      // mean pre-clip batch gradient norm
  double seconds = 0.0;
};

struct Metrics {
  double mse_bps = 0.0;
  double mean_pct_error = 0.0;
  double penalty_value = 0.0;  // P_{1,0} (direct networks with originals only)
  std::size_t samples = 0;
  std::vector<EpochRecord> history;
};

/// Training data in network units. Direct sets need the original strikes for
/// the penalty normalization; `shift` is the price-scaling shift.
struct TrainingData {
  ScaledSet train;
  ScaledSet test;
  double shift = 0.0;
};

/// Penalized loss over a set: mean squared error plus
/// the mean over samples of the three phi terms on
/// {-K^2 C_KK, -T C_T, K C_K}, with C's strike/maturity derivatives obtained
/// from network input derivatives through price_derivs_from_scaled().
double penalized_loss(const Network& net, const ScaledSet& set, double shift, const PenaltyConfig& pcfg);

/// Mean squared error of the network over a set (scaled units).
double mse_loss(const Network& net, const ScaledSet& set);

/// Batch kernel of the penalized loss; the kernel adds the penalty part of
/// the loss into *penalty_sum when non-null.
JetKernel penalized_kernel(const Eigen::MatrixXd& X, const Eigen::VectorXd& targets,
                           const std::vector<double>& strikes, double shift, const PenaltyConfig& pcfg,
                           double normalizer, double* penalty_sum);

using EpochCallback = std::function<void(const EpochRecord&)>;

struct TrainResult {
  Network net;
  Metrics train;
  Metrics test;
  double final_clip_threshold = 0.0;
};

/// Mini-batch training; throws DivergenceError on a non-finite loss or gradient.
TrainResult train(Network net, const TrainingData& data, const TrainConfig& tcfg,
                  const std::optional<PenaltyConfig>& pcfg = std::nullopt, const EpochCallback& on_epoch = {});

/// mse_bps = 1e4 mean((y - yhat)^2); mean_pct_error = 100 mean((yhat - y) / y)
/// over |y| > 1e-8; penalty_value = P_{1,0} when `originals` are given for a
/// direct network.
Metrics evaluate(const Network& net, const ScaledSet& set, std::span<const OptionSample> originals = {});

/// Per-epoch log: epoch,train_mse_bps,test_mse_bps,penalty,lr,grad_norm,seconds
void write_metrics_csv(const std::vector<EpochRecord>& history, const std::filesystem::path& path);

}  // namespace annp
