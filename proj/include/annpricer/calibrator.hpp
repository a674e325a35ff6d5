#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "annpricer/dataset.hpp"
#include "annpricer/network.hpp"
#include "annpricer/trainer.hpp"

namespace annp {

struct Quote {
  double S = 0.0;
  double r = 0.0;
  double q = 0.0;
  double T = 0.0;
  double K = 0.0;
  double C = 0.0;       // market price
  double weight = 1.0;  // user weight omega
};

struct QuoteSet {
  std::vector<Quote> quotes;
};

/// Columns S,r,q,T,K,C_market[,weight]; weight defaults to 1.
QuoteSet load_quotes(const std::filesystem::path& path);
void save_quotes(const QuoteSet& qs, const std::filesystem::path& path);

/// Which prices feed the inverse network during training.
enum class InversePriceSource {
  Model,      // the generating model's prices
  DirectNet,  // prices re-computed by a trained direct network
};

/// Dataset for the inverse map. With DirectNet the price of every sample is
/// replaced by the direct network's unscaled prediction before scaling.
InverseData make_inverse_data(const Dataset& ds, InversePriceSource source, const Network* direct_net,
                              double atm_band = kDefaultAtmBand);

/// TrainConfig defaults for the inverse map: dynamic clipping on, plateau schedule on.
TrainConfig default_inverse_config();

struct InverseTrainResult {
  Network net;
  Metrics train;
  Metrics test;
};

/// Fits the inverse network; rethrows DivergenceError with advice about clipping.
InverseTrainResult train_inverse(const InverseData& data, const TrainConfig& tcfg, std::uint64_t init_seed,
                                 const EpochCallback& on_epoch = {});

enum class QuoteStatus { Ok, Clamped, Unreliable, ExcludedAtm, ExcludedInvalid };

const char* status_name(QuoteStatus s);

struct ParamPrediction {
  double sigma = 0.0;  // p_ANN for the single Black-Scholes parameter
  double y_hat = 0.0;  // raw network output
  QuoteStatus status = QuoteStatus::Ok;
  bool usable() const { return status == QuoteStatus::Ok || status == QuoteStatus::Clamped || status == QuoteStatus::Unreliable; }
};

inline constexpr double kOutputClamp = 1e-6;

/// sigma = log(S/K) / (N^{-1}(y_hat) sqrt T) per quote. Outputs outside
/// (eps, 1-eps) are clamped; ATM quotes and predictions on the wrong side of
/// 0.5 are excluded; prices within 1e-6 K of intrinsic are flagged unreliable.
std::vector<ParamPrediction> predict_params(const Network& inverse_net, const QuoteSet& quotes);

/// omega_bar[i][k] = omega_i |dC_ANN/dp_k| at (theta_i, p_ANN_i), via input
/// derivatives of the direct network and dC/dsigma = K dc/dsigma.
/// Excluded quotes get weight 0. Throws CalibrationError when all weights vanish.
Eigen::MatrixXd gradient_weights(const Network& direct_net, const QuoteSet& quotes,
                                 const std::vector<ParamPrediction>& predictions);

/// Same weights with Black-Scholes vega in place of the network derivative.
Eigen::MatrixXd gradient_weights_oracle(const QuoteSet& quotes, const std::vector<ParamPrediction>& predictions);

/// p_k = sum_i w_ik p_ik / sum_i w_ik. Rows are quotes, columns parameters.
/// Throws CalibrationError on a zero column sum or shape mismatch.
Eigen::VectorXd aggregate(const Eigen::MatrixXd& predictions, const Eigen::MatrixXd& weights);

/// sum_i w_ik |p_ik - p_k|^2 for one parameter column.
double aggregation_objective(const Eigen::VectorXd& predictions, const Eigen::VectorXd& weights, double p);

struct CalibrationResult {
  std::vector<ParamPrediction> predictions;
  Eigen::MatrixXd weights;   // quotes x parameters
  Eigen::VectorXd params;    // aggregated p_k
  double price_rmse = 0.0;   // Black-Scholes at p_k against the quotes used
  std::size_t used = 0;
  std::size_t warnings = 0;  // clamped + unreliable + excluded
};

/// predict_params -> gradient_weights -> aggregate, then a price residual at
/// the aggregated parameters. Throws CalibrationError for empty quote sets.
CalibrationResult calibrate(const Network& inverse_net, const Network& direct_net, const QuoteSet& quotes);

/// Per-quote rows: S,r,q,T,K,C_market,weight,y_hat,sigma_ann,omega_bar,status
void write_calibration_csv(const QuoteSet& quotes, const CalibrationResult& res, const std::filesystem::path& path);
std::string calibration_summary(const CalibrationResult& res);

}  // namespace annp
