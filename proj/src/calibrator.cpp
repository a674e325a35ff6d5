#include "annpricer/calibrator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "annpricer/autodiff.hpp"
#include "annpricer/csv.hpp"
#include "annpricer/errors.hpp"

namespace annp {
namespace {

constexpr int kSigmaInput = 4;

Eigen::MatrixXd quote_features(const QuoteSet& qs, const std::vector<double>& last) {
  Eigen::MatrixXd X(kFeatureCount, static_cast<Eigen::Index>(qs.quotes.size()));
  for (std::size_t i = 0; i < qs.quotes.size(); ++i) {
    const auto& q = qs.quotes[i];
    X.col(static_cast<Eigen::Index>(i)) << q.S / q.K, q.T, q.r, q.q, last[i];
  }
  return X;
}

}  // namespace

const char* status_name(QuoteStatus s) {
  switch (s) {
    case QuoteStatus::Ok: return "ok";
    case QuoteStatus::Clamped: return "clamped";
    case QuoteStatus::Unreliable: return "unreliable";
    case QuoteStatus::ExcludedAtm: return "excluded_atm";
    case QuoteStatus::ExcludedInvalid: return "excluded_invalid";
  }
  return "?";
}

QuoteSet load_quotes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  QuoteSet qs;
  std::string line;
  if (!std::getline(in, line)) return qs;
  static const std::vector<std::string> cols{"S", "r", "q", "T", "K", "C_market"};
  std::vector<long> opt;
  const auto pos = map_header(line, cols, {"weight"}, opt);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    const auto fields = split_csv_line(line);
    if (fields.size() == 1 && fields[0].empty()) continue;
    double v[6];
    for (std::size_t c = 0; c < cols.size(); ++c) {
      if (pos[c] >= fields.size()) throw ParseError("missing value for column '" + cols[c] + "'", lineno);
      v[c] = parse_field(fields[pos[c]], cols[c], lineno);
    }
    Quote q{v[0], v[1], v[2], v[3], v[4], v[5], 1.0};
    if (opt[0] >= 0 && static_cast<std::size_t>(opt[0]) < fields.size() &&
        !fields[static_cast<std::size_t>(opt[0])].empty()) {
      q.weight = parse_field(fields[static_cast<std::size_t>(opt[0])], "weight", lineno);
    }
    if (!(q.S > 0 && q.K > 0 && q.T > 0)) throw ParseError("S, K and T must be positive", lineno);
    if (!(q.weight >= 0.0)) throw ParseError("weight must be non-negative", lineno);
    qs.quotes.push_back(q);
  }
  return qs;
}

void save_quotes(const QuoteSet& qs, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "S,r,q,T,K,C_market,weight\n";
  for (const auto& q : qs.quotes) {
    out << format_double(q.S) << ',' << format_double(q.r) << ',' << format_double(q.q) << ',' << format_double(q.T)
        << ',' << format_double(q.K) << ',' << format_double(q.C) << ',' << format_double(q.weight) << '\n';
  }
}

InverseData make_inverse_data(const Dataset& ds, InversePriceSource source, const Network* direct_net,
                              double atm_band) {
  if (source == InversePriceSource::Model) return scale_inverse(ds, atm_band);
  if (!direct_net) throw ConfigError("direct-network prices requested but no direct network given");
  if (direct_net->scaling.kind != ScalingMeta::Kind::Direct) throw ConfigError("price network is not a direct map");
  Dataset copy = ds;
  Eigen::MatrixXd X(kFeatureCount, static_cast<Eigen::Index>(copy.samples.size()));
  for (std::size_t i = 0; i < copy.samples.size(); ++i) {
    const auto& s = copy.samples[i];
    X.col(static_cast<Eigen::Index>(i)) << s.S / s.K, s.T, s.r, s.q, s.sigma;
  }
  const Eigen::RowVectorXd c = forward_jet(*direct_net, X, {}).y;
  const DirectScaling sc{direct_net->scaling.shift};
  for (std::size_t i = 0; i < copy.samples.size(); ++i) {
    copy.samples[i].C = sc.unscale_price(c(static_cast<Eigen::Index>(i)), copy.samples[i].K);
  }
  return scale_inverse(copy, atm_band);
}

TrainConfig default_inverse_config() {
  TrainConfig cfg;
  cfg.epochs = 30;
  cfg.clip = ClipPolicy::Dynamic;
  cfg.plateau.enabled = true;
  return cfg;
}

InverseTrainResult train_inverse(const InverseData& data, const TrainConfig& tcfg, std::uint64_t init_seed,
                                 const EpochCallback& on_epoch) {
  Network net = Network::pricing_architecture();
  net.initialize(init_seed);
  net.scaling.kind = ScalingMeta::Kind::Inverse;
  net.scaling.shift = data.scaling.shift;
  net.scaling.atm_band = data.scaling.atm_band;
  TrainingData td{data.train, data.test, data.scaling.shift};
  try {
    auto res = train(std::move(net), td, tcfg, std::nullopt, on_epoch);
    return {std::move(res.net), std::move(res.train), std::move(res.test)};
  } catch (const DivergenceError& e) {
    throw DivergenceError(std::string(e.what()) + "; inverse-map training needs gradient clipping (clip=dynamic)",
                          e.epoch(), e.batch(), e.grad_norm());
  }
}

std::vector<ParamPrediction> predict_params(const Network& inverse_net, const QuoteSet& quotes) {
  if (inverse_net.scaling.kind != ScalingMeta::Kind::Inverse) throw ConfigError("predict_params needs an inverse network");
  InverseScaling sc;
  sc.shift = inverse_net.scaling.shift;
  sc.atm_band = inverse_net.scaling.atm_band;
  std::vector<double> price_feature;
  for (const auto& q : quotes.quotes) price_feature.push_back(sc.scale_price(q.C, q.K));
  const Eigen::RowVectorXd y = forward_jet(inverse_net, quote_features(quotes, price_feature), {}).y;

  std::vector<ParamPrediction> out(quotes.quotes.size());
  for (std::size_t i = 0; i < quotes.quotes.size(); ++i) {
    const auto& q = quotes.quotes[i];
    auto& p = out[i];
    p.y_hat = y(static_cast<Eigen::Index>(i));
    const double m = q.S / q.K;
    if (std::abs(std::log(m)) < sc.atm_band) {
      p.status = QuoteStatus::ExcludedAtm;
      continue;
    }
    double yc = p.y_hat;
    if (!(yc > kOutputClamp && yc < 1.0 - kOutputClamp)) {
      yc = std::clamp(std::isfinite(yc) ? yc : 0.5, kOutputClamp, 1.0 - kOutputClamp);
      p.status = QuoteStatus::Clamped;
    }
    const double sigma = sc.unscale_sigma(m, q.T, yc);
    if (!(sigma > 0.0) || !std::isfinite(sigma)) {
      p.status = QuoteStatus::ExcludedInvalid;
      continue;
    }
    p.sigma = sigma;
    const double lb = call_lower_bound(q.S, q.K, q.T, q.r, q.q);
    const double ub = call_upper_bound(q.S, q.T, q.q);
    if (q.C <= lb + 1e-6 * q.K || q.C >= ub) p.status = QuoteStatus::Unreliable;
  }
  return out;
}

Eigen::MatrixXd gradient_weights(const Network& direct_net, const QuoteSet& quotes,
                                 const std::vector<ParamPrediction>& predictions) {
  if (predictions.size() != quotes.quotes.size()) throw ShapeError("gradient_weights: prediction count mismatch");
  std::vector<double> sig;
  for (const auto& p : predictions) sig.push_back(p.usable() ? p.sigma : 0.2);
  const Direction dirs[] = {{kSigmaInput, false}};
  const BatchJet jet = forward_jet(direct_net, quote_features(quotes, sig), dirs);
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(quotes.quotes.size()), 1);
  for (std::size_t i = 0; i < quotes.quotes.size(); ++i) {
    if (!predictions[i].usable()) continue;
    const auto& q = quotes.quotes[i];
    w(static_cast<Eigen::Index>(i), 0) = q.weight * std::abs(q.K * jet.d1(0, static_cast<Eigen::Index>(i)));
  }
  if (!(w.sum() > 0.0) || !w.allFinite()) throw CalibrationError("no informative quotes: all calibration weights are zero");
  return w;
}

Eigen::MatrixXd gradient_weights_oracle(const QuoteSet& quotes, const std::vector<ParamPrediction>& predictions) {
  if (predictions.size() != quotes.quotes.size()) throw ShapeError("gradient_weights: prediction count mismatch");
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(quotes.quotes.size()), 1);
  for (std::size_t i = 0; i < quotes.quotes.size(); ++i) {
    if (!predictions[i].usable()) continue;
    const auto& q = quotes.quotes[i];
    w(static_cast<Eigen::Index>(i), 0) = q.weight * bs_greeks(q.S, q.K, q.T, q.r, q.q, predictions[i].sigma).vega;
  }
  if (!(w.sum() > 0.0)) throw CalibrationError("no informative quotes: all calibration weights are zero");
  return w;
}

Eigen::VectorXd aggregate(const Eigen::MatrixXd& predictions, const Eigen::MatrixXd& weights) {
  if (predictions.rows() != weights.rows() || predictions.cols() != weights.cols()) {
    throw ShapeError("aggregate: predictions and weights differ in shape");
  }
  if (predictions.rows() == 0) throw CalibrationError("aggregate: no quotes");
  Eigen::VectorXd p(predictions.cols());
  for (Eigen::Index k = 0; k < predictions.cols(); ++k) {
    const double total = weights.col(k).sum();
    if (!(total > 0.0)) throw CalibrationError("aggregate: zero total weight for parameter " + std::to_string(k));
    p(k) = weights.col(k).dot(predictions.col(k)) / total;
  }
  return p;
}

double aggregation_objective(const Eigen::VectorXd& predictions, const Eigen::VectorXd& weights, double p) {
  return weights.dot((predictions.array() - p).square().matrix());
}

CalibrationResult calibrate(const Network& inverse_net, const Network& direct_net, const QuoteSet& quotes) {
  if (quotes.quotes.empty()) throw CalibrationError("calibrate: empty quote set");
  CalibrationResult res;
  res.predictions = predict_params(inverse_net, quotes);
  res.weights = gradient_weights(direct_net, quotes, res.predictions);
  Eigen::MatrixXd p(static_cast<Eigen::Index>(quotes.quotes.size()), 1);
  for (std::size_t i = 0; i < quotes.quotes.size(); ++i) {
    p(static_cast<Eigen::Index>(i), 0) = res.predictions[i].usable() ? res.predictions[i].sigma : 0.0;
    if (res.predictions[i].status != QuoteStatus::Ok) ++res.warnings;
  }
  res.params = aggregate(p, res.weights);
  double se = 0.0;
  for (std::size_t i = 0; i < quotes.quotes.size(); ++i) {
    if (!res.predictions[i].usable()) continue;
    const auto& q = quotes.quotes[i];
    const double e = bs_call(q.S, q.K, q.T, q.r, q.q, res.params(0)) - q.C;
    se += e * e;
    ++res.used;
  }
  res.price_rmse = res.used ? std::sqrt(se / static_cast<double>(res.used)) : 0.0;
  return res;
}

void write_calibration_csv(const QuoteSet& quotes, const CalibrationResult& res, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "S,r,q,T,K,C_market,weight,y_hat,sigma_ann,omega_bar,status\n";
  for (std::size_t i = 0; i < quotes.quotes.size(); ++i) {
    const auto& q = quotes.quotes[i];
    const auto& p = res.predictions[i];
    out << format_double(q.S) << ',' << format_double(q.r) << ',' << format_double(q.q) << ',' << format_double(q.T)
        << ',' << format_double(q.K) << ',' << format_double(q.C) << ',' << format_double(q.weight) << ','
        << format_double(p.y_hat) << ',' << format_double(p.sigma) << ','
        << format_double(res.weights(static_cast<Eigen::Index>(i), 0)) << ',' << status_name(p.status) << '\n';
  }
}

std::string calibration_summary(const CalibrationResult& res) {
  std::ostringstream os;
  os << "[calibration]\n";
  os << "  sigma       " << format_double(res.params(0)) << '\n';
  os << "  quotes_used " << res.used << " of " << res.predictions.size() << '\n';
  os << "  price_rmse  " << format_double(res.price_rmse) << '\n';
  os << "  warnings    " << res.warnings << '\n';
  return os.str();
}

}  // namespace annp
