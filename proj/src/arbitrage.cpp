#include "annpricer/arbitrage.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "annpricer/autodiff.hpp"
#include "annpricer/dataset.hpp"
#include "annpricer/errors.hpp"

namespace annp {

void PenaltyConfig::validate() const {
  for (std::size_t i = 0; i < 3; ++i) {
    if (!(lambda[i] >= 0.0) || !std::isfinite(lambda[i])) throw ConfigError("penalty lambda must be finite and >= 0");
    if (power[i] < 0) throw ConfigError("penalty exponent m must be >= 0");
  }
}

std::array<double, 3> violation_magnitudes(const PriceDerivs& d, double K, double T) {
  return {-K * K * d.d2CdK2, -T * d.dCdT, K * d.dCdK};
}

PriceDerivs price_derivs_from_scaled(double K, double m, double c, double dc_dm, double d2c_dm2, double dc_dT,
                                     double shift) {
  const double g = c + shift + 0.5;
  PriceDerivs d;
  d.C = K * g;
  d.dCdK = g - m * dc_dm;
  d.d2CdK2 = m * m * d2c_dm2 / K;
  d.dCdT = K * dc_dT;
  return d;
}

std::vector<PriceDerivs> BlackScholesPricer::evaluate(std::span<const OptionSample> samples) const {
  std::vector<PriceDerivs> out(samples.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(samples.size()); ++i) {
    const auto& s = samples[static_cast<std::size_t>(i)];
    const auto g = bs_greeks(s.S, s.K, s.T, s.r, s.q, s.sigma);
    out[static_cast<std::size_t>(i)] = {bs_call(s.S, s.K, s.T, s.r, s.q, s.sigma), g.dCdK, g.d2CdK2, g.dCdT};
  }
  return out;
}

std::vector<PriceDerivs> NetworkPricer::evaluate(std::span<const OptionSample> samples) const {
  Eigen::MatrixXd X(kFeatureCount, static_cast<Eigen::Index>(samples.size()));
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    X.col(static_cast<Eigen::Index>(i)) << s.S / s.K, s.T, s.r, s.q, s.sigma;
  }
  const Direction dirs[] = {{0, true}, {1, false}};
  const BatchJet jet = forward_jet(net_, X, dirs);
  std::vector<PriceDerivs> out(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto j = static_cast<Eigen::Index>(i);
    out[i] = price_derivs_from_scaled(samples[i].K, X(0, j), jet.y(j), jet.d1(0, j), jet.d2(0, j), jet.d1(1, j),
                                      net_.scaling.shift);
  }
  return out;
}

DifferentialFlags check_differential(const PriceDerivs& d, double K, double T, double slack) {
  const auto v = violation_magnitudes(d, K, T);
  return {v[kButterfly] < slack, v[kCalendar] < slack, v[kVertical] < slack};
}

DifferentialFlags check_differential(const DerivativePricer& pricer, const OptionSample& sample, double slack) {
  const auto d = pricer.evaluate(std::span<const OptionSample>(&sample, 1));
  return check_differential(d.front(), sample.K, sample.T, slack);
}

double butterfly_value(std::array<double, 3> k, std::array<double, 3> c) {
  return (k[2] - k[1]) * c[0] - (k[2] - k[0]) * c[1] + (k[1] - k[0]) * c[2];
}

DiscreteFlags check_discrete(std::array<double, 3> strikes, std::array<double, 3> prices) {
  if (!(strikes[0] < strikes[1] && strikes[1] < strikes[2])) {
    throw DomainError("check_discrete requires strictly increasing strikes");
  }
  return {prices[2] > 0.0, prices[1] > prices[2], butterfly_value(strikes, prices) > 0.0};
}

bool check_calendar(double T1, double C1, double T2, double C2) {
  if (!(T1 < T2)) throw DomainError("check_calendar requires T1 < T2");
  return C2 > C1;
}

ArbitrageReport penalty_metric(const DerivativePricer& pricer, std::span<const OptionSample> samples,
                               const PenaltyConfig& cfg, double slack, std::size_t worst_k) {
  cfg.validate();
  ArbitrageReport rep;
  rep.samples = samples.size();
  const auto derivs = pricer.evaluate(samples);
  std::vector<Offender> offenders;
  // Fixed-order summation keeps the total reproducible.
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto v = violation_magnitudes(derivs[i], samples[i].K, samples[i].T);
    for (std::size_t c = 0; c < 3; ++c) {
      rep.total += phi(v[c], cfg.lambda[c], cfg.power[c]);
      if (v[c] >= slack) {
        ++rep.counts[c];
        offenders.push_back({i, c, v[c]});
      }
    }
  }
  const auto k = std::min(worst_k, offenders.size());
  std::partial_sort(offenders.begin(), offenders.begin() + static_cast<std::ptrdiff_t>(k), offenders.end(),
                    [](const Offender& a, const Offender& b) {
                      return a.magnitude != b.magnitude ? a.magnitude > b.magnitude : a.sample < b.sample;
                    });
  offenders.resize(k);
  rep.worst = std::move(offenders);
  return rep;
}

void write_report_csv(const ArbitrageReport& report, const std::string& split, const std::filesystem::path& path,
                      bool append) {
  const bool header = !append || !std::filesystem::exists(path);
  std::ofstream out(path, append ? std::ios::app | std::ios::binary : std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  if (header) out << "split,condition,violations,samples\n";
  for (std::size_t c = 0; c < 3; ++c) {
    out << split << ',' << condition_name(c) << ',' << report.counts[c] << ',' << report.samples << '\n';
  }
  out << split << ",total," << report.violation_count() << ',' << report.samples << '\n';
}

std::string report_summary(const ArbitrageReport& report, const std::string& label) {
  std::ostringstream os;
  os << "[arbitrage " << label << "]\n";
  os << "  samples    " << report.samples << '\n';
  for (std::size_t c = 0; c < 3; ++c) os << "  " << condition_name(c) << std::string(11 - std::string(condition_name(c)).size(), ' ') << report.counts[c] << '\n';
  os << "  P          " << report.total << '\n';
  if (!report.worst.empty()) {
    os << "  worst      sample " << report.worst.front().sample << " ("
       << condition_name(report.worst.front().condition) << ", " << report.worst.front().magnitude << ")\n";
  }
  return os.str();
}

}  // namespace annp
