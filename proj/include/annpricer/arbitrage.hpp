#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "annpricer/bs_oracle.hpp"
#include "annpricer/network.hpp"
#include "annpricer/penalty.hpp"

namespace annp {

/// Price and the strike/maturity sensitivities the no-arbitrage conditions use.
struct PriceDerivs {
  double C = 0.0;
  double dCdK = 0.0;
  double d2CdK2 = 0.0;
  double dCdT = 0.0;
};

enum Condition : std::size_t { kButterfly = 0, kCalendar = 1, kVertical = 2 };

inline const char* condition_name(std::size_t c) {
  static const char* names[] = {"butterfly", "calendar", "vertical"};
  return names[c];
}

/// Normalized violation magnitudes {-K^2 C_KK, -T C_T, K C_K}; a condition is
/// violated when its entry is >= 0.
std::array<double, 3> violation_magnitudes(const PriceDerivs& d, double K, double T);

/// Strike/maturity derivatives of C = K (c + shift + 0.5) from derivatives of
/// the scaled network output c with respect to moneyness m = S/K and T.
/// This is the single mapping used both by training penalties and by audits.
PriceDerivs price_derivs_from_scaled(double K, double m, double c, double dc_dm, double d2c_dm2, double dc_dT,
                                     double shift);

/// A pricing function that can report PriceDerivs for a batch of samples
/// (the stored C and sigma of each sample are inputs; C is ignored).
class DerivativePricer {
 public:
  virtual ~DerivativePricer() = default;
  virtual std::vector<PriceDerivs> evaluate(std::span<const OptionSample> samples) const = 0;
};

class BlackScholesPricer final : public DerivativePricer {
 public:
  std::vector<PriceDerivs> evaluate(std::span<const OptionSample> samples) const override;
};

/// Direct-map network pricer; unscales with the network's stored shift.
class NetworkPricer final : public DerivativePricer {
 public:
  explicit NetworkPricer(const Network& net) : net_(net) {}
  std::vector<PriceDerivs> evaluate(std::span<const OptionSample> samples) const override;

 private:
  const Network& net_;
};

/// Strict-inequality outcome per condition; `true` means the condition holds.
struct DifferentialFlags {
  bool butterfly = false;  // d2C/dK2 > 0
  bool calendar = false;   // dC/dT > 0
  bool vertical = false;   // dC/dK < 0
  int violations() const { return !butterfly + !calendar + !vertical; }
};

/// `slack` >= 0 tolerates normalized violations below it (default 0: raw strict test).
DifferentialFlags check_differential(const PriceDerivs& d, double K, double T, double slack = 0.0);
DifferentialFlags check_differential(const DerivativePricer& pricer, const OptionSample& sample, double slack = 0.0);

struct DiscreteFlags {
  bool positive = false;   // C(K3) > 0
  bool vertical = false;   // C(K2) > C(K3)
  bool butterfly = false;  // (K3-K2) C1 - (K3-K1) C2 + (K2-K1) C3 > 0
  bool all() const { return positive && vertical && butterfly; }
};

/// Throws DomainError unless K1 < K2 < K3.
DiscreteFlags check_discrete(std::array<double, 3> strikes, std::array<double, 3> prices);
double butterfly_value(std::array<double, 3> strikes, std::array<double, 3> prices);

/// C(T2) > C(T1); throws DomainError unless T1 < T2.
bool check_calendar(double T1, double C1, double T2, double C2);

struct Offender {
  std::size_t sample = 0;
  std::size_t condition = 0;
  double magnitude = 0.0;
};

struct ArbitrageReport {
  std::array<std::size_t, 3> counts{0, 0, 0};
  double total = 0.0;  // P_{lambda,m}
  std::size_t samples = 0;
  std::vector<Offender> worst;  // largest normalized violations, descending

  std::size_t violation_count() const { return counts[0] + counts[1] + counts[2]; }
};

/// P = sum over samples of phi applied to the three normalized magnitudes.
/// With PenaltyConfig::counting() the total equals violation_count().
ArbitrageReport penalty_metric(const DerivativePricer& pricer, std::span<const OptionSample> samples,
                               const PenaltyConfig& cfg = PenaltyConfig::counting(), double slack = 0.0,
                               std::size_t worst_k = 10);

/// One row per condition plus a total row: condition,violations,samples.
void write_report_csv(const ArbitrageReport& report, const std::string& split, const std::filesystem::path& path,
                      bool append = false);
std::string report_summary(const ArbitrageReport& report, const std::string& label);

}  // namespace annp
