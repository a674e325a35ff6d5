#pragma once

// Closed-form Black-Scholes pricing of European calls with a continuous
// dividend yield. Every function here is pure and thread-safe.

namespace annp {

struct OptionSample {
  double S = 0.0;      // spot
  double K = 0.0;      // strike
  double T = 0.0;      // maturity in years
  double r = 0.0;      // continuously compounded rate
  double q = 0.0;      // continuous dividend yield
  double sigma = 0.0;  // annualized volatility
  double C = 0.0;      // call price

  bool operator==(const OptionSample&) const = default;
};

double norm_pdf(double x);

/// Standard normal CDF, evaluated through erfc so that both tails keep full
/// relative precision.
double norm_cdf(double x);

/// Inverse of norm_cdf (Wichura AS241 followed by one Newton polish step).
/// Throws DomainError unless 0 < p < 1.
double norm_cdf_inv(double p);

double bs_call(double S, double K, double T, double r, double q, double sigma);
double bs_put(double S, double K, double T, double r, double q, double sigma);

/// Static no-arbitrage bounds of a call: max(S e^{-qT} - K e^{-rT}, 0) and S e^{-qT}.
double call_lower_bound(double S, double K, double T, double r, double q);
double call_upper_bound(double S, double T, double q);

struct Greeks {
  double delta = 0.0;   // dC/dS
  double vega = 0.0;    // dC/dsigma
  double dCdT = 0.0;
  double dCdK = 0.0;
  double d2CdK2 = 0.0;
};

Greeks bs_greeks(double S, double K, double T, double r, double q, double sigma);

/// Volatility reproducing `target` to 1e-10 absolute. Bisection brackets the
/// root, Newton steps with vega refine it, and any step leaving the bracket
/// (or taken with vega < 1e-12) falls back to bisection.
/// Throws NoSolutionError when `target` is not strictly inside the call bounds.
double implied_vol(double S, double K, double T, double r, double q, double target);

/// Number of implied_vol invocations since process start. Lets callers prove a
/// code path never runs the iterative solver.
long implied_vol_call_count();

}  // namespace annp
