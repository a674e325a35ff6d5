#include "annpricer/bs_oracle.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "annpricer/errors.hpp"

namespace annp {
namespace {

std::atomic<long> g_implied_vol_calls{0};

// Below this total volatility d1/d2 degenerate; the price is its intrinsic limit.
constexpr double kMinTotalVol = 1e-10;

void require_positive(double S, double K, double T, double sigma) {
  if (!(S > 0.0) || !(K > 0.0) || !(T > 0.0) || !(sigma > 0.0)) {
    throw DomainError("Black-Scholes requires S, K, T, sigma > 0 (got S=" + std::to_string(S) +
                      ", K=" + std::to_string(K) + ", T=" + std::to_string(T) +
                      ", sigma=" + std::to_string(sigma) + ")");
  }
}

struct D12 {
  double d1;
  double d2;
  double total_vol;
};

D12 d_terms(double S, double K, double T, double r, double q, double sigma) {
  const double sv = sigma * std::sqrt(T);
  const double d1 = (std::log(S / K) + (r - q + 0.5 * sigma * sigma) * T) / sv;
  return {d1, d1 - sv, sv};
}

// Wichura, Algorithm AS241 (PPND16).
double ppnd16(double p) {
  const double q = p - 0.5;
  if (std::abs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    return q *
           (((((((2509.0809287301226727 * r + 33430.575583588128105) * r + 67265.770927008700853) * r +
                45921.953931549871457) * r + 13731.693765509461125) * r + 1971.5909503065514427) * r +
             133.14166789178437745) * r + 3.387132872796366608) /
           (((((((5226.495278852545925 * r + 28729.085735721942674) * r + 39307.89580009271061) * r +
                21213.794301586595867) * r + 5394.1960214247511077) * r + 687.1870074920579083) * r +
             42.313330701600911252) * r + 1.0);
  }
  double r = q < 0.0 ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double x;
  if (r <= 5.0) {
    r -= 1.6;
    x = (((((((7.7454501427834140764e-4 * r + 0.0227238449892691845833) * r + 0.24178072517745061177) * r +
            1.27045825245236838258) * r + 3.64784832476320460504) * r + 5.7694972214606914055) * r +
          4.6303378461565452959) * r + 1.42343711074968357734) /
        (((((((1.05075007164441684324e-9 * r + 5.475938084995344946e-4) * r + 0.0151986665636164571966) * r +
             0.14810397642748007459) * r + 0.68976733498510000455) * r + 1.6763848301838038494) * r +
          2.05319162663775882187) * r + 1.0);
  } else {
    r -= 5.0;
    x = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r + 0.0012426609473880784386) * r +
            0.026532189526576123093) * r + 0.29656057182850489123) * r + 1.7848265399172913358) * r +
          5.4637849111641143699) * r + 6.6579046435011037772) /
        (((((((2.04426310338993978564e-15 * r + 1.4215117583164458887e-7) * r + 1.8463183175100546818e-5) * r +
             7.868691311456132591e-4) * r + 0.0148753612908506148525) * r + 0.13692988092273580531) * r +
          0.59983220655588793769) * r + 1.0);
  }
  return q < 0.0 ? -x : x;
}

}  // namespace

double norm_pdf(double x) { return std::exp(-0.5 * x * x) * (0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2); }

double norm_cdf(double x) { return 0.5 * std::erfc(-x * (0.5 * std::numbers::sqrt2)); }

double norm_cdf_inv(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw DomainError("norm_cdf_inv requires 0 < p < 1 (got " + std::to_string(p) + ")");
  }
  double x = ppnd16(p);
  const double pdf = norm_pdf(x);
  if (pdf > 0.0) {
    // Residual taken in the tail that holds p so small probabilities keep precision.
    x -= p < 0.5 ? (norm_cdf(x) - p) / pdf : ((1.0 - p) - norm_cdf(-x)) / pdf;
  }
  return x;
}

double call_lower_bound(double S, double K, double T, double r, double q) {
  return std::max(S * std::exp(-q * T) - K * std::exp(-r * T), 0.0);
}

double call_upper_bound(double S, double T, double q) { return S * std::exp(-q * T); }

double bs_call(double S, double K, double T, double r, double q, double sigma) {
  require_positive(S, K, T, sigma);
  const double fwd_s = S * std::exp(-q * T);
  const double disc_k = K * std::exp(-r * T);
  if (sigma * std::sqrt(T) < kMinTotalVol) return std::max(fwd_s - disc_k, 0.0);
  const auto d = d_terms(S, K, T, r, q, sigma);
  return fwd_s * norm_cdf(d.d1) - disc_k * norm_cdf(d.d2);
}

double bs_put(double S, double K, double T, double r, double q, double sigma) {
  require_positive(S, K, T, sigma);
  const double fwd_s = S * std::exp(-q * T);
  const double disc_k = K * std::exp(-r * T);
  if (sigma * std::sqrt(T) < kMinTotalVol) return std::max(disc_k - fwd_s, 0.0);
  const auto d = d_terms(S, K, T, r, q, sigma);
  return disc_k * norm_cdf(-d.d2) - fwd_s * norm_cdf(-d.d1);
}

Greeks bs_greeks(double S, double K, double T, double r, double q, double sigma) {
  require_positive(S, K, T, sigma);
  const double dq = std::exp(-q * T);
  const double dr = std::exp(-r * T);
  Greeks g;
  if (sigma * std::sqrt(T) < kMinTotalVol) {
    const bool itm = S * dq > K * dr;
    g.delta = itm ? dq : 0.0;
    g.dCdK = itm ? -dr : 0.0;
    g.dCdT = itm ? -q * S * dq + r * K * dr : 0.0;
    return g;
  }
  const auto d = d_terms(S, K, T, r, q, sigma);
  const double sqrt_t = std::sqrt(T);
  const double pdf1 = norm_pdf(d.d1);
  const double n1 = norm_cdf(d.d1);
  const double n2 = norm_cdf(d.d2);
  g.delta = dq * n1;
  g.vega = S * dq * pdf1 * sqrt_t;
  g.dCdK = -dr * n2;
  // The strike density is strictly positive; keep its sign when the normal
  // density underflows (|d2| > ~38, deep in the money with tiny sigma sqrt T).
  g.d2CdK2 = std::max(dr * norm_pdf(d.d2) / (K * d.total_vol), std::numeric_limits<double>::denorm_min());
  g.dCdT = S * dq * pdf1 * sigma / (2.0 * sqrt_t) - q * S * dq * n1 + r * K * dr * n2;
  return g;
}

long implied_vol_call_count() { return g_implied_vol_calls.load(std::memory_order_relaxed); }

double implied_vol(double S, double K, double T, double r, double q, double target) {
  g_implied_vol_calls.fetch_add(1, std::memory_order_relaxed);
  if (!(S > 0.0) || !(K > 0.0) || !(T > 0.0)) {
    throw DomainError("implied_vol requires S, K, T > 0");
  }
  const double lo_bound = call_lower_bound(S, K, T, r, q);
  const double hi_bound = call_upper_bound(S, T, q);
  if (!(target > lo_bound && target < hi_bound)) {
    throw NoSolutionError("call price " + std::to_string(target) + " outside no-arbitrage bounds (" +
                          std::to_string(lo_bound) + ", " + std::to_string(hi_bound) + ")");
  }
  auto f = [&](double s) { return bs_call(S, K, T, r, q, s) - target; };

  double lo = 1e-4;
  while (f(lo) > 0.0 && lo > 1e-300) lo *= 0.01;
  double hi = 1.0;
  while (f(hi) < 0.0) {
    hi *= 2.0;
    if (hi > 1e8) throw NoSolutionError("implied_vol: price too close to the upper bound to bracket");
  }
  if (f(lo) > 0.0) return lo;  // target indistinguishable from the intrinsic value

  double x = 0.5 * (lo + hi);
  for (int iter = 0; iter < 500; ++iter) {
    const double fx = f(x);
    if (std::abs(fx) <= 1e-13 * std::max(1.0, target)) return x;
    if (fx < 0.0) {
      lo = x;
    } else {
      hi = x;
    }
    if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * hi) return x;
    const double vega = bs_greeks(S, K, T, r, q, x).vega;
    double next = vega >= 1e-12 ? x - fx / vega : lo - 1.0;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    x = next;
  }
  return x;
}

}  // namespace annp
