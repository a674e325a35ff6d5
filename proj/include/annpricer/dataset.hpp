#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "annpricer/bs_oracle.hpp"

namespace annp {

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

/// Uniform sampling box for (S, K, T, r, q, sigma). A range with lo == hi pins
/// that coordinate.
struct SamplingRanges {
  Range S{5.0, 20.0};
  Range K{5.0, 20.0};
  Range T{0.05, 2.5};
  Range r{0.0, 0.05};
  Range q{0.0, 0.0};
  Range sigma{0.05, 0.8};

  /// Throws ConfigError on inverted bounds or bounds outside the pricer's domain.
  void validate() const;
};

/// Price filter applied to every generated sample.
inline constexpr double kMinPrice = 0.001;
inline constexpr double kMaxPrice = 10.0;

struct Partition {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
  double fraction = 0.0;
  std::uint64_t seed = 0;
};

struct Dataset {
  std::vector<OptionSample> samples;
  Partition partition;  // empty until split()
  SamplingRanges ranges;
  std::uint64_t seed = 0;
  std::size_t requested = 0;  // raw draws before filtering

  bool has_split() const { return !partition.train.empty() || !partition.test.empty(); }
  std::vector<OptionSample> train_samples() const;
  std::vector<OptionSample> test_samples() const;
};

/// Draws `n` parameter vectors, prices them, and keeps those with
/// kMinPrice <= C <= kMaxPrice. Draws are made in fixed-size chunks with
/// per-chunk derived seeds, so the result does not depend on the thread count.
Dataset generate(std::size_t n, const SamplingRanges& ranges, std::uint64_t seed);

/// Serial reference for generate(); same output by construction.
Dataset generate_serial(std::size_t n, const SamplingRanges& ranges, std::uint64_t seed);

/// Deterministic shuffle, then the first round(fraction * size) indices form the train split.
Partition split(const Dataset& ds, double fraction, std::uint64_t seed);

/// Returns a copy of `ds` carrying the partition produced by split().
Dataset with_split(Dataset ds, double fraction, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Network-ready representations.

inline constexpr int kFeatureCount = 5;

/// Column-major design matrix: one column per sample, rows are features.
struct ScaledSet {
  Eigen::MatrixXd X;                  // kFeatureCount x n
  Eigen::VectorXd y;                  // targets
  std::vector<double> strike;         // original K per sample
  std::vector<std::size_t> source;    // index into Dataset::samples

  std::size_t size() const { return static_cast<std::size_t>(y.size()); }
};

/// Direct map: features [S/K, T, r, q, sigma], target C/K - shift - 0.5.
struct DirectScaling {
  double shift = 0.0;  // min of C/K over the train split

  double scale_price(double C, double K) const { return C / K - shift - 0.5; }
  double unscale_price(double c, double K) const { return K * (c + shift + 0.5); }
};

struct DirectData {
  ScaledSet train;
  ScaledSet test;
  DirectScaling scaling;
};

/// Throws ConfigError on an empty dataset. A dataset without a split is
/// treated as all-train.
DirectData scale_direct(const Dataset& ds);
ScaledSet apply_direct(const std::vector<OptionSample>& samples, const DirectScaling& scaling,
                       const std::vector<std::size_t>& source = {});

inline constexpr double kDefaultAtmBand = 1e-3;
/// Inverse targets closer than this to 0 or 1 carry no recoverable sigma in
/// double precision (the normal tail has underflowed); such samples are dropped.
inline constexpr double kInverseTargetEps = 1e-6;

/// Inverse map: features [S/K, T, r, q, c], target N(log(S/K) / (sigma sqrt T)).
/// The price feature reuses the direct transform with its own train-split shift.
struct InverseScaling {
  double shift = 0.0;
  double atm_band = kDefaultAtmBand;

  double target(double moneyness, double T, double sigma) const;
  /// Analytic inverse of target(): sigma = log m / (N^{-1}(y) sqrt T).
  double unscale_sigma(double moneyness, double T, double y) const;
  double scale_price(double C, double K) const { return C / K - shift - 0.5; }
};

struct InverseData {
  ScaledSet train;
  ScaledSet test;
  InverseScaling scaling;
  std::size_t dropped_atm = 0;
  std::size_t dropped_saturated = 0;
};

/// Drops samples with |log(S/K)| < atm_band (target is 0.5 for every sigma
/// there) and samples whose target falls outside [kInverseTargetEps, 1 - kInverseTargetEps].
InverseData scale_inverse(const Dataset& ds, double atm_band = kDefaultAtmBand);
ScaledSet apply_inverse(const std::vector<OptionSample>& samples, const InverseScaling& scaling,
                        std::size_t* dropped_atm = nullptr, std::size_t* dropped_saturated = nullptr);

// ---------------------------------------------------------------------------
// CSV persistence. Header: S,K,T,r,q,sigma,C

void save_csv(const Dataset& ds, const std::filesystem::path& path);
Dataset load_csv(const std::filesystem::path& path);

/// Full-precision decimal text for a double (round-trips exactly).
std::string format_double(double v);

}  // namespace annp
