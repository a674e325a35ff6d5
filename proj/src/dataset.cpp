#include "annpricer/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "annpricer/csv.hpp"
#include "annpricer/errors.hpp"
#include "annpricer/random.hpp"

namespace annp {
namespace {

constexpr std::size_t kGenerateChunk = 8192;

void check_range(const char* name, const Range& r, bool must_be_positive) {
  if (!std::isfinite(r.lo) || !std::isfinite(r.hi)) {
    throw ConfigError(std::string("sampling range for ") + name + " is not finite");
  }
  if (r.lo > r.hi) {
    throw ConfigError(std::string("sampling range for ") + name + " has lower bound above upper bound");
  }
  if (must_be_positive && !(r.lo > 0.0)) {
    throw ConfigError(std::string("sampling range for ") + name + " must be strictly positive");
  }
}

std::vector<OptionSample> generate_chunk(std::size_t count, const SamplingRanges& rg, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<OptionSample> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    OptionSample s;
    s.S = uniform(rng, rg.S.lo, rg.S.hi);
    s.K = uniform(rng, rg.K.lo, rg.K.hi);
    s.T = uniform(rng, rg.T.lo, rg.T.hi);
    s.r = uniform(rng, rg.r.lo, rg.r.hi);
    s.q = uniform(rng, rg.q.lo, rg.q.hi);
    s.sigma = uniform(rng, rg.sigma.lo, rg.sigma.hi);
    s.C = bs_call(s.S, s.K, s.T, s.r, s.q, s.sigma);
    if (s.C >= kMinPrice && s.C <= kMaxPrice) out.push_back(s);
  }
  return out;
}

std::size_t chunk_count(std::size_t n) { return (n + kGenerateChunk - 1) / kGenerateChunk; }

std::size_t chunk_size(std::size_t n, std::size_t c) { return std::min(kGenerateChunk, n - c * kGenerateChunk); }

void fill_features(ScaledSet& set, std::size_t col, const OptionSample& s, double last) {
  set.X(0, col) = s.S / s.K;
  set.X(1, col) = s.T;
  set.X(2, col) = s.r;
  set.X(3, col) = s.q;
  set.X(4, col) = last;
}

}  // namespace

void SamplingRanges::validate() const {
  check_range("S", S, true);
  check_range("K", K, true);
  check_range("T", T, true);
  check_range("r", r, false);
  check_range("q", q, false);
  check_range("sigma", sigma, true);
}

std::vector<OptionSample> Dataset::train_samples() const {
  if (!has_split()) return samples;
  std::vector<OptionSample> out;
  out.reserve(partition.train.size());
  for (auto i : partition.train) out.push_back(samples[i]);
  return out;
}

std::vector<OptionSample> Dataset::test_samples() const {
  std::vector<OptionSample> out;
  out.reserve(partition.test.size());
  for (auto i : partition.test) out.push_back(samples[i]);
  return out;
}

Dataset generate(std::size_t n, const SamplingRanges& ranges, std::uint64_t seed) {
  if (n < 1) throw ConfigError("generate: n must be at least 1");
  ranges.validate();
  const std::size_t chunks = chunk_count(n);
  std::vector<std::vector<OptionSample>> parts(chunks);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(chunks); ++c) {
    const auto uc = static_cast<std::size_t>(c);
    parts[uc] = generate_chunk(chunk_size(n, uc), ranges, derive_seed(seed, uc));
  }
  Dataset ds;
  ds.ranges = ranges;
  ds.seed = seed;
  ds.requested = n;
  for (auto& p : parts) ds.samples.insert(ds.samples.end(), p.begin(), p.end());
  return ds;
}

Dataset generate_serial(std::size_t n, const SamplingRanges& ranges, std::uint64_t seed) {
  if (n < 1) throw ConfigError("generate: n must be at least 1");
  ranges.validate();
  Dataset ds;
  ds.ranges = ranges;
  ds.seed = seed;
  ds.requested = n;
  for (std::size_t c = 0; c < chunk_count(n); ++c) {
    auto part = generate_chunk(chunk_size(n, c), ranges, derive_seed(seed, c));
    ds.samples.insert(ds.samples.end(), part.begin(), part.end());
  }
  return ds;
}

Partition split(const Dataset& ds, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw ConfigError("split: fraction must lie in (0, 1)");
  std::vector<std::size_t> order(ds.samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(derive_seed(seed, 0x5b117));
  shuffle(order.begin(), order.end(), rng);
  const auto n_train = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(order.size())));
  Partition p;
  p.fraction = fraction;
  p.seed = seed;
  p.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  p.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  return p;
}

Dataset with_split(Dataset ds, double fraction, std::uint64_t seed) {
  ds.partition = split(ds, fraction, seed);
  return ds;
}

// ---------------------------------------------------------------------------

ScaledSet apply_direct(const std::vector<OptionSample>& samples, const DirectScaling& scaling,
                       const std::vector<std::size_t>& source) {
  ScaledSet set;
  const auto n = samples.size();
  set.X.resize(kFeatureCount, static_cast<Eigen::Index>(n));
  set.y.resize(static_cast<Eigen::Index>(n));
  set.strike.resize(n);
  set.source = source.empty() ? std::vector<std::size_t>(n) : source;
  if (source.empty()) std::iota(set.source.begin(), set.source.end(), std::size_t{0});
  for (std::size_t i = 0; i < n; ++i) {
    const auto& s = samples[i];
    fill_features(set, i, s, s.sigma);
    set.y(static_cast<Eigen::Index>(i)) = scaling.scale_price(s.C, s.K);
    set.strike[i] = s.K;
  }
  return set;
}

DirectData scale_direct(const Dataset& ds) {
  if (ds.samples.empty()) throw ConfigError("scale_direct: empty dataset");
  const auto train = ds.train_samples();
  if (train.empty()) throw ConfigError("scale_direct: empty train split");
  DirectData out;
  double shift = std::numeric_limits<double>::infinity();
  for (const auto& s : train) shift = std::min(shift, s.C / s.K);
  out.scaling.shift = shift;
  std::vector<std::size_t> train_src = ds.has_split() ? ds.partition.train : std::vector<std::size_t>{};
  out.train = apply_direct(train, out.scaling, train_src);
  out.test = apply_direct(ds.test_samples(), out.scaling, ds.partition.test);
  return out;
}

double InverseScaling::target(double moneyness, double T, double sigma) const {
  return norm_cdf(std::log(moneyness) / (sigma * std::sqrt(T)));
}

double InverseScaling::unscale_sigma(double moneyness, double T, double y) const {
  return std::log(moneyness) / (norm_cdf_inv(y) * std::sqrt(T));
}

ScaledSet apply_inverse(const std::vector<OptionSample>& samples, const InverseScaling& scaling,
                        std::size_t* dropped_atm, std::size_t* dropped_saturated) {
  std::vector<std::size_t> keep;
  keep.reserve(samples.size());
  std::size_t atm = 0, saturated = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    if (std::abs(std::log(s.S / s.K)) < scaling.atm_band) {
      ++atm;
      continue;
    }
    const double y = scaling.target(s.S / s.K, s.T, s.sigma);
    if (y < kInverseTargetEps || y > 1.0 - kInverseTargetEps) {
      ++saturated;
      continue;
    }
    keep.push_back(i);
  }
  if (dropped_atm) *dropped_atm = atm;
  if (dropped_saturated) *dropped_saturated = saturated;
  ScaledSet set;
  set.X.resize(kFeatureCount, static_cast<Eigen::Index>(keep.size()));
  set.y.resize(static_cast<Eigen::Index>(keep.size()));
  set.strike.resize(keep.size());
  set.source = keep;
  for (std::size_t j = 0; j < keep.size(); ++j) {
    const auto& s = samples[keep[j]];
    fill_features(set, j, s, scaling.scale_price(s.C, s.K));
    set.y(static_cast<Eigen::Index>(j)) = scaling.target(s.S / s.K, s.T, s.sigma);
    set.strike[j] = s.K;
  }
  return set;
}

InverseData scale_inverse(const Dataset& ds, double atm_band) {
  if (ds.samples.empty()) throw ConfigError("scale_inverse: empty dataset");
  if (!(atm_band >= 0.0)) throw ConfigError("scale_inverse: ATM band must be non-negative");
  const auto train = ds.train_samples();
  if (train.empty()) throw ConfigError("scale_inverse: empty train split");
  InverseData out;
  double shift = std::numeric_limits<double>::infinity();
  for (const auto& s : train) shift = std::min(shift, s.C / s.K);
  out.scaling.shift = shift;
  out.scaling.atm_band = atm_band;
  std::size_t d_train = 0, d_test = 0, s_train = 0, s_test = 0;
  out.train = apply_inverse(train, out.scaling, &d_train, &s_train);
  out.test = apply_inverse(ds.test_samples(), out.scaling, &d_test, &s_test);
  // Map local indices back to dataset indices.
  if (ds.has_split()) {
    for (auto& i : out.train.source) i = ds.partition.train[i];
    for (auto& i : out.test.source) i = ds.partition.test[i];
  }
  out.dropped_atm = d_train + d_test;
  out.dropped_saturated = s_train + s_test;
  return out;
}

// ---------------------------------------------------------------------------

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void save_csv(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "S,K,T,r,q,sigma,C\n";
  for (const auto& s : ds.samples) {
    out << format_double(s.S) << ',' << format_double(s.K) << ',' << format_double(s.T) << ','
        << format_double(s.r) << ',' << format_double(s.q) << ',' << format_double(s.sigma) << ','
        << format_double(s.C) << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    fields.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace

/// Parses one numeric CSV field; shared by the dataset and quote readers.
double parse_field(std::string_view text, std::string_view column, std::size_t line) {
  text = trim(text);
  double v = 0.0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end || text.empty()) {
    throw ParseError("cannot parse column '" + std::string(column) + "' value '" + std::string(text) + "'", line);
  }
  return v;
}

/// Maps required header names to column positions; throws naming the first missing column.
std::vector<std::size_t> map_header(std::string_view header, const std::vector<std::string>& required,
                                    const std::vector<std::string>& optional, std::vector<long>& optional_pos) {
  const auto names = split_fields(header);
  auto find = [&](const std::string& want) -> long {
    for (std::size_t i = 0; i < names.size(); ++i) {
      if (trim(names[i]) == want) return static_cast<long>(i);
    }
    return -1;
  };
  std::vector<std::size_t> pos;
  for (const auto& name : required) {
    const long p = find(name);
    if (p < 0) throw ParseError("missing column '" + name + "'", 1);
    pos.push_back(static_cast<std::size_t>(p));
  }
  optional_pos.clear();
  for (const auto& name : optional) optional_pos.push_back(find(name));
  return pos;
}

std::vector<std::string_view> split_csv_line(std::string_view line) { return split_fields(trim(line)); }

Dataset load_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  Dataset ds;
  if (!std::getline(in, line)) return ds;
  static const std::vector<std::string> cols{"S", "K", "T", "r", "q", "sigma", "C"};
  std::vector<long> unused;
  const auto pos = map_header(line, cols, {}, unused);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto fields = split_csv_line(line);
    double v[7];
    for (std::size_t c = 0; c < cols.size(); ++c) {
      if (pos[c] >= fields.size()) throw ParseError("missing value for column '" + cols[c] + "'", lineno);
      v[c] = parse_field(fields[pos[c]], cols[c], lineno);
    }
    ds.samples.push_back({v[0], v[1], v[2], v[3], v[4], v[5], v[6]});
  }
  ds.requested = ds.samples.size();
  return ds;
}

}  // namespace annp
