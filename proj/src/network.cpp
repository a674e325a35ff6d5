#include "annpricer/network.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "annpricer/dataset.hpp"
#include "annpricer/errors.hpp"
#include "annpricer/random.hpp"

namespace annp {

Network::Network(std::vector<int> widths, std::vector<Activation> activations)
    : widths_(std::move(widths)), activations_(std::move(activations)) {
  if (widths_.size() < 2) throw ConfigError("network needs at least an input and an output width");
  for (int w : widths_) {
    if (w < 1) throw ConfigError("layer widths must be positive");
  }
  if (activations_.size() + 1 != widths_.size()) {
    throw ConfigError("network needs exactly one activation per weight layer");
  }
  std::size_t off = 0;
  for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
    offsets_.push_back(off);
    off += static_cast<std::size_t>(widths_[l] + 1) * static_cast<std::size_t>(widths_[l + 1]);
  }
  params_ = Vector::Zero(static_cast<Eigen::Index>(off));
}

Network Network::pricing_architecture() {
  return Network({kFeatureCount, 128, 128, 128, 1},
                 {Activation::leaky_relu(1.0), Activation::melu(0.49), Activation::melu(0.49),
                  Activation::softplus_shift()});
}

std::size_t Network::count_parameters(const std::vector<int>& widths) {
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    n += static_cast<std::size_t>(widths[l] + 1) * static_cast<std::size_t>(widths[l + 1]);
  }
  return n;
}

void Network::initialize(std::uint64_t s) {
  seed = s;
  std::mt19937_64 rng(derive_seed(s, 0x1417));
  for (int l = 0; l < layer_count(); ++l) {
    const auto li = static_cast<std::size_t>(l);
    const double limit = std::sqrt(6.0 / (widths_[li] + widths_[li + 1]));
    auto W = weights(l);
    for (Eigen::Index j = 0; j < W.cols(); ++j) {
      for (Eigen::Index i = 0; i < W.rows(); ++i) W(i, j) = uniform(rng, -limit, limit);
    }
    bias(l).setZero();
  }
}

Network::ConstMatrixMap Network::weights(int layer) const {
  const auto l = static_cast<std::size_t>(layer);
  return ConstMatrixMap(params_.data() + offsets_[l], widths_[l + 1], widths_[l]);
}

Network::MatrixMap Network::weights(int layer) {
  const auto l = static_cast<std::size_t>(layer);
  return MatrixMap(params_.data() + offsets_[l], widths_[l + 1], widths_[l]);
}

Network::ConstVectorMap Network::bias(int layer) const {
  const auto l = static_cast<std::size_t>(layer);
  return ConstVectorMap(params_.data() + offsets_[l] + static_cast<std::size_t>(widths_[l]) * widths_[l + 1],
                        widths_[l + 1]);
}

Network::VectorMap Network::bias(int layer) {
  const auto l = static_cast<std::size_t>(layer);
  return VectorMap(params_.data() + offsets_[l] + static_cast<std::size_t>(widths_[l]) * widths_[l + 1],
                   widths_[l + 1]);
}

Network::Vector Network::forward(std::span<const double> x) const {
  if (static_cast<int>(x.size()) != input_dim()) {
    throw ShapeError("forward: expected " + std::to_string(input_dim()) + " inputs, got " + std::to_string(x.size()));
  }
  Matrix X = Eigen::Map<const Matrix>(x.data(), input_dim(), 1);
  return forward_batch(X).col(0);
}

Network::Matrix Network::forward_batch(const Matrix& X) const {
  if (X.rows() != input_dim()) {
    throw ShapeError("forward_batch: expected " + std::to_string(input_dim()) + " rows, got " +
                     std::to_string(X.rows()));
  }
  Matrix a = X;
  for (int l = 0; l < layer_count(); ++l) {
    Matrix z = weights(l) * a;
    z.colwise() += bias(l);
    const auto& act = activations_[static_cast<std::size_t>(l)];
    a = z.unaryExpr([&act](double v) { return act.value(v); });
  }
  return a;
}

// ---------------------------------------------------------------------------

namespace {

const char* kind_name(ScalingMeta::Kind k) {
  switch (k) {
    case ScalingMeta::Kind::Direct: return "direct";
    case ScalingMeta::Kind::Inverse: return "inverse";
    case ScalingMeta::Kind::None: break;
  }
  return "none";
}

template <class T>
T read_token(std::istream& in, const char* what) {
  T v{};
  if (!(in >> v)) throw LoadError(std::string("model file truncated or corrupt while reading ") + what);
  return v;
}

void expect(std::istream& in, const std::string& keyword) {
  const auto got = read_token<std::string>(in, keyword.c_str());
  if (got != keyword) throw LoadError("model file: expected '" + keyword + "', found '" + got + "'");
}

double read_double(std::istream& in, const char* what) {
  const auto tok = read_token<std::string>(in, what);
  double v = 0.0;
  const auto* end = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(tok.data(), end, v);
  if (ec != std::errc() || ptr != end) throw LoadError(std::string("model file: bad number for ") + what + ": " + tok);
  return v;
}

}  // namespace

void save_model(const Network& net, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "annpricer-model " << kModelFormatVersion << '\n';
  out << "widths";
  for (int w : net.widths()) out << ' ' << w;
  out << '\n';
  for (int l = 0; l < net.layer_count(); ++l) {
    const auto& a = net.activations()[static_cast<std::size_t>(l)];
    out << "activation " << l << ' ' << a.tag() << ' ' << format_double(a.alpha()) << '\n';
  }
  out << "scaling " << kind_name(net.scaling.kind) << ' ' << format_double(net.scaling.shift) << ' '
      << format_double(net.scaling.atm_band) << ' ' << format_double(net.scaling.split_fraction) << ' '
      << net.scaling.split_seed << '\n';
  out << "seed " << net.seed << '\n';
  out << "parameters " << net.parameter_count() << '\n';
  for (Eigen::Index i = 0; i < net.parameters().size(); ++i) out << format_double(net.parameters()(i)) << '\n';
  out << "end\n";
  if (!out) throw IoError("write failed for " + path.string());
}

Network load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  expect(in, "annpricer-model");
  const int version = read_token<int>(in, "format version");
  if (version != kModelFormatVersion) {
    throw LoadError("unsupported model format version " + std::to_string(version));
  }
  expect(in, "widths");
  std::string line;
  std::getline(in, line);
  std::istringstream ws(line);
  std::vector<int> widths;
  for (int w; ws >> w;) widths.push_back(w);
  if (widths.size() < 2) throw LoadError("model file: need at least two layer widths");

  std::vector<Activation> acts;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    expect(in, "activation");
    const auto idx = read_token<std::size_t>(in, "activation index");
    if (idx != l) throw LoadError("model file: activation entries out of order");
    const auto tag = read_token<std::string>(in, "activation tag");
    const double alpha = read_double(in, "activation alpha");
    try {
      acts.emplace_back(Activation::parse_tag(tag), alpha);
    } catch (const ConfigError& e) {
      throw LoadError(std::string("model file: ") + e.what());
    }
  }
  Network net;
  try {
    net = Network(widths, acts);
  } catch (const ConfigError& e) {
    throw LoadError(std::string("model file: ") + e.what());
  }

  expect(in, "scaling");
  const auto kind = read_token<std::string>(in, "scaling kind");
  if (kind == "direct") {
    net.scaling.kind = ScalingMeta::Kind::Direct;
  } else if (kind == "inverse") {
    net.scaling.kind = ScalingMeta::Kind::Inverse;
  } else if (kind == "none") {
    net.scaling.kind = ScalingMeta::Kind::None;
  } else {
    throw LoadError("model file: unknown scaling kind '" + kind + "'");
  }
  net.scaling.shift = read_double(in, "shift");
  net.scaling.atm_band = read_double(in, "atm band");
  net.scaling.split_fraction = read_double(in, "split fraction");
  net.scaling.split_seed = read_token<std::uint64_t>(in, "split seed");
  expect(in, "seed");
  net.seed = read_token<std::uint64_t>(in, "seed");
  expect(in, "parameters");
  const auto count = read_token<std::size_t>(in, "parameter count");
  if (count != net.parameter_count()) {
    throw LoadError("model file: parameter count " + std::to_string(count) + " does not match architecture (" +
                    std::to_string(net.parameter_count()) + ")");
  }
  for (std::size_t i = 0; i < count; ++i) net.parameters()(static_cast<Eigen::Index>(i)) = read_double(in, "weight");
  expect(in, "end");
  return net;
}

}  // namespace annp
