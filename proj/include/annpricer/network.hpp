#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "annpricer/activation.hpp"

namespace annp {

/// What the network's inputs and output mean, copied from the dataset it was
/// trained on so predictions can be unscaled later.
struct ScalingMeta {
  enum class Kind { None, Direct, Inverse };
  Kind kind = Kind::None;
  double shift = 0.0;     // C/K shift of the price coordinate
  double atm_band = 0.0;  // inverse map only
  double split_fraction = 0.0;
  std::uint64_t split_seed = 0;
};

/// Fully connected feed-forward network. All weights and biases live in one
/// contiguous parameter vector, layer by layer: W_l (column-major, fan_out x
/// fan_in) followed by b_l.
class Network {
 public:
  using Matrix = Eigen::MatrixXd;
  using Vector = Eigen::VectorXd;
  using ConstMatrixMap = Eigen::Map<const Matrix>;
  using MatrixMap = Eigen::Map<Matrix>;
  using ConstVectorMap = Eigen::Map<const Vector>;
  using VectorMap = Eigen::Map<Vector>;

  Network() = default;
  /// widths = [d0, h1, ..., d_out]; one activation per weight layer.
  Network(std::vector<int> widths, std::vector<Activation> activations);

  /// [5, 128, 128, 128, 1] with LeakyReLU(1), MELU(0.49), MELU(0.49), Softplus - 0.5.
  static Network pricing_architecture();

  /// Uniform in +-sqrt(6 / (fan_in + fan_out)) for weights, zero biases.
  void initialize(std::uint64_t seed);

  int input_dim() const { return widths_.front(); }
  int output_dim() const { return widths_.back(); }
  int layer_count() const { return static_cast<int>(activations_.size()); }
  const std::vector<int>& widths() const { return widths_; }
  const std::vector<Activation>& activations() const { return activations_; }

  /// Sum over layers of (fan_in + 1) * fan_out.
  static std::size_t count_parameters(const std::vector<int>& widths);
  std::size_t parameter_count() const { return static_cast<std::size_t>(params_.size()); }

  Vector& parameters() { return params_; }
  const Vector& parameters() const { return params_; }

  ConstMatrixMap weights(int layer) const;
  MatrixMap weights(int layer);
  ConstVectorMap bias(int layer) const;
  VectorMap bias(int layer);
  std::size_t weight_offset(int layer) const { return offsets_[static_cast<std::size_t>(layer)]; }

  /// Single input; throws ShapeError when x.size() != input_dim().
  Vector forward(std::span<const double> x) const;
  /// Column-per-sample batch; result is output_dim x n.
  Matrix forward_batch(const Matrix& X) const;

  ScalingMeta scaling;
  std::uint64_t seed = 0;

 private:
  std::vector<int> widths_;
  std::vector<Activation> activations_;
  std::vector<std::size_t> offsets_;
  Vector params_;
};

/// Versioned text model file. Layout:
///
///   annpricer-model 1
///   widths 5 128 128 128 1
///   activation 0 leaky_relu 1
///   ...
///   scaling direct <shift> <atm_band> <split_fraction> <split_seed>
///   seed <seed>
///   parameters <count>
///   <one value per line, %.17g>
///   end
void save_model(const Network& net, const std::filesystem::path& path);
/// Throws LoadError on version mismatch, unknown tags, or truncated files.
Network load_model(const std::filesystem::path& path);

inline constexpr int kModelFormatVersion = 1;

}  // namespace annp
