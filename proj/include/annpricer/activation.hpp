#pragma once

#include <string>

namespace annp {

enum class ActivationKind { LeakyReLU, ELU, MELU, SoftplusShift };

/// Value and the first three derivatives at one point. The third derivative
/// is needed only when back-propagating through second-order input derivatives.
struct ActivationJet {
  double f = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;
  double d3 = 0.0;
};

/// Activation tag plus its shape parameter. MELU requires 0 < alpha < 0.5.
class Activation {
 public:
  Activation() = default;
  Activation(ActivationKind kind, double alpha);

  static Activation leaky_relu(double alpha = 1.0) { return {ActivationKind::LeakyReLU, alpha}; }
  static Activation elu(double alpha = 1.0) { return {ActivationKind::ELU, alpha}; }
  static Activation melu(double alpha = 0.49) { return {ActivationKind::MELU, alpha}; }
  static Activation softplus_shift() { return {ActivationKind::SoftplusShift, 0.0}; }

  ActivationKind kind() const { return kind_; }
  double alpha() const { return alpha_; }

  double value(double z) const { return eval(z).f; }
  ActivationJet eval(double z) const;

  /// Tag as written to model files: leaky_relu, elu, melu, softplus_shift.
  std::string tag() const;
  /// Throws LoadError naming an unknown tag.
  static ActivationKind parse_tag(const std::string& tag);

  bool operator==(const Activation&) const = default;

 private:
  ActivationKind kind_ = ActivationKind::LeakyReLU;
  double alpha_ = 1.0;
  // MELU rational-branch constants: a = 1 - 2 alpha, b = 1/alpha - 2.
  double a_ = 0.0;
  double b_ = 0.0;
};

// Modified ELU with R'(0) = R''(0) = alpha:
//   (z^2/2 + a z) / (z + b)   for z > 0
//   alpha (e^z - 1)           for z <= 0
double melu(double z, double alpha);
double melu_d1(double z, double alpha);
double melu_d2(double z, double alpha);

}  // namespace annp
