#include "annpricer/activation.hpp"

#include <cmath>

#include "annpricer/errors.hpp"

namespace annp {
namespace {

ActivationJet melu_jet(double z, double alpha, double a, double b) {
  if (z <= 0.0) {
    const double e = alpha * std::exp(z);
    return {e - alpha, e, e, e};
  }
  const double w = z + b;
  const double w2 = w * w;
  const double c = b * (b - 2.0 * a);
  return {(0.5 * z * z + a * z) / w, (0.5 * z * z + b * z + a * b) / w2, c / (w2 * w), -3.0 * c / (w2 * w2)};
}

void check_melu_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 0.5)) {
    throw ConfigError("MELU alpha must lie in (0, 0.5), got " + std::to_string(alpha));
  }
}

}  // namespace

Activation::Activation(ActivationKind kind, double alpha) : kind_(kind), alpha_(alpha) {
  switch (kind) {
    case ActivationKind::MELU:
      check_melu_alpha(alpha);
      a_ = 1.0 - 2.0 * alpha;
      b_ = 1.0 / alpha - 2.0;
      break;
    case ActivationKind::ELU:
    case ActivationKind::LeakyReLU:
      if (!std::isfinite(alpha)) throw ConfigError("activation alpha must be finite");
      break;
    case ActivationKind::SoftplusShift:
      alpha_ = 0.0;
      break;
  }
}

ActivationJet Activation::eval(double z) const {
  switch (kind_) {
    case ActivationKind::LeakyReLU:
      return z > 0.0 ? ActivationJet{z, 1.0, 0.0, 0.0} : ActivationJet{alpha_ * z, alpha_, 0.0, 0.0};
    case ActivationKind::ELU:
      if (z > 0.0) return {z, 1.0, 0.0, 0.0};
      {
        const double e = alpha_ * std::exp(z);
        return {e - alpha_, e, e, e};
      }
    case ActivationKind::MELU:
      return melu_jet(z, alpha_, a_, b_);
    case ActivationKind::SoftplusShift: {
      // log(1 + e^z) without overflow.
      const double sp = z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
      const double s = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
      const double ds = s * (1.0 - s);
      return {sp - 0.5, s, ds, ds * (1.0 - 2.0 * s)};
    }
  }
  return {};
}

std::string Activation::tag() const {
  switch (kind_) {
    case ActivationKind::LeakyReLU: return "leaky_relu";
    case ActivationKind::ELU: return "elu";
    case ActivationKind::MELU: return "melu";
    case ActivationKind::SoftplusShift: return "softplus_shift";
  }
  return "?";
}

ActivationKind Activation::parse_tag(const std::string& tag) {
  if (tag == "leaky_relu") return ActivationKind::LeakyReLU;
  if (tag == "elu") return ActivationKind::ELU;
  if (tag == "melu") return ActivationKind::MELU;
  if (tag == "softplus_shift") return ActivationKind::SoftplusShift;
  throw LoadError("unknown activation tag '" + tag + "'");
}

double melu(double z, double alpha) { return Activation::melu(alpha).eval(z).f; }
double melu_d1(double z, double alpha) { return Activation::melu(alpha).eval(z).d1; }
double melu_d2(double z, double alpha) { return Activation::melu(alpha).eval(z).d2; }

}  // namespace annp
