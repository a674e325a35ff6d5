#pragma once

// Differentiation of scalar-output networks.
//
// Forward mode propagates truncated univariate Taylor expansions along chosen
// input directions: value, first and (optionally) second directional
// derivative, pushed through each activation with its d1/d2. Reverse mode then
// runs back through that whole Taylor computation, so a loss built from
// (y, dy/dx_i, d2y/dx_i^2) can be differentiated with respect to every weight.
// With no directions this reduces to ordinary back-propagation.

#include <Eigen/Dense>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "annpricer/network.hpp"

namespace annp {

/// An input coordinate along which derivatives are propagated.
struct Direction {
  int input = 0;
  bool second_order = true;
};

/// Output Taylor coefficients for a batch: row k of d1/d2 belongs to
/// direction k; d2 rows of first-order-only directions stay zero.
struct BatchJet {
  Eigen::RowVectorXd y;
  Eigen::MatrixXd d1;
  Eigen::MatrixXd d2;

  static BatchJet zeros(std::size_t directions, Eigen::Index n);
  Eigen::Index size() const { return y.size(); }
};

/// Scalar loss over a column slice of the batch starting at `first_col`. It
/// returns the slice's contribution to the loss and writes d(loss)/d(jet)
/// into `adjoint` (pre-sized, zero-filled).
using JetKernel = std::function<double(const BatchJet& jet, Eigen::Index first_col, BatchJet& adjoint)>;

struct LossGradient {
  double loss = 0.0;
  Eigen::VectorXd gradient;  // same layout as Network::parameters()
};

/// Columns per work item in the parallel kernels. Work is split by this fixed
/// size, never by thread count, and partial gradients are summed in chunk
/// order, so results are identical for any number of threads.
inline constexpr Eigen::Index kDefaultChunk = 256;

/// Taylor forward pass over a batch (output dimension must be 1).
BatchJet forward_jet(const Network& net, const Eigen::MatrixXd& X, std::span<const Direction> dirs,
                     Eigen::Index chunk = kDefaultChunk);

/// Loss and its gradient with respect to all parameters.
LossGradient jet_gradient(const Network& net, const Eigen::MatrixXd& X, std::span<const Direction> dirs,
                          const JetKernel& kernel, Eigen::Index chunk = kDefaultChunk);

/// Single-threaded reference: the whole batch in one pass, no chunking.
namespace serial {
BatchJet forward_jet(const Network& net, const Eigen::MatrixXd& X, std::span<const Direction> dirs);
LossGradient jet_gradient(const Network& net, const Eigen::MatrixXd& X, std::span<const Direction> dirs,
                          const JetKernel& kernel);
}  // namespace serial

/// Plain back-propagation of an output-only loss.
LossGradient grad_params(const Network& net, const Eigen::MatrixXd& X, const JetKernel& loss);

/// Gradient of a loss built from input derivatives along `dirs`.
LossGradient penalty_grad(const Network& net, const Eigen::MatrixXd& X, std::span<const Direction> dirs,
                          const JetKernel& penalty);

/// Output with first and second derivatives along the requested inputs.
struct EvalWithDerivs {
  double y = 0.0;
  std::vector<double> d1;
  std::vector<double> d2;
};

/// Throws ShapeError for a wrong input size or an out-of-range dimension.
EvalWithDerivs input_derivs(const Network& net, std::span<const double> x, std::span<const int> dims);

/// Mean squared error kernel against `targets` (indexed by batch column),
/// normalized by `normalizer` (typically the batch size).
JetKernel mse_kernel(const Eigen::VectorXd& targets, double normalizer);

}  // namespace annp
