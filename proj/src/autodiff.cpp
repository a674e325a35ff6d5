#include "annpricer/autodiff.hpp"

#include <algorithm>

#include "annpricer/errors.hpp"

namespace annp {
namespace {

using Matrix = Eigen::MatrixXd;

/// Block layout of a stacked activation matrix: [value | first-order per
/// direction | second-order per second-order direction], each n columns wide.
struct Layout {
  Eigen::Index n = 0;
  std::size_t dirs = 0;
  std::vector<int> second_slot;  // block index of the second-order block, -1 if none
  std::size_t blocks = 1;

  Layout(Eigen::Index cols, std::span<const Direction> ds) : n(cols), dirs(ds.size()) {
    blocks = 1 + dirs;
    for (const auto& d : ds) second_slot.push_back(d.second_order ? static_cast<int>(blocks++) : -1);
  }
  Eigen::Index col(std::size_t block) const { return static_cast<Eigen::Index>(block) * n; }
  Eigen::Index width() const { return static_cast<Eigen::Index>(blocks) * n; }
};

struct LayerTape {
  Matrix input;  // stacked activations entering the layer
  Matrix z;      // stacked pre-activations
  Matrix f1, f2, f3;
};

struct Tape {
  std::vector<LayerTape> layers;
  Matrix output;  // stacked output activations (1 x width)
};

void check_input(const Network& net, const Matrix& X, std::span<const Direction> dirs) {
  if (net.output_dim() != 1) throw ShapeError("Taylor propagation supports scalar-output networks only");
  if (X.rows() != net.input_dim()) {
    throw ShapeError("expected " + std::to_string(net.input_dim()) + " input rows, got " + std::to_string(X.rows()));
  }
  for (const auto& d : dirs) {
    if (d.input < 0 || d.input >= net.input_dim()) {
      throw ShapeError("derivative direction " + std::to_string(d.input) + " is not an input dimension");
    }
  }
}

Tape run_forward(const Network& net, const Eigen::Ref<const Matrix>& X, std::span<const Direction> dirs,
                 const Layout& lay) {
  const Eigen::Index n = lay.n;
  Tape tape;
  tape.layers.resize(static_cast<std::size_t>(net.layer_count()));

  Matrix a = Matrix::Zero(X.rows(), lay.width());
  a.leftCols(n) = X;
  for (std::size_t d = 0; d < lay.dirs; ++d) a.row(dirs[d].input).segment(lay.col(1 + d), n).setOnes();

  for (int l = 0; l < net.layer_count(); ++l) {
    auto& t = tape.layers[static_cast<std::size_t>(l)];
    t.input = std::move(a);
    t.z.noalias() = net.weights(l) * t.input;
    t.z.leftCols(n).colwise() += net.bias(l);

    const auto& act = net.activations()[static_cast<std::size_t>(l)];
    const Eigen::Index h = t.z.rows();
    t.f1.resize(h, n);
    t.f2.resize(h, n);
    t.f3.resize(h, n);
    a.resize(h, lay.width());
    for (Eigen::Index j = 0; j < n; ++j) {
      for (Eigen::Index i = 0; i < h; ++i) {
        const auto jet = act.eval(t.z(i, j));
        a(i, j) = jet.f;
        t.f1(i, j) = jet.d1;
        t.f2(i, j) = jet.d2;
        t.f3(i, j) = jet.d3;
      }
    }
    for (std::size_t d = 0; d < lay.dirs; ++d) {
      const auto zd = t.z.middleCols(lay.col(1 + d), n);
      a.middleCols(lay.col(1 + d), n) = t.f1.cwiseProduct(zd);
      if (const int s = lay.second_slot[d]; s >= 0) {
        const auto zs = t.z.middleCols(lay.col(static_cast<std::size_t>(s)), n);
        a.middleCols(lay.col(static_cast<std::size_t>(s)), n) =
            t.f2.cwiseProduct(zd.cwiseProduct(zd)) + t.f1.cwiseProduct(zs);
      }
    }
  }
  tape.output = std::move(a);
  return tape;
}

BatchJet extract_jet(const Matrix& out, const Layout& lay) {
  BatchJet jet = BatchJet::zeros(lay.dirs, lay.n);
  jet.y = out.row(0).head(lay.n);
  for (std::size_t d = 0; d < lay.dirs; ++d) {
    jet.d1.row(static_cast<Eigen::Index>(d)) = out.row(0).segment(lay.col(1 + d), lay.n);
    if (const int s = lay.second_slot[d]; s >= 0) {
      jet.d2.row(static_cast<Eigen::Index>(d)) = out.row(0).segment(lay.col(static_cast<std::size_t>(s)), lay.n);
    }
  }
  return jet;
}

void run_backward(const Network& net, const Tape& tape, const Layout& lay, const BatchJet& adj,
                  Eigen::Ref<Eigen::VectorXd> grad) {
  const Eigen::Index n = lay.n;
  Matrix abar = Matrix::Zero(1, lay.width());
  abar.leftCols(n) = adj.y;
  for (std::size_t d = 0; d < lay.dirs; ++d) {
    abar.middleCols(lay.col(1 + d), n) = adj.d1.row(static_cast<Eigen::Index>(d));
    if (const int s = lay.second_slot[d]; s >= 0) {
      abar.middleCols(lay.col(static_cast<std::size_t>(s)), n) = adj.d2.row(static_cast<Eigen::Index>(d));
    }
  }

  Matrix zbar;
  for (int l = net.layer_count() - 1; l >= 0; --l) {
    const auto& t = tape.layers[static_cast<std::size_t>(l)];
    zbar.resize(t.z.rows(), lay.width());
    auto z0 = zbar.leftCols(n);
    z0 = t.f1.cwiseProduct(abar.leftCols(n));
    for (std::size_t d = 0; d < lay.dirs; ++d) {
      const auto zd = t.z.middleCols(lay.col(1 + d), n);
      const auto ad = abar.middleCols(lay.col(1 + d), n);
      z0 += t.f2.cwiseProduct(zd).cwiseProduct(ad);
      zbar.middleCols(lay.col(1 + d), n) = t.f1.cwiseProduct(ad);
      if (const int s = lay.second_slot[d]; s >= 0) {
        const auto so = lay.col(static_cast<std::size_t>(s));
        const auto zs = t.z.middleCols(so, n);
        const auto as = abar.middleCols(so, n);
        z0 += (t.f3.cwiseProduct(zd.cwiseProduct(zd)) + t.f2.cwiseProduct(zs)).cwiseProduct(as);
        zbar.middleCols(lay.col(1 + d), n) += 2.0 * t.f2.cwiseProduct(zd).cwiseProduct(as);
        zbar.middleCols(so, n) = t.f1.cwiseProduct(as);
      }
    }

    const auto off = static_cast<Eigen::Index>(net.weight_offset(l));
    const Eigen::Index rows = t.z.rows();
    const Eigen::Index cols = t.input.rows();
    Eigen::Map<Matrix> gW(grad.data() + off, rows, cols);
    gW.noalias() += zbar * t.input.transpose();
    grad.segment(off + rows * cols, rows) += zbar.leftCols(n).rowwise().sum();
    if (l > 0) abar.noalias() = net.weights(l).transpose() * zbar;
  }
}

}  // namespace

BatchJet BatchJet::zeros(std::size_t directions, Eigen::Index n) {
  BatchJet j;
  j.y = Eigen::RowVectorXd::Zero(n);
  j.d1 = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(directions), n);
  j.d2 = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(directions), n);
  return j;
}

namespace serial {

BatchJet forward_jet(const Network& net, const Eigen::MatrixXd& X, std::span<const Direction> dirs) {
  check_input(net, X, dirs);
  const Layout lay(X.cols(), dirs);
  return extract_jet(run_forward(net, X, dirs, lay).output, lay);
}

LossGradient jet_gradient(const Network& net, const Eigen::MatrixXd& X, std::span<const Direction> dirs,
                          const JetKernel& kernel) {
  check_input(net, X, dirs);
  const Layout lay(X.cols(), dirs);
  const Tape tape = run_forward(net, X, dirs, lay);
  const BatchJet jet = extract_jet(tape.output, lay);
  BatchJet adj = BatchJet::zeros(lay.dirs, lay.n);
  LossGradient out;
  out.loss = kernel(jet, 0, adj);
  out.gradient = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(net.parameter_count()));
  run_backward(net, tape, lay, adj, out.gradient);
  return out;
}

}  // namespace serial

BatchJet forward_jet(const Network& net, const Eigen::MatrixXd& X, std::span<const Direction> dirs,
                     Eigen::Index chunk) {
  check_input(net, X, dirs);
  const Eigen::Index n = X.cols();
  if (chunk <= 0) chunk = kDefaultChunk;
  BatchJet out = BatchJet::zeros(dirs.size(), n);
  const Eigen::Index chunks = (n + chunk - 1) / chunk;
#pragma omp parallel for schedule(dynamic)
  for (Eigen::Index c = 0; c < chunks; ++c) {
    const Eigen::Index begin = c * chunk;
    const Eigen::Index len = std::min(chunk, n - begin);
    const Layout lay(len, dirs);
    const BatchJet part = extract_jet(run_forward(net, X.middleCols(begin, len), dirs, lay).output, lay);
    out.y.segment(begin, len) = part.y;
    out.d1.middleCols(begin, len) = part.d1;
    out.d2.middleCols(begin, len) = part.d2;
  }
  return out;
}

LossGradient jet_gradient(const Network& net, const Eigen::MatrixXd& X, std::span<const Direction> dirs,
                          const JetKernel& kernel, Eigen::Index chunk) {
  check_input(net, X, dirs);
  const Eigen::Index n = X.cols();
  if (chunk <= 0) chunk = kDefaultChunk;
  const Eigen::Index chunks = std::max<Eigen::Index>(1, (n + chunk - 1) / chunk);
  const auto P = static_cast<Eigen::Index>(net.parameter_count());
  if (chunks == 1) return serial::jet_gradient(net, X, dirs, kernel);

  Eigen::MatrixXd partial = Eigen::MatrixXd::Zero(P, chunks);
  std::vector<double> losses(static_cast<std::size_t>(chunks), 0.0);
#pragma omp parallel for schedule(dynamic)
  for (Eigen::Index c = 0; c < chunks; ++c) {
    const Eigen::Index begin = c * chunk;
    const Eigen::Index len = std::min(chunk, n - begin);
    const Layout lay(len, dirs);
    const Tape tape = run_forward(net, X.middleCols(begin, len), dirs, lay);
    const BatchJet jet = extract_jet(tape.output, lay);
    BatchJet adj = BatchJet::zeros(lay.dirs, len);
    losses[static_cast<std::size_t>(c)] = kernel(jet, begin, adj);
    run_backward(net, tape, lay, adj, partial.col(c));
  }
  LossGradient out;
  out.gradient = Eigen::VectorXd::Zero(P);
  for (Eigen::Index c = 0; c < chunks; ++c) {
    out.loss += losses[static_cast<std::size_t>(c)];
    out.gradient += partial.col(c);
  }
  return out;
}

LossGradient grad_params(const Network& net, const Eigen::MatrixXd& X, const JetKernel& loss) {
  return jet_gradient(net, X, {}, loss);
}

LossGradient penalty_grad(const Network& net, const Eigen::MatrixXd& X, std::span<const Direction> dirs,
                          const JetKernel& penalty) {
  return jet_gradient(net, X, dirs, penalty);
}

EvalWithDerivs input_derivs(const Network& net, std::span<const double> x, std::span<const int> dims) {
  if (static_cast<int>(x.size()) != net.input_dim()) {
    throw ShapeError("input_derivs: expected " + std::to_string(net.input_dim()) + " inputs, got " +
                     std::to_string(x.size()));
  }
  std::vector<Direction> dirs;
  for (int d : dims) dirs.push_back({d, true});
  const Eigen::MatrixXd X = Eigen::Map<const Eigen::MatrixXd>(x.data(), net.input_dim(), 1);
  const BatchJet jet = serial::forward_jet(net, X, dirs);
  EvalWithDerivs out;
  out.y = jet.y(0);
  for (std::size_t k = 0; k < dirs.size(); ++k) {
    out.d1.push_back(jet.d1(static_cast<Eigen::Index>(k), 0));
    out.d2.push_back(jet.d2(static_cast<Eigen::Index>(k), 0));
  }
  return out;
}

JetKernel mse_kernel(const Eigen::VectorXd& targets, double normalizer) {
  return [targets, normalizer](const BatchJet& jet, Eigen::Index first, BatchJet& adj) {
    double loss = 0.0;
    for (Eigen::Index j = 0; j < jet.size(); ++j) {
      const double e = jet.y(j) - targets(first + j);
      loss += e * e;
      adj.y(j) = 2.0 * e / normalizer;
    }
    return loss / normalizer;
  };
}

}  // namespace annp
