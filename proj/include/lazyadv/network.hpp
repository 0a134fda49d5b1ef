#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <span>

#include "lazyadv/core_math.hpp"

namespace lazyadv {

/// Two-layer ReLU network f(x) = m^{-1/2} * sum_s a_s * relu(w_s . x) with a
/// frozen sign top layer `a`, trainable bottom layer W (d x m, column s is
/// neuron s) and the initialization snapshot W0. No bias terms.
template <typename Scalar>
class BasicNetwork {
  static_assert(is_wide_float_v<Scalar>, "accumulation requires >= 64-bit floats");

 public:
  using scalar_type = Scalar;

  BasicNetwork(VectorX<Scalar> signs, MatrixX<Scalar> initial)
      : a_(std::move(signs)), W_(initial), W0_(std::move(initial)) {
    validate();
  }

  BasicNetwork(VectorX<Scalar> signs, MatrixX<Scalar> weights, MatrixX<Scalar> initial)
      : a_(std::move(signs)), W_(std::move(weights)), W0_(std::move(initial)) {
    validate();
  }

  Index dim() const { return W_.rows(); }
  Index width() const { return W_.cols(); }

  const VectorX<Scalar>& signs() const { return a_; }
  const MatrixX<Scalar>& weights() const { return W_; }
  MatrixX<Scalar>& weights() { return W_; }
  const MatrixX<Scalar>& initial_weights() const { return W0_; }

  Scalar inv_sqrt_width() const { return Scalar(1) / std::sqrt(Scalar(width())); }

 private:
  void validate() const {
    if (W0_.rows() < 1 || W0_.cols() < 1) throw InvalidDimension("network needs d, m >= 1");
    if (W_.rows() != W0_.rows() || W_.cols() != W0_.cols())
      throw InvalidDimension("W and W0 must share dimensions");
    if (a_.size() != W_.cols()) throw InvalidDimension("top layer length must equal width");
    for (Index s = 0; s < a_.size(); ++s)
      if (a_[s] != Scalar(1) && a_[s] != Scalar(-1))
        throw InvalidArgument("top layer entries must be +1 or -1");
  }

  VectorX<Scalar> a_;
  MatrixX<Scalar> W_;
  MatrixX<Scalar> W0_;
};

using Network = BasicNetwork<double>;

/// Lazy-regime radius: either C0 / sqrt(m) or a free radius V.
struct LazyBudget {
  double C0 = 0.0;
  double radius = 0.0;

  static LazyBudget from_c0(double c0, Index m) {
    if (!(c0 >= 0)) throw InvalidArgument("C0 must be >= 0");
    return {c0, c0 / std::sqrt(static_cast<double>(m))};
  }
  static LazyBudget from_radius(double v, Index m) {
    if (!(v >= 0)) throw InvalidArgument("lazy radius must be >= 0");
    return {v * std::sqrt(static_cast<double>(m)), v};
  }
};

/// a ~ unif{-1,+1}^m, then each column w_s ~ N(0, I_d); W0 = W.
Network init_network(Rng& rng, Index d, Index m);

namespace detail {
template <typename Net, typename X>
void check_input(const Net& net, const Eigen::MatrixBase<X>& x) {
  if (x.rows() != net.dim())
    throw InvalidArgument("input dimension " + std::to_string(x.rows()) +
                          " does not match network dimension " + std::to_string(net.dim()));
}
}  // namespace detail

/// Network output at a single input.
template <typename Scalar, typename X>
Scalar forward(const BasicNetwork<Scalar>& net, const Eigen::MatrixBase<X>& x) {
  detail::check_input(net, x);
  const VectorX<Scalar> z = net.weights().transpose() * x;
  return net.signs().dot(z.cwiseMax(Scalar(0))) * net.inv_sqrt_width();
}

/// Network outputs for every column of X.
template <typename Scalar, typename X>
VectorX<Scalar> forward_batch(const BasicNetwork<Scalar>& net, const Eigen::MatrixBase<X>& X_) {
  detail::check_input(net, X_);
  const MatrixX<Scalar> Z = net.weights().transpose() * X_;
  return (Z.cwiseMax(Scalar(0)).transpose() * net.signs()) * net.inv_sqrt_width();
}

/// Gradient of f with respect to the input; relu'(0) = 0.
template <typename Scalar, typename X>
VectorX<Scalar> input_gradient(const BasicNetwork<Scalar>& net, const Eigen::MatrixBase<X>& x) {
  detail::check_input(net, x);
  const VectorX<Scalar> z = net.weights().transpose() * x;
  const VectorX<Scalar> gate =
      (z.array() > Scalar(0)).select(net.signs().array(), Scalar(0)).matrix();
  return net.weights() * gate * net.inv_sqrt_width();
}

/// Output and input gradient from one pass over the neurons.
template <typename Scalar, typename X>
std::pair<Scalar, VectorX<Scalar>> forward_and_gradient(const BasicNetwork<Scalar>& net,
                                                        const Eigen::MatrixBase<X>& x) {
  detail::check_input(net, x);
  const VectorX<Scalar> z = net.weights().transpose() * x;
  const Scalar f = net.signs().dot(z.cwiseMax(Scalar(0))) * net.inv_sqrt_width();
  const VectorX<Scalar> gate =
      (z.array() > Scalar(0)).select(net.signs().array(), Scalar(0)).matrix();
  return {f, net.weights() * gate * net.inv_sqrt_width()};
}

/// Input gradients for every column of X (d x n).
template <typename Scalar, typename X>
MatrixX<Scalar> input_gradient_batch(const BasicNetwork<Scalar>& net,
                                     const Eigen::MatrixBase<X>& X_) {
  detail::check_input(net, X_);
  const MatrixX<Scalar> Z = net.weights().transpose() * X_;
  MatrixX<Scalar> gates(Z.rows(), Z.cols());
  for (Index i = 0; i < Z.cols(); ++i)
    gates.col(i) = (Z.col(i).array() > Scalar(0)).select(net.signs().array(), Scalar(0));
  return net.weights() * gates * net.inv_sqrt_width();
}

inline void check_label(int y) {
  if (y != 1 && y != -1) throw InvalidLabel("labels must be +1 or -1, got " + std::to_string(y));
}

/// ln(1 + exp(-y f(x))).
template <typename Scalar, typename X>
Scalar logistic_loss(const BasicNetwork<Scalar>& net, const Eigen::MatrixBase<X>& x, int y) {
  check_label(y);
  return static_cast<Scalar>(softplus(-static_cast<double>(y) * forward(net, x)));
}

/// Mean logistic loss over the columns of X with labels y.
template <typename Scalar, typename X>
Scalar mean_logistic_loss(const BasicNetwork<Scalar>& net, const Eigen::MatrixBase<X>& X_,
                          std::span<const std::int8_t> y) {
  if (static_cast<Index>(y.size()) != X_.cols() || y.empty())
    throw InvalidArgument("batch and labels must be nonempty and of equal length");
  const VectorX<Scalar> f = forward_batch(net, X_);
  double total = 0.0;
  for (Index i = 0; i < f.size(); ++i) {
    check_label(y[i]);
    total += softplus(-static_cast<double>(y[i]) * f[i]);
  }
  return static_cast<Scalar>(total / static_cast<double>(f.size()));
}

/// Gradient in W of the mean logistic loss over a batch. Column s is
/// mean_i[-y_i * sigmoid(-y_i f(x_i)) * a_s * 1[w_s . x_i > 0] * x_i] / sqrt(m).
/// The top layer is never differentiated.
template <typename Scalar, typename X>
MatrixX<Scalar> weight_gradient(const BasicNetwork<Scalar>& net, const Eigen::MatrixBase<X>& X_,
                                std::span<const std::int8_t> y) {
  detail::check_input(net, X_);
  const Index n = X_.cols();
  if (n == 0 || static_cast<Index>(y.size()) != n)
    throw InvalidArgument("batch and labels must be nonempty and of equal length");
  const MatrixX<Scalar> Z = net.weights().transpose() * X_;  // m x n
  const VectorX<Scalar> f = (Z.cwiseMax(Scalar(0)).transpose() * net.signs()) * net.inv_sqrt_width();
  MatrixX<Scalar> coef(n, net.width());
  const Scalar scale = net.inv_sqrt_width() / static_cast<Scalar>(n);
  for (Index i = 0; i < n; ++i) {
    check_label(y[i]);
    const double yi = y[i];
    const Scalar c = static_cast<Scalar>(-yi * sigmoid(-yi * f[i])) * scale;
    coef.row(i) = (Z.col(i).array() > Scalar(0)).select(c * net.signs().array(), Scalar(0)).transpose();
  }
  return X_ * coef;
}

/// max_s ||w_s - w_{s,0}||, the (2, inf) distance from initialization.
template <typename Scalar>
Scalar lazy_deviation(const BasicNetwork<Scalar>& net) {
  return (net.weights() - net.initial_weights()).colwise().norm().maxCoeff();
}

/// Projects every column onto the ball B(w_{s,0}, radius), in place.
template <typename Scalar>
void project_weights_inplace(BasicNetwork<Scalar>& net, Scalar radius) {
  if (!(radius >= Scalar(0))) throw InvalidArgument("negative projection radius");
  auto& W = net.weights();
  const auto& W0 = net.initial_weights();
  for (Index s = 0; s < W.cols(); ++s) {
    auto col = W.col(s);
    project_to_ball_inplace(col, W0.col(s), radius);
  }
}

template <typename Scalar>
BasicNetwork<Scalar> project_weights(BasicNetwork<Scalar> net, Scalar radius) {
  project_weights_inplace(net, radius);
  return net;
}

/// The network with W replaced by rW (W0 unchanged). Positive homogeneity
/// gives f(x; a, rW) = r f(x; a, W).
template <typename Scalar>
BasicNetwork<Scalar> cone_scale(const BasicNetwork<Scalar>& net, Scalar r) {
  if (!(r > Scalar(0))) throw InvalidArgument("cone scale factor must be > 0");
  return BasicNetwork<Scalar>(net.signs(), r * net.weights(), net.initial_weights());
}

// ---------------------------------------------------------------------------
// Checkpoint container (little-endian):
//   bytes 0-3   magic "LZCK"
//   u32         format version (1)
//   u64 d, u64 m, u64 seed, f64 C0
//   i8[m]       top-layer signs
//   f64[d*m]    W, column-major
//   f64[d*m]    W0, column-major

struct Checkpoint {
  Network net;
  std::uint64_t seed = 0;
  double C0 = 0.0;
};

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace lazyadv
