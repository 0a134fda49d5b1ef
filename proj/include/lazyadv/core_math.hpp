#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <type_traits>
#include <vector>

#include "lazyadv/errors.hpp"

namespace lazyadv {

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using Vector = VectorX<double>;
using Matrix = MatrixX<double>;  // column-major; column s holds neuron s
using Index = Eigen::Index;

// Accumulations must run in at least 64-bit floating point.
template <typename Scalar>
inline constexpr bool is_wide_float_v =
    std::is_floating_point_v<Scalar> && sizeof(Scalar) >= sizeof(double);

/// Seeded pseudo-random stream. Gaussians use the polar method of the
/// standard library's normal_distribution over a 64-bit Mersenne twister, so
/// a stream is reproducible within one build (not across toolchains).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }  // [0, 1)
  int sign() { return (engine_() >> 63) != 0 ? 1 : -1; }
  std::uint64_t next_u64() { return engine_(); }

  /// Uniform integer in [0, n).
  std::size_t below(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
  }

  /// Fisher-Yates shuffle driven by this stream.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

/// Independent child seed for stream `stream` of `base` (SplitMix64 finalizer).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

/// d i.i.d. N(0, 1) draws.
Vector sample_gaussian_vec(Rng& rng, Index d);

/// m i.i.d. uniform draws from {-1, +1}.
Vector sample_sign_vec(Rng& rng, Index m);

/// Uniform direction on the unit sphere S^{d-1}.
Vector sample_unit_sphere(Rng& rng, Index d);

template <typename A, typename B>
void require_same_size(const Eigen::MatrixBase<A>& u, const Eigen::MatrixBase<B>& v) {
  if (u.size() != v.size())
    throw InvalidArgument("dimension mismatch: " + std::to_string(u.size()) + " vs " +
                          std::to_string(v.size()));
}

template <typename A>
double norm2(const Eigen::MatrixBase<A>& v) {
  static_assert(is_wide_float_v<typename A::Scalar>);
  return std::sqrt(static_cast<double>(v.squaredNorm()));
}

template <typename A, typename B>
double dot(const Eigen::MatrixBase<A>& u, const Eigen::MatrixBase<B>& v) {
  static_assert(is_wide_float_v<typename A::Scalar>);
  require_same_size(u, v);
  return static_cast<double>(u.dot(v));
}

/// alpha * u + v.
template <typename A, typename B>
VectorX<typename A::Scalar> axpy(typename A::Scalar alpha, const Eigen::MatrixBase<A>& u,
                                 const Eigen::MatrixBase<B>& v) {
  require_same_size(u, v);
  return alpha * u + v;
}

/// Euclidean projection of v onto the closed ball B(center, radius), in place.
/// Points inside or exactly on the sphere are left untouched.
template <typename A, typename C>
void project_to_ball_inplace(Eigen::MatrixBase<A>& v, const Eigen::MatrixBase<C>& center,
                             typename A::Scalar radius) {
  using Scalar = typename A::Scalar;
  if (!(radius >= Scalar(0))) throw InvalidArgument("negative projection radius");
  require_same_size(v, center);
  const VectorX<Scalar> diff = v - center;
  const Scalar dist = diff.norm();
  if (dist <= radius) return;
  v = center + (radius / dist) * diff;
}

/// Copying variant of project_to_ball_inplace.
template <typename A, typename C>
VectorX<typename A::Scalar> project_to_ball(const Eigen::MatrixBase<A>& v,
                                            const Eigen::MatrixBase<C>& center,
                                            typename A::Scalar radius) {
  VectorX<typename A::Scalar> out = v;
  project_to_ball_inplace(out, center, radius);
  return out;
}

template <typename A>
bool all_finite(const Eigen::DenseBase<A>& m) {
  return m.allFinite();
}

/// Numerically stable log(1 + exp(t)).
inline double softplus(double t) {
  return t > 0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t));
}

/// Logistic sigmoid 1 / (1 + exp(-t)).
inline double sigmoid(double t) {
  if (t >= 0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

}  // namespace lazyadv
