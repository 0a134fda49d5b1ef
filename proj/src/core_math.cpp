#include "lazyadv/core_math.hpp"

namespace lazyadv {

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Vector sample_gaussian_vec(Rng& rng, Index d) {
  if (d < 1) throw InvalidDimension("sample_gaussian_vec: d must be >= 1");
  Vector v(d);
  for (Index i = 0; i < d; ++i) v[i] = rng.normal();
  return v;
}

Vector sample_sign_vec(Rng& rng, Index m) {
  if (m < 1) throw InvalidDimension("sample_sign_vec: m must be >= 1");
  Vector v(m);
  for (Index i = 0; i < m; ++i) v[i] = rng.sign();
  return v;
}

Vector sample_unit_sphere(Rng& rng, Index d) {
  Vector v = sample_gaussian_vec(rng, d);
  double n = v.norm();
  while (n == 0.0) {
    v = sample_gaussian_vec(rng, d);
    n = v.norm();
  }
  return v / n;
}

}  // namespace lazyadv
