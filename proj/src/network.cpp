#include "lazyadv/network.hpp"

#include "lazyadv/io.hpp"

namespace lazyadv {

namespace {
constexpr std::string_view kCheckpointMagic = "LZCK";
constexpr std::uint32_t kCheckpointVersion = 1;
}  // namespace

Network init_network(Rng& rng, Index d, Index m) {
  if (d < 1 || m < 1) throw InvalidDimension("init_network: d and m must be >= 1");
  Vector a = sample_sign_vec(rng, m);
  Matrix W(d, m);
  for (Index s = 0; s < m; ++s) W.col(s) = sample_gaussian_vec(rng, d);
  return Network(std::move(a), std::move(W));
}

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  const Network& net = ckpt.net;
  ByteWriter w;
  w.bytes(kCheckpointMagic);
  w.u32(kCheckpointVersion);
  w.u64(static_cast<std::uint64_t>(net.dim()));
  w.u64(static_cast<std::uint64_t>(net.width()));
  w.u64(ckpt.seed);
  w.f64(ckpt.C0);
  w.buffer().reserve(w.buffer().size() + net.width() + 16 * net.dim() * net.width());
  for (Index s = 0; s < net.width(); ++s) w.i8(net.signs()[s] > 0 ? 1 : -1);
  const double* W = net.weights().data();
  for (Index i = 0; i < net.weights().size(); ++i) w.f64(W[i]);
  const double* W0 = net.initial_weights().data();
  for (Index i = 0; i < net.initial_weights().size(); ++i) w.f64(W0[i]);
  return std::move(w.buffer());
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  if (r.bytes(4) != kCheckpointMagic) throw FormatError("not a network checkpoint");
  if (r.u32() != kCheckpointVersion) throw FormatError("unsupported checkpoint version");
  const auto d = static_cast<Index>(r.u64());
  const auto m = static_cast<Index>(r.u64());
  Checkpoint out{Network(Vector::Ones(1), Matrix::Zero(1, 1)), r.u64(), r.f64()};
  if (d < 1 || m < 1) throw FormatError("checkpoint has empty dimensions");
  if (r.remaining() != static_cast<std::size_t>(m) + 16 * static_cast<std::size_t>(d * m))
    throw LengthError("checkpoint payload size does not match header");
  Vector a(m);
  for (Index s = 0; s < m; ++s) a[s] = r.i8();
  Matrix W(d, m), W0(d, m);
  for (Index i = 0; i < W.size(); ++i) W.data()[i] = r.f64();
  for (Index i = 0; i < W0.size(); ++i) W0.data()[i] = r.f64();
  out.net = Network(std::move(a), std::move(W), std::move(W0));
  return out;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  write_file_atomic(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(read_file_bytes(path));
}

}  // namespace lazyadv
