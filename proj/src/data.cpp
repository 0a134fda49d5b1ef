#include "lazyadv/data.hpp"

#include "lazyadv/io.hpp"

namespace lazyadv {

namespace {

std::uint32_t read_be32(std::span<const std::uint8_t> b, std::size_t off) {
  if (b.size() < off + 4) throw LengthError("IDX header truncated");
  return (std::uint32_t{b[off]} << 24) | (std::uint32_t{b[off + 1]} << 16) |
         (std::uint32_t{b[off + 2]} << 8) | std::uint32_t{b[off + 3]};
}

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

// Weights of an area-averaging map from `src` samples onto `dst` samples.
// Source cell r spans [r*dst, (r+1)*dst) and output cell i spans
// [i*src, (i+1)*src) in units of 1/(src*dst); overlaps are exact integers.
Matrix area_weights(Index src, Index dst) {
  Matrix A = Matrix::Zero(dst, src);
  for (Index i = 0; i < dst; ++i) {
    const Index lo = i * src, hi = (i + 1) * src;
    for (Index r = 0; r < src; ++r) {
      const Index overlap = std::min(hi, (r + 1) * dst) - std::max(lo, r * dst);
      if (overlap > 0) A(i, r) = static_cast<double>(overlap) / static_cast<double>(src);
    }
  }
  return A;
}

constexpr std::string_view kDatasetMagic = "LZDS";
constexpr std::uint32_t kDatasetVersion = 1;

}  // namespace

RawImageSet parse_idx(std::span<const std::uint8_t> image_bytes,
                      std::span<const std::uint8_t> label_bytes) {
  const std::uint32_t img_magic = read_be32(image_bytes, 0);
  if (img_magic != kIdxImageMagic)
    throw FormatError("image file magic " + std::to_string(img_magic) + ", expected 2051");
  const std::uint32_t lbl_magic = read_be32(label_bytes, 0);
  if (lbl_magic != kIdxLabelMagic)
    throw FormatError("label file magic " + std::to_string(lbl_magic) + ", expected 2049");

  const std::size_t n_img = read_be32(image_bytes, 4);
  const std::size_t rows = read_be32(image_bytes, 8);
  const std::size_t cols = read_be32(image_bytes, 12);
  const std::size_t n_lbl = read_be32(label_bytes, 4);
  if (rows == 0 || cols == 0) throw FormatError("IDX images must have positive size");

  const std::size_t px = rows * cols;
  if (image_bytes.size() != 16 + n_img * px)
    throw LengthError("image payload has " + std::to_string(image_bytes.size() - 16) +
                      " bytes, header promises " + std::to_string(n_img * px));
  if (label_bytes.size() != 8 + n_lbl)
    throw LengthError("label payload has " + std::to_string(label_bytes.size() - 8) +
                      " bytes, header promises " + std::to_string(n_lbl));
  if (n_img != n_lbl)
    throw ConsistencyError(std::to_string(n_img) + " images but " + std::to_string(n_lbl) + " labels");

  RawImageSet raw;
  raw.rows = static_cast<Index>(rows);
  raw.cols = static_cast<Index>(cols);
  raw.pixels.resize(static_cast<Index>(px), static_cast<Index>(n_img));
  const std::uint8_t* p = image_bytes.data() + 16;
  for (std::size_t i = 0; i < n_img; ++i)
    for (std::size_t j = 0; j < px; ++j) raw.pixels(static_cast<Index>(j), static_cast<Index>(i)) = p[i * px + j];
  raw.labels.assign(label_bytes.begin() + 8, label_bytes.end());
  return raw;
}

std::vector<std::uint8_t> encode_idx_images(const RawImageSet& raw) {
  std::vector<std::uint8_t> out;
  out.reserve(16 + raw.pixels.size());
  put_be32(out, kIdxImageMagic);
  put_be32(out, static_cast<std::uint32_t>(raw.size()));
  put_be32(out, static_cast<std::uint32_t>(raw.rows));
  put_be32(out, static_cast<std::uint32_t>(raw.cols));
  for (Index i = 0; i < raw.pixels.cols(); ++i)
    for (Index j = 0; j < raw.pixels.rows(); ++j) {
      const double v = raw.pixels(j, i);
      if (v < 0 || v > 255 || v != std::floor(v))
        throw InvalidArgument("IDX encoding needs integral pixels in 0..255");
      out.push_back(static_cast<std::uint8_t>(v));
    }
  return out;
}

std::vector<std::uint8_t> encode_idx_labels(const RawImageSet& raw) {
  std::vector<std::uint8_t> out;
  out.reserve(8 + raw.size());
  put_be32(out, kIdxLabelMagic);
  put_be32(out, static_cast<std::uint32_t>(raw.size()));
  out.insert(out.end(), raw.labels.begin(), raw.labels.end());
  return out;
}

RawImageSet load_idx_files(const std::filesystem::path& images, const std::filesystem::path& labels) {
  return parse_idx(read_file_bytes(images), read_file_bytes(labels));
}

RawImageSet extract_binary(const RawImageSet& raw, int pos_digit, int neg_digit) {
  if (pos_digit == neg_digit || pos_digit < 0 || pos_digit > 9 || neg_digit < 0 || neg_digit > 9)
    throw InvalidArgument("digits must be distinct and within 0..9");
  std::vector<Index> keep;
  for (std::size_t i = 0; i < raw.size(); ++i)
    if (raw.labels[i] == pos_digit || raw.labels[i] == neg_digit) keep.push_back(static_cast<Index>(i));
  if (keep.empty()) throw EmptyDataset("no images carry the requested digits");
  RawImageSet out;
  out.rows = raw.rows;
  out.cols = raw.cols;
  out.pixels = raw.pixels(Eigen::all, keep);
  for (Index i : keep) out.labels.push_back(raw.labels[static_cast<std::size_t>(i)]);
  return out;
}

RawImageSet downsample(const RawImageSet& raw, Index k) {
  if (k < 1 || k > raw.rows || k > raw.cols)
    throw InvalidArgument("downsample size " + std::to_string(k) + " out of range");
  if (k == raw.rows && k == raw.cols) return raw;
  const Matrix A = area_weights(raw.rows, k);
  const Matrix B = area_weights(raw.cols, k);
  RawImageSet out;
  out.rows = k;
  out.cols = k;
  out.labels = raw.labels;
  out.pixels.resize(k * k, raw.pixels.cols());
  for (Index i = 0; i < raw.pixels.cols(); ++i) {
    // Row-major image stored in a column: map as a cols x rows column-major matrix.
    Eigen::Map<const Matrix> img_t(raw.pixels.col(i).data(), raw.cols, raw.rows);
    const Matrix res_t = B * img_t * A.transpose();  // k x k, transposed layout
    out.pixels.col(i) = Eigen::Map<const Vector>(res_t.data(), k * k);
  }
  return out;
}

LabeledDataset to_sphere_dataset(const RawImageSet& raw, bool normalize, int pos_digit, int neg_digit) {
  if (raw.size() == 0) throw EmptyDataset("no images to convert");
  LabeledDataset out;
  out.normalized = normalize;
  std::vector<Index> keep;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const int digit = raw.labels[i];
    if (digit != pos_digit && digit != neg_digit)
      throw InvalidLabel("digit " + std::to_string(digit) + " is neither class");
    if (normalize && raw.pixels.col(static_cast<Index>(i)).isZero(0.0)) {
      ++out.dropped_degenerate;
      continue;
    }
    keep.push_back(static_cast<Index>(i));
    out.labels.push_back(digit == pos_digit ? 1 : -1);
  }
  if (keep.empty()) throw EmptyDataset("every image was degenerate");
  out.inputs = raw.pixels(Eigen::all, keep) / 255.0;
  if (normalize) out.inputs.colwise().normalize();
  return out;
}

LabeledDataset synth_sphere(Rng& rng, Index d, std::size_t n, double margin) {
  if (d < 2) throw InvalidDimension("synth_sphere needs d >= 2");
  if (!(margin >= 0.0 && margin < 1.0)) throw InvalidArgument("margin must lie in [0, 1)");
  if (n == 0) throw EmptyDataset("synth_sphere needs n >= 1");
  std::vector<std::int8_t> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = (i % 2 == 0) ? 1 : -1;
  rng.shuffle(labels);

  LabeledDataset out;
  out.normalized = true;
  out.labels = labels;
  out.inputs.resize(d, static_cast<Index>(n));
  const double spread = std::sqrt(1.0 - margin * margin);
  for (std::size_t i = 0; i < n; ++i) {
    Vector u = sample_gaussian_vec(rng, d);
    u[0] = 0.0;
    double un = u.norm();
    while (un == 0.0) {
      u = sample_gaussian_vec(rng, d);
      u[0] = 0.0;
      un = u.norm();
    }
    auto x = out.inputs.col(static_cast<Index>(i));
    x = (spread / un) * u;
    x[0] = labels[i] * margin;
    x.normalize();
  }
  return out;
}

LabeledDataset subset(const LabeledDataset& data, std::span<const std::size_t> idx) {
  LabeledDataset out;
  out.normalized = data.normalized;
  out.inputs.resize(data.dim(), static_cast<Index>(idx.size()));
  out.labels.reserve(idx.size());
  for (std::size_t j = 0; j < idx.size(); ++j) {
    if (idx[j] >= data.size()) throw InvalidArgument("subset index out of range");
    out.inputs.col(static_cast<Index>(j)) = data.inputs.col(static_cast<Index>(idx[j]));
    out.labels.push_back(data.labels[idx[j]]);
  }
  return out;
}

std::vector<std::uint8_t> encode_dataset(const LabeledDataset& data) {
  ByteWriter w;
  w.bytes(kDatasetMagic);
  w.u32(kDatasetVersion);
  w.u64(static_cast<std::uint64_t>(data.dim()));
  w.u64(data.size());
  w.u8(data.normalized ? 1 : 0);
  for (Index i = 0; i < data.inputs.size(); ++i) w.f64(data.inputs.data()[i]);
  for (auto y : data.labels) w.i8(y);
  return std::move(w.buffer());
}

LabeledDataset decode_dataset(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  if (r.bytes(4) != kDatasetMagic) throw FormatError("not a dataset cache");
  if (r.u32() != kDatasetVersion) throw FormatError("unsupported dataset cache version");
  const auto d = static_cast<Index>(r.u64());
  const auto n = static_cast<std::size_t>(r.u64());
  LabeledDataset out;
  out.normalized = r.u8() != 0;
  if (r.remaining() != n * (8 * static_cast<std::size_t>(d) + 1))
    throw LengthError("dataset payload size does not match header");
  out.inputs.resize(d, static_cast<Index>(n));
  for (Index i = 0; i < out.inputs.size(); ++i) out.inputs.data()[i] = r.f64();
  out.labels.resize(n);
  for (auto& y : out.labels) {
    y = r.i8();
    if (y != 1 && y != -1) throw FormatError("dataset labels must be +1 or -1");
  }
  return out;
}

void save_dataset(const std::filesystem::path& path, const LabeledDataset& data) {
  write_file_atomic(path, encode_dataset(data));
}

LabeledDataset load_dataset(const std::filesystem::path& path) {
  return decode_dataset(read_file_bytes(path));
}

}  // namespace lazyadv
