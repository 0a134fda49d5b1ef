#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "lazyadv/core_math.hpp"

namespace lazyadv {

/// Greyscale images with digit labels. Column i of `pixels` is image i,
/// flattened row-major; values are on the 0..255 scale (fractional after
/// downsampling).
struct RawImageSet {
  Index rows = 0;
  Index cols = 0;
  Matrix pixels;                      // (rows*cols) x n
  std::vector<std::uint8_t> labels;   // 0..9

  std::size_t size() const { return labels.size(); }
};

/// Inputs as columns with labels in {-1, +1}.
struct LabeledDataset {
  Matrix inputs;                      // d x n
  std::vector<std::int8_t> labels;
  bool normalized = false;
  std::size_t dropped_degenerate = 0; // all-zero images removed during normalization

  Index dim() const { return inputs.rows(); }
  std::size_t size() const { return labels.size(); }
};

// IDX container: 4-byte big-endian magic (0x00000803 images, 0x00000801
// labels), big-endian u32 dimension sizes, then a row-major u8 payload.
inline constexpr std::uint32_t kIdxImageMagic = 2051;
inline constexpr std::uint32_t kIdxLabelMagic = 2049;

RawImageSet parse_idx(std::span<const std::uint8_t> image_bytes,
                      std::span<const std::uint8_t> label_bytes);

/// Inverse of parse_idx for integral pixel values.
std::vector<std::uint8_t> encode_idx_images(const RawImageSet& raw);
std::vector<std::uint8_t> encode_idx_labels(const RawImageSet& raw);

/// Reads a pair of (optionally gzip-compressed) IDX files.
RawImageSet load_idx_files(const std::filesystem::path& images, const std::filesystem::path& labels);

/// Keeps images labelled pos_digit or neg_digit, order preserved.
RawImageSet extract_binary(const RawImageSet& raw, int pos_digit = 1, int neg_digit = 0);

/// Area-weighted resampling to k x k: each output pixel is the mean of the
/// (fractional) source rectangle it covers.
RawImageSet downsample(const RawImageSet& raw, Index k);

/// Flattens, scales pixels to [0, 1], maps pos_digit -> +1 and neg_digit -> -1
/// and, if requested, rescales each input to unit norm. All-zero images are
/// dropped under normalization and counted in `dropped_degenerate`.
LabeledDataset to_sphere_dataset(const RawImageSet& raw, bool normalize, int pos_digit = 1,
                                 int neg_digit = 0);

/// Two balanced classes on the unit sphere: x = y*margin*e1 + sqrt(1-margin^2)*u
/// with u a uniform unit direction orthogonal to e1.
LabeledDataset synth_sphere(Rng& rng, Index d, std::size_t n, double margin);

/// Columns `idx` of `data`, in the given order.
LabeledDataset subset(const LabeledDataset& data, std::span<const std::size_t> idx);

// Dataset cache (little-endian): magic "LZDS", u32 version, u64 d, u64 n,
// u8 normalized, f64[d*n] inputs column-major, i8[n] labels.
std::vector<std::uint8_t> encode_dataset(const LabeledDataset& data);
LabeledDataset decode_dataset(std::span<const std::uint8_t> bytes);
void save_dataset(const std::filesystem::path& path, const LabeledDataset& data);
LabeledDataset load_dataset(const std::filesystem::path& path);

}  // namespace lazyadv
