// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <zlib.h>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "unitlens/errors.hpp"
#include "unitlens/netzoo/checkpoint.hpp"
#include "unitlens/tensorgrad/tensor.hpp"

namespace unitlens::netzoo {

/// Labeled images, pixels in [0, 1], stored as one [N x C x H x W] tensor.
struct Dataset {
  Tensor images;
  std::vector<int> labels;
  std::size_t class_count = 0;

  std::size_t size() const { return labels.size(); }
  std::array<std::size_t, 3> sample_shape() const {
    return {images.dim(1), images.dim(2), images.dim(3)};
  }
  std::size_t sample_size() const { return images.size() / images.dim(0); }

  /// Copies samples `indices` (in that order) into a batch tensor.
  Tensor gather(std::span<const std::size_t> indices) const {
    const std::size_t per = sample_size();
    Tensor out({indices.size(), images.dim(1), images.dim(2), images.dim(3)});
    for (std::size_t i = 0; i < indices.size(); ++i) {
      std::copy_n(images.data() + indices[i] * per, per, out.data() + i * per);
    }
    return out;
  }

  /// Contiguous batch [begin, begin + count).
  Tensor slice(std::size_t begin, std::size_t count) const {
    const std::size_t per = sample_size();
    std::vector<double> v(images.data() + begin * per, images.data() + (begin + count) * per);
    return Tensor({count, images.dim(1), images.dim(2), images.dim(3)}, std::move(v));
  }

  /// First `n` samples (all of them when n is 0 or exceeds the size).
  Dataset head(std::size_t n) const {
    if (n == 0 || n >= size()) return *this;
    return Dataset{slice(0, n), std::vector<int>(labels.begin(), labels.begin() + n), class_count};
  }

  /// Averages non-overlapping factor x factor pixel blocks; trailing rows and
  /// columns that do not fill a block are dropped.
  Dataset downsampled(std::size_t factor) const {
    if (factor <= 1) return *this;
    const std::size_t n = images.dim(0), c = images.dim(1), h = images.dim(2), w = images.dim(3);
    const std::size_t oh = h / factor, ow = w / factor;
    if (oh == 0 || ow == 0) {
      throw ConfigError("downsample factor " + std::to_string(factor) + " too large for " +
                        tensorgrad::shape_str(images.shape()));
    }
    Tensor out({n, c, oh, ow});
    const double inv = 1.0 / static_cast<double>(factor * factor);
    for (std::size_t m = 0; m < n * c; ++m) {
      const double* plane = images.data() + m * h * w;
      for (std::size_t y = 0; y < oh; ++y) {
        for (std::size_t x = 0; x < ow; ++x) {
          double acc = 0.0;
          for (std::size_t dy = 0; dy < factor; ++dy) {
            for (std::size_t dx = 0; dx < factor; ++dx) {
              acc += plane[(y * factor + dy) * w + x * factor + dx];
            }
          }
          out[(m * oh + y) * ow + x] = acc * inv;
        }
      }
    }
    return Dataset{std::move(out), labels, class_count};
  }
};

enum class Split { train, test };

inline const char* to_string(Split s) { return s == Split::train ? "train" : "test"; }

namespace detail {

inline std::uint32_t read_be32(const std::vector<std::uint8_t>& b, std::size_t at) {
  return (std::uint32_t{b[at]} << 24) | (std::uint32_t{b[at + 1]} << 16) |
         (std::uint32_t{b[at + 2]} << 8) | std::uint32_t{b[at + 3]};
}

inline void check_labels(const std::vector<int>& labels, std::size_t classes,
                         const std::string& source) {
  for (int l : labels) {
    if (l < 0 || static_cast<std::size_t>(l) >= classes) {
      throw FormatError(source + ": label " + std::to_string(l) + " outside [0, " +
                        std::to_string(classes) + ")");
    }
  }
}

/// Reads a file, inflating it when the name ends in ".gz".
inline std::vector<std::uint8_t> read_maybe_gzip(const std::filesystem::path& path) {
  if (path.extension() != ".gz") return read_file_bytes(path);
  gzFile f = gzopen(path.string().c_str(), "rb");
  if (!f) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> out;
  std::uint8_t buf[1 << 16];
  int n = 0;
  while ((n = gzread(f, buf, sizeof buf)) > 0) out.insert(out.end(), buf, buf + n);
  const bool failed = n < 0;
  gzclose(f);
  if (failed) throw FormatError(path.string() + ": corrupt gzip stream");
  return out;
}

}  // namespace detail

/// IDX image file (magic 0x00000803) plus IDX label file (0x00000801).
inline Dataset load_idx(const std::filesystem::path& images_path,
                        const std::filesystem::path& labels_path, std::size_t class_count = 10) {
  const auto img = detail::read_maybe_gzip(images_path);
  const auto lab = detail::read_maybe_gzip(labels_path);
  if (img.size() < 16 || detail::read_be32(img, 0) != 0x00000803) {
    throw FormatError(images_path.string() + ": not an IDX image file");
  }
  if (lab.size() < 8 || detail::read_be32(lab, 0) != 0x00000801) {
    throw FormatError(labels_path.string() + ": not an IDX label file");
  }
  const std::size_t n = detail::read_be32(img, 4);
  const std::size_t rows = detail::read_be32(img, 8);
  const std::size_t cols = detail::read_be32(img, 12);
  if (n == 0 || rows == 0 || cols == 0) throw FormatError(images_path.string() + ": empty IDX");
  if (detail::read_be32(lab, 4) != n) {
    throw FormatError("IDX image/label counts differ: " + std::to_string(n) + " vs " +
                      std::to_string(detail::read_be32(lab, 4)));
  }
  if (img.size() - 16 < n * rows * cols) {
    throw TruncationError(images_path.string() + ": truncated pixel data");
  }
  if (lab.size() - 8 < n) throw TruncationError(labels_path.string() + ": truncated labels");

  Dataset ds;
  ds.class_count = class_count;
  ds.images = Tensor({n, 1, rows, cols});
  for (std::size_t i = 0; i < n * rows * cols; ++i) ds.images[i] = img[16 + i] / 255.0;
  ds.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) ds.labels[i] = lab[8 + i];
  detail::check_labels(ds.labels, class_count, labels_path.string());
  return ds;
}

/// Concatenated CIFAR-10 binary records: 1 label byte, then 1024 R, 1024 G, 1024 B bytes.
inline Dataset load_cifar_batches(const std::vector<std::filesystem::path>& files) {
  constexpr std::size_t kRecord = 1 + 3 * 32 * 32;
  std::vector<std::uint8_t> all;
  for (const auto& f : files) {
    auto b = read_file_bytes(f);
    if (b.size() % kRecord != 0) {
      throw TruncationError(f.string() + ": size is not a multiple of the CIFAR record size");
    }
    all.insert(all.end(), b.begin(), b.end());
  }
  const std::size_t n = all.size() / kRecord;
  if (n == 0) throw FormatError("no CIFAR records found");
  Dataset ds;
  ds.class_count = 10;
  ds.images = Tensor({n, 3, 32, 32});
  ds.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint8_t* rec = all.data() + i * kRecord;
    ds.labels[i] = rec[0];
    for (std::size_t p = 0; p < 3 * 32 * 32; ++p) ds.images[i * 3072 + p] = rec[1 + p] / 255.0;
  }
  detail::check_labels(ds.labels, 10, "CIFAR-10");
  return ds;
}

/// Loads a split from a directory holding either the standard MNIST IDX
/// files (optionally gzipped) or the CIFAR-10 binary batches.
inline Dataset load_dataset(const std::filesystem::path& root, Split split) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root)) throw IoError("dataset directory not found: " + root.string());
  const std::string prefix = split == Split::train ? "train" : "t10k";
  const fs::path idx_img = root / (prefix + "-images-idx3-ubyte");
  const fs::path idx_lab = root / (prefix + "-labels-idx1-ubyte");
  if (fs::exists(idx_img) && fs::exists(idx_lab)) return load_idx(idx_img, idx_lab);
  fs::path gz_img = idx_img, gz_lab = idx_lab;
  gz_img += ".gz";
  gz_lab += ".gz";
  if (fs::exists(gz_img) && fs::exists(gz_lab)) return load_idx(gz_img, gz_lab);

  std::vector<fs::path> cifar;
  if (split == Split::train) {
    for (int i = 1; i <= 5; ++i) {
      fs::path p = root / ("data_batch_" + std::to_string(i) + ".bin");
      if (fs::exists(p)) cifar.push_back(p);
    }
  } else if (fs::exists(root / "test_batch.bin")) {
    cifar.push_back(root / "test_batch.bin");
  }
  if (!cifar.empty()) return load_cifar_batches(cifar);
  throw IoError("no " + std::string(to_string(split)) + " split in " + root.string() + " (expected " +
                idx_img.filename().string() + " or CIFAR-10 .bin batches)");
}

}  // namespace unitlens::netzoo
