// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <zlib.h>

#include <cmath>
#include <fstream>

#include "support/support.hpp"
#include "unitlens/netzoo/network.hpp"
#include "unitlens/netzoo/train.hpp"

namespace nz = unitlens::netzoo;
using unitlens::tensorgrad::Tensor;
using namespace testsupport;

namespace {

std::vector<std::size_t> widths(const nz::ModelSpec& spec, nz::LayerKind kind) {
  std::vector<std::size_t> out;
  for (const auto& l : nz::analyzable_layers(spec)) {
    if (l.kind == kind) out.push_back(l.unit_count);
  }
  return out;
}

void put_be32(std::ofstream& f, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
  f.write(reinterpret_cast<const char*>(b), 4);
}

/// n images of h x w where pixel (y, x) of image i is (i + y + x) % 256, label i % 10.
void write_idx_pair(const std::filesystem::path& dir, const std::string& prefix, std::uint32_t n, std::uint32_t h,
                    std::uint32_t w) {
  std::ofstream img(dir / (prefix + "-images-idx3-ubyte"), std::ios::binary);
  put_be32(img, 0x803);
  put_be32(img, n);
  put_be32(img, h);
  put_be32(img, w);
  for (std::uint32_t i = 0; i < n; ++i) {
    for (std::uint32_t p = 0; p < h * w; ++p) img.put(static_cast<char>((i + p / w + p % w) % 256));
  }
  std::ofstream lab(dir / (prefix + "-labels-idx1-ubyte"), std::ios::binary);
  put_be32(lab, 0x801);
  put_be32(lab, n);
  for (std::uint32_t i = 0; i < n; ++i) lab.put(static_cast<char>(i % 10));
}

/// 200 points in [0,1]^2 on either side of the line x0 + x1 = 1 (margin 0.1).
nz::Dataset separable_toy() {
  TestRng rng(17);
  nz::Dataset ds;
  ds.class_count = 2;
  ds.images = Tensor({200, 1, 1, 2});
  for (std::size_t i = 0; i < 200; ++i) {
    double a, b;
    do {
      a = rng.uniform(0, 1);
      b = rng.uniform(0, 1);
    } while (std::abs(a + b - 1.0) < 0.1);
    ds.images[2 * i] = a;
    ds.images[2 * i + 1] = b;
    ds.labels.push_back(a + b > 1.0 ? 1 : 0);
  }
  return ds;
}

}  // namespace

TEST(Presets, PublishedWidths) {
  EXPECT_EQ(widths(nz::preset("mlp", {3, 32, 32}, 10), nz::LayerKind::dense),
            (std::vector<std::size_t>{128, 512, 2048, 2048}));
  const auto cnn = nz::preset("shallow-cnn", {3, 32, 32}, 10);
  EXPECT_EQ(widths(cnn, nz::LayerKind::conv), (std::vector<std::size_t>{64, 64, 128, 128}));
  EXPECT_EQ(widths(cnn, nz::LayerKind::dense), (std::vector<std::size_t>{nz::kShallowCnnHidden}));
  EXPECT_EQ(widths(nz::preset("vgg16-cifar", {3, 32, 32}, 10), nz::LayerKind::conv).size(), 13u);
}

TEST(Presets, AnalyzableUnitCountsMatchSpec) {
  for (const auto& name : nz::preset_names()) {
    const auto spec = nz::preset(name, {3, 32, 32}, 10);
    for (const auto& l : nz::analyzable_layers(spec)) {
      EXPECT_EQ(l.unit_count, spec.layers[l.position].units);
      EXPECT_EQ(spec.layers[l.position + 1].kind, nz::LayerKind::relu);
    }
  }
}

TEST(Presets, UnknownNameListsValidOnes) {
  try {
    nz::build("resnet", {1, 28, 28}, 10, 1);
    FAIL();
  } catch (const unitlens::ConfigError& e) {
    const std::string msg = e.what();
    for (const auto& n : nz::preset_names()) EXPECT_NE(msg.find(n), std::string::npos) << msg;
  }
}

TEST(Build, SameSeedIsByteIdenticalAndSeedsDiffer) {
  const auto a = nz::encode_checkpoint(nz::build("shallow-cnn", {1, 14, 14}, 10, 42));
  const auto b = nz::encode_checkpoint(nz::build("shallow-cnn", {1, 14, 14}, 10, 42));
  const auto c = nz::encode_checkpoint(nz::build("shallow-cnn", {1, 14, 14}, 10, 43));
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
}

TEST(Build, FanInUniformInitAndZeroBias) {
  const auto ck = nz::build("shallow-cnn", {1, 14, 14}, 10, 5);
  for (const auto& p : ck.parameters) {
    const bool is_bias = p.value.rank() == 1;
    const double fan_in = p.value.rank() == 4 ? double(p.value.dim(1) * 9)
                          : p.value.rank() == 2 ? double(p.value.dim(0))
                                                : 1.0;
    const double bound = std::sqrt(6.0 / fan_in);
    for (double v : p.value.values()) {
      if (is_bias) {
        EXPECT_EQ(v, 0.0);
      } else {
        EXPECT_LE(std::abs(v), bound);
      }
    }
  }
}

TEST(Checkpoint, RoundTripIsBitExact) {
  TempDir dir("ck");
  auto ck = nz::build("shallow-cnn", {1, 14, 14}, 10, 3);
  ck.meta = {3, 7, 0.91, 0.875};
  const auto path = dir.path() / "checkpoint";
  nz::save(ck, path);
  const auto loaded = nz::load(path);
  EXPECT_TRUE(loaded == ck);
  EXPECT_EQ(nz::encode_checkpoint(loaded), nz::read_file_bytes(path));
}

TEST(Checkpoint, LayoutOnDisk) {
  auto ck = tiny_mlp(3, 2, 2);
  const auto bytes = nz::encode_checkpoint(ck);
  ASSERT_GE(bytes.size(), 16u);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "UNLZ");
  EXPECT_EQ(bytes[4], 1);
  EXPECT_EQ(bytes[5] | bytes[6] | bytes[7], 0);
  const std::uint32_t crc = bytes[bytes.size() - 4] | (bytes[bytes.size() - 3] << 8) |
                            (bytes[bytes.size() - 2] << 16) | (std::uint32_t(bytes[bytes.size() - 1]) << 24);
  EXPECT_EQ(crc, ::crc32(0L, bytes.data(), static_cast<uInt>(bytes.size() - 4)));
}

TEST(Checkpoint, CorruptMagicIsFormatError) {
  auto bytes = nz::encode_checkpoint(tiny_mlp(3, 2, 2));
  bytes[0] = 'X';
  EXPECT_THROW(nz::decode_checkpoint(bytes), unitlens::FormatError);
}

TEST(Checkpoint, WrongVersionIsFormatError) {
  auto bytes = nz::encode_checkpoint(tiny_mlp(3, 2, 2));
  bytes[4] = 2;
  EXPECT_THROW(nz::decode_checkpoint(bytes), unitlens::FormatError);
}

TEST(Checkpoint, TruncatedPayloadNamesTensor) {
  const auto full = nz::encode_checkpoint(tiny_mlp(3, 2, 2));
  const std::vector<std::uint8_t> cut(full.begin(), full.end() - 12);
  try {
    nz::decode_checkpoint(cut);
    FAIL();
  } catch (const unitlens::TruncationError& e) {
    EXPECT_NE(std::string(e.what()).find("layer3.bias"), std::string::npos) << e.what();
  }
}

TEST(Checkpoint, FlippedPayloadBitIsChecksumError) {
  auto bytes = nz::encode_checkpoint(tiny_mlp(3, 2, 2));
  bytes[bytes.size() - 10] ^= 0x10;
  EXPECT_THROW(nz::decode_checkpoint(bytes), unitlens::ChecksumError);
}

TEST(Checkpoint, HugeDimensionsAreOverflowErrors) {
  // Hand-built file: header of the tiny mlp, then one tensor claiming 2^31 x 2^31 x 2^31 entries.
  const auto ck = tiny_mlp(3, 2, 2);
  auto good = nz::encode_checkpoint(ck);
  const std::uint32_t header_len = good[8] | (good[9] << 8) | (good[10] << 16) | (std::uint32_t(good[11]) << 24);
  std::vector<std::uint8_t> bytes(good.begin(), good.begin() + 12 + header_len);
  auto u32 = [&](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  };
  u32(1);
  bytes.push_back('w');
  u32(3);
  for (int i = 0; i < 3; ++i) u32(0x80000000u);
  u32(::crc32(0L, bytes.data(), static_cast<uInt>(bytes.size())));
  EXPECT_THROW(nz::decode_checkpoint(bytes), unitlens::DimensionOverflowError);
}

TEST(Checkpoint, ErrorCategoriesAreDistinctIo) {
  EXPECT_EQ(unitlens::FormatError("x").category(), unitlens::ErrorCategory::io);
  EXPECT_EQ(unitlens::TruncationError("x").category(), unitlens::ErrorCategory::io);
  EXPECT_EQ(unitlens::DimensionOverflowError("x").category(), unitlens::ErrorCategory::io);
}

TEST(Forward, ZeroInputZeroBiasGivesZeroActivations) {
  const auto ck = nz::build("shallow-cnn", {1, 8, 8}, 10, 1);
  const auto r = nz::forward_with_activations(ck, Tensor({2, 1, 8, 8}));
  ASSERT_EQ(r.activations.size(), 5u);
  for (const auto& a : r.activations) {
    for (double v : a.values()) EXPECT_EQ(v, 0.0);
  }
}

TEST(Forward, HandWeightedOneLayerNet) {
  // 1 input channel 1x2, one conv kernel with center weight 2 and right neighbor -1, bias 0.5.
  auto ck = tiny_cnn(1, 1, 2, 1, 2);
  Tensor& k = ck.parameter("layer0.weight");
  k[4] = 2.0;
  k[5] = -1.0;
  ck.parameter("layer0.bias")[0] = 0.5;
  // pre-activation at x0: 2*a - b + 0.5; at x1: 2*b + 0.5 (right neighbor is padding)
  const Tensor in({1, 1, 1, 2}, {1.0, 3.0});
  const auto r = nz::forward_with_activations(ck, in);
  ASSERT_EQ(r.activations.size(), 1u);
  EXPECT_DOUBLE_EQ(r.activations[0][0], 0.0);  // relu(2 - 3 + 0.5)
  EXPECT_DOUBLE_EQ(r.activations[0][1], 6.5);
}

TEST(Forward, ShapeMismatchIsDimensionError) {
  const auto ck = nz::build("shallow-cnn", {1, 8, 8}, 10, 1);
  EXPECT_THROW(nz::forward_with_activations(ck, Tensor({1, 1, 9, 8})), unitlens::DimensionError);
}

TEST(Forward, DeterministicAndNonnegative) {
  const auto ck = nz::build("shallow-cnn", {1, 8, 8}, 10, 1);
  TestRng rng(2);
  const Tensor x = random_tensor({3, 1, 8, 8}, rng, 0.0, 1.0);
  const auto a = nz::forward_with_activations(ck, x);
  const auto b = nz::forward_with_activations(ck, x);
  EXPECT_TRUE(a.logits == b.logits);
  for (std::size_t l = 0; l < a.activations.size(); ++l) {
    EXPECT_TRUE(a.activations[l] == b.activations[l]);
    for (double v : a.activations[l].values()) EXPECT_GE(v, 0.0);
  }
}

TEST(Train, ZeroEpochsReturnsInitialization) {
  const auto ds = separable_toy();
  const auto init = nz::build("mlp-tiny", ds.sample_shape(), 2, 9);
  nz::TrainConfig cfg;
  cfg.epochs = 0;
  const auto r = nz::train(init, ds, nullptr, cfg);
  EXPECT_TRUE(r.metrics.empty());
  EXPECT_TRUE(r.checkpoint == init);
}

TEST(Train, LinearlySeparableToyReaches99Percent) {
  const auto ds = separable_toy();
  nz::TrainConfig cfg;
  cfg.epochs = 50;
  cfg.seed = 4;
  const auto r = nz::train(nz::build("mlp-tiny", ds.sample_shape(), 2, 4), ds, nullptr, cfg);
  ASSERT_EQ(r.metrics.size(), 50u);
  EXPECT_GE(nz::accuracy(r.checkpoint, ds), 0.99);
}

TEST(Train, FixedSeedIsBitReproducible) {
  const auto ds = separable_toy();
  nz::TrainConfig cfg;
  cfg.epochs = 3;
  cfg.seed = 8;
  const auto a = nz::train(nz::build("mlp-tiny", ds.sample_shape(), 2, 8), ds, &ds, cfg);
  const auto b = nz::train(nz::build("mlp-tiny", ds.sample_shape(), 2, 8), ds, &ds, cfg);
  EXPECT_EQ(nz::encode_checkpoint(a.checkpoint), nz::encode_checkpoint(b.checkpoint));
  ASSERT_EQ(a.metrics.size(), b.metrics.size());
  for (std::size_t i = 0; i < a.metrics.size(); ++i) EXPECT_EQ(a.metrics[i].mean_loss, b.metrics[i].mean_loss);
}

TEST(Train, NonFiniteLossReportsEpochAndBatch) {
  auto ds = separable_toy();
  ds.images[0] = std::numeric_limits<double>::infinity();
  nz::TrainConfig cfg;
  cfg.epochs = 1;
  try {
    nz::train(nz::build("mlp-tiny", ds.sample_shape(), 2, 1), ds, nullptr, cfg);
    FAIL();
  } catch (const unitlens::NumericError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("epoch 1"), std::string::npos) << msg;
    EXPECT_NE(msg.find("batch"), std::string::npos) << msg;
  }
}

TEST(Train, RejectsBadHyperparameters) {
  const auto ds = separable_toy();
  nz::TrainConfig cfg;
  cfg.learning_rate = 0.0;
  EXPECT_THROW(nz::train(nz::build("mlp-tiny", ds.sample_shape(), 2, 1), ds, nullptr, cfg), unitlens::ConfigError);
}

TEST(Dataset, IdxParsingAndGzip) {
  TempDir dir("idx");
  write_idx_pair(dir.path(), "train", 12, 4, 6);
  write_idx_pair(dir.path(), "t10k", 5, 4, 6);
  const auto train = nz::load_dataset(dir.path(), nz::Split::train);
  ASSERT_EQ(train.size(), 12u);
  EXPECT_EQ(train.sample_shape(), (std::array<std::size_t, 3>{1, 4, 6}));
  EXPECT_EQ(train.labels[11], 1);
  EXPECT_DOUBLE_EQ(train.images[3 * 24 + 1 * 6 + 2], (3 + 1 + 2) / 255.0);

  // gzipped copy in another directory loads identically
  TempDir gz("idxgz");
  for (const char* name : {"t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"}) {
    const auto raw = nz::read_file_bytes(dir.path() / name);
    gzFile f = gzopen((gz.path() / (std::string(name) + ".gz")).c_str(), "wb");
    gzwrite(f, raw.data(), static_cast<unsigned>(raw.size()));
    gzclose(f);
  }
  const auto a = nz::load_dataset(dir.path(), nz::Split::test);
  const auto b = nz::load_dataset(gz.path(), nz::Split::test);
  EXPECT_TRUE(a.images == b.images);
  EXPECT_EQ(a.labels, b.labels);
}

TEST(Dataset, BadMagicAndMissingFiles) {
  TempDir dir("idxbad");
  write_idx_pair(dir.path(), "train", 3, 2, 2);
  {
    std::fstream f(dir.path() / "train-images-idx3-ubyte", std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(3);
    f.put(0x01);
  }
  EXPECT_THROW(nz::load_dataset(dir.path(), nz::Split::train), unitlens::FormatError);
  EXPECT_THROW(nz::load_dataset(dir.path(), nz::Split::test), unitlens::IoError);
  EXPECT_THROW(nz::load_dataset(dir.path() / "nope", nz::Split::test), unitlens::IoError);
}

TEST(Dataset, CifarRecords) {
  TempDir dir("cifar");
  {
    std::ofstream f(dir.path() / "test_batch.bin", std::ios::binary);
    for (int r = 0; r < 2; ++r) {
      f.put(static_cast<char>(r + 3));
      for (int p = 0; p < 3072; ++p) f.put(static_cast<char>(p / 1024 * 100 + r));
    }
  }
  const auto ds = nz::load_dataset(dir.path(), nz::Split::test);
  ASSERT_EQ(ds.size(), 2u);
  EXPECT_EQ(ds.labels, (std::vector<int>{3, 4}));
  EXPECT_EQ(ds.sample_shape(), (std::array<std::size_t, 3>{3, 32, 32}));
  EXPECT_DOUBLE_EQ(ds.images[3072 + 2048], 201 / 255.0);  // record 1, blue plane
}

TEST(Dataset, DownsampleAveragesBlocks) {
  nz::Dataset ds{Tensor({1, 1, 2, 4}, {1, 2, 3, 4, 5, 6, 7, 8}), {0}, 1};
  const auto d = ds.downsampled(2);
  EXPECT_EQ(d.sample_shape(), (std::array<std::size_t, 3>{1, 1, 2}));
  EXPECT_DOUBLE_EQ(d.images[0], 3.5);
  EXPECT_DOUBLE_EQ(d.images[1], 5.5);
}
