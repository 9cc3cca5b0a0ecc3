// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <zlib.h>

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "unitlens/errors.hpp"
#include "unitlens/netzoo/model.hpp"
#include "unitlens/rng.hpp"

namespace unitlens::netzoo {

static_assert(std::endian::native == std::endian::little,
              "checkpoint codec assumes a little-endian host");

struct NamedTensor {
  std::string name;
  Tensor value;
  friend bool operator==(const NamedTensor&, const NamedTensor&) = default;
};

struct TrainingMeta {
  std::uint64_t seed = 0;
  std::size_t epochs = 0;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
  friend bool operator==(const TrainingMeta&, const TrainingMeta&) = default;
};

struct Checkpoint {
  ModelSpec spec;
  std::vector<NamedTensor> parameters;  // layer order, weight before bias
  TrainingMeta meta;

  const Tensor& parameter(const std::string& name) const {
    for (const auto& p : parameters) {
      if (p.name == name) return p.value;
    }
    throw ContractError("checkpoint has no parameter '" + name + "'");
  }
  Tensor& parameter(const std::string& name) {
    return const_cast<Tensor&>(static_cast<const Checkpoint&>(*this).parameter(name));
  }

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

/// Parameter shapes: conv weight [K x C x 3 x 3], dense weight [in x out], bias [units].
inline std::vector<NamedTensor> zero_parameters(const ModelSpec& spec) {
  const auto shapes = infer_shapes(spec);
  std::vector<NamedTensor> out;
  Shape in{spec.input_shape[0], spec.input_shape[1], spec.input_shape[2]};
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& l = spec.layers[i];
    if (l.kind == LayerKind::conv) {
      out.push_back({weight_name(i), Tensor({l.units, in[0], 3, 3})});
      out.push_back({bias_name(i), Tensor({l.units})});
    } else if (l.kind == LayerKind::dense) {
      out.push_back({weight_name(i), Tensor({in[0], l.units})});
      out.push_back({bias_name(i), Tensor({l.units})});
    }
    in = shapes[i];
  }
  return out;
}

/// Weights uniform in +-sqrt(6 / fan_in), biases zero, drawn in layer order from `seed`.
inline Checkpoint initialize(const ModelSpec& spec, std::uint64_t seed) {
  Checkpoint ck{spec, zero_parameters(spec), TrainingMeta{seed, 0, 0.0, 0.0}};
  Rng rng(seed);
  for (auto& p : ck.parameters) {
    if (p.value.rank() == 1) continue;
    const std::size_t fan_in = p.value.rank() == 4 ? p.value.dim(1) * 9 : p.value.dim(0);
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    for (double& v : p.value.values()) v = rng.uniform(-bound, bound);
  }
  return ck;
}

/// Preset architecture with freshly initialized parameters.
inline Checkpoint build(const std::string& preset_name, std::array<std::size_t, 3> input_shape,
                        std::size_t class_count, std::uint64_t seed) {
  return initialize(preset(preset_name, input_shape, class_count), seed);
}

// ---- binary codec --------------------------------------------------------
//
// "UNLZ" | u32 version | u32 header length | header JSON |
// { u32 name length | name | u32 rank | u32 dims... | f64 payload... }* | u32 CRC32
//
// The header JSON holds {"model": ModelSpec, "training": TrainingMeta}. All
// integers and floats are little-endian.

inline constexpr char kCheckpointMagic[4] = {'U', 'N', 'L', 'Z'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline std::uint32_t crc32_of(const std::uint8_t* data, std::size_t size) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  while (size > 0) {
    const uInt chunk = static_cast<uInt>(std::min<std::size_t>(size, 1u << 30));
    crc = ::crc32(crc, data, chunk);
    data += chunk;
    size -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

class Reader {
 public:
  Reader(const std::vector<std::uint8_t>& bytes, std::size_t end) : bytes_(bytes), end_(end) {}

  std::size_t remaining() const { return end_ - pos_; }
  bool done() const { return pos_ == end_; }

  std::uint32_t u32(const std::string& what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }

  std::string str(std::size_t n, const std::string& what) {
    need(n, what);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  void f64s(double* out, std::size_t count, const std::string& what) {
    need(count * 8, what);
    std::memcpy(out, bytes_.data() + pos_, count * 8);
    pos_ += count * 8;
  }

 private:
  void need(std::size_t n, const std::string& what) const {
    if (remaining() < n) {
      throw TruncationError("checkpoint truncated while reading " + what + " (need " +
                            std::to_string(n) + " bytes, " + std::to_string(remaining()) +
                            " left)");
    }
  }

  const std::vector<std::uint8_t>& bytes_;
  std::size_t end_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline nlohmann::json checkpoint_header(const Checkpoint& ck) {
  return {{"model", to_json(ck.spec)},
          {"training",
           {{"seed", ck.meta.seed},
            {"epochs", ck.meta.epochs},
            {"train_accuracy", ck.meta.train_accuracy},
            {"test_accuracy", ck.meta.test_accuracy}}}};
}

inline std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ck) {
  std::vector<std::uint8_t> out(kCheckpointMagic, kCheckpointMagic + 4);
  detail::put_u32(out, kCheckpointVersion);
  const std::string header = checkpoint_header(ck).dump();
  detail::put_u32(out, static_cast<std::uint32_t>(header.size()));
  out.insert(out.end(), header.begin(), header.end());
  for (const auto& p : ck.parameters) {
    detail::put_u32(out, static_cast<std::uint32_t>(p.name.size()));
    out.insert(out.end(), p.name.begin(), p.name.end());
    detail::put_u32(out, static_cast<std::uint32_t>(p.value.rank()));
    for (std::size_t d : p.value.shape()) detail::put_u32(out, static_cast<std::uint32_t>(d));
    const auto* raw = reinterpret_cast<const std::uint8_t*>(p.value.data());
    out.insert(out.end(), raw, raw + p.value.size() * 8);
  }
  detail::put_u32(out, detail::crc32_of(out.data(), out.size()));
  return out;
}

inline Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0) {
    throw FormatError("not a checkpoint: bad magic bytes");
  }
  if (bytes.size() < 12) throw TruncationError("checkpoint truncated in header");
  detail::Reader r(bytes, bytes.size() - 4);
  r.str(4, "magic");
  const std::uint32_t version = r.u32("version");
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  const std::uint32_t header_len = r.u32("header length");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(r.str(header_len, "header"));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("checkpoint header is not JSON: ") + e.what());
  }

  Checkpoint ck;
  ck.spec = model_spec_from_json(header.at("model"));
  try {
    const auto& t = header.at("training");
    ck.meta.seed = t.at("seed").get<std::uint64_t>();
    ck.meta.epochs = t.at("epochs").get<std::size_t>();
    ck.meta.train_accuracy = t.at("train_accuracy").get<double>();
    ck.meta.test_accuracy = t.at("test_accuracy").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed training metadata: ") + e.what());
  }

  while (!r.done()) {
    const std::uint32_t name_len = r.u32("parameter name length");
    NamedTensor p;
    p.name = r.str(name_len, "parameter name");
    const std::uint32_t rank = r.u32("rank of '" + p.name + "'");
    if (rank > 8) {
      throw DimensionOverflowError("parameter '" + p.name + "' declares rank " +
                                   std::to_string(rank));
    }
    Shape shape;
    std::size_t count = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
      const std::uint32_t d = r.u32("dims of '" + p.name + "'");
      if (d == 0) throw FormatError("parameter '" + p.name + "' has a zero dimension");
      if (count > std::numeric_limits<std::size_t>::max() / 8 / d) {
        throw DimensionOverflowError("dimensions of '" + p.name + "' overflow");
      }
      count *= d;
      shape.push_back(d);
    }
    std::vector<double> values(count > r.remaining() / 8 ? 0 : count);
    if (values.size() != count) {
      throw TruncationError("checkpoint truncated in payload of tensor '" + p.name + "' (needs " +
                            std::to_string(count * 8) + " bytes, " +
                            std::to_string(r.remaining()) + " left)");
    }
    r.f64s(values.data(), count, "payload of '" + p.name + "'");
    p.value = Tensor(std::move(shape), std::move(values));
    ck.parameters.push_back(std::move(p));
  }

  const std::size_t body = bytes.size() - 4;
  std::uint32_t stored = 0;
  for (int i = 0; i < 4; ++i) stored |= static_cast<std::uint32_t>(bytes[body + i]) << (8 * i);
  if (stored != detail::crc32_of(bytes.data(), body)) {
    throw ChecksumError("checkpoint CRC32 mismatch");
  }

  const auto expected = zero_parameters(ck.spec);
  if (expected.size() != ck.parameters.size()) {
    throw FormatError("checkpoint has " + std::to_string(ck.parameters.size()) +
                      " parameters, model needs " + std::to_string(expected.size()));
  }
  for (std::size_t i = 0; i < expected.size(); ++i) {
    if (expected[i].name != ck.parameters[i].name ||
        expected[i].value.shape() != ck.parameters[i].value.shape()) {
      throw FormatError("parameter '" + ck.parameters[i].name + "' does not match model layout");
    }
  }
  return ck;
}

inline std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file_bytes(const std::filesystem::path& path,
                             const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

inline void save(const Checkpoint& ck, const std::filesystem::path& path) {
  write_file_bytes(path, encode_checkpoint(ck));
}

inline Checkpoint load(const std::filesystem::path& path) {
  return decode_checkpoint(read_file_bytes(path));
}

}  // namespace unitlens::netzoo
