#pragma once

// Model checkpoints: magic "NLGCKPT1", JSON header (format version,
// architecture, feature config, class names, RNG spec, metadata and a tensor
// table of name/shape/offset/length), then the f32 tensors in table order.

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "neuralogram/binary_container.hpp"
#include "neuralogram/errors.hpp"
#include "neuralogram/features.hpp"
#include "neuralogram/network.hpp"
#include "neuralogram/tensor.hpp"

namespace nlg {

inline constexpr std::string_view kCheckpointMagic = "NLGCKPT1";
inline constexpr int kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  Tensor<float> tensor;

  friend bool operator==(const NamedTensor&, const NamedTensor&) = default;
};

struct ModelCheckpoint {
  int format_version = kCheckpointVersion;
  Architecture architecture;
  FeatureConfig features;
  std::vector<std::string> classes;
  std::vector<NamedTensor> parameters;
  nlohmann::json metadata = nlohmann::json::object();  // seed, steps, loss history tail, ...

  /// Network with this checkpoint's parameters loaded.
  Network<float> network() const {
    Network<float> net(architecture);
    auto ps = net.parameters();
    const auto names = net.parameter_names();
    if (ps.size() != parameters.size())
      throw IntegrityError("checkpoint has " + std::to_string(parameters.size()) + " tensors, architecture needs " +
                           std::to_string(ps.size()));
    for (std::size_t i = 0; i < ps.size(); ++i) {
      if (parameters[i].name != names[i] || parameters[i].tensor.shape != ps[i]->shape)
        throw IntegrityError("tensor " + parameters[i].name + " " + shape_str(parameters[i].tensor.shape) +
                             " does not match architecture slot " + names[i] + " " + shape_str(ps[i]->shape));
      *ps[i] = parameters[i].tensor;
    }
    return net;
  }

  static ModelCheckpoint from_network(const Network<float>& net, const FeatureConfig& features,
                                      std::vector<std::string> classes, nlohmann::json metadata = nlohmann::json::object()) {
    ModelCheckpoint c;
    c.architecture = net.architecture();
    c.features = features;
    c.classes = std::move(classes);
    c.metadata = std::move(metadata);
    const auto names = net.parameter_names();
    const auto ps = net.parameters();
    for (std::size_t i = 0; i < ps.size(); ++i) c.parameters.push_back({names[i], *ps[i]});
    return c;
  }
};

inline std::vector<unsigned char> encode_checkpoint(const ModelCheckpoint& c) {
  nlohmann::json table = nlohmann::json::array();
  std::vector<float> payload;
  for (const auto& p : c.parameters) {
    table.push_back({{"name", p.name}, {"shape", p.tensor.shape}, {"offset", payload.size() * 4},
                     {"length", p.tensor.size()}});
    payload.insert(payload.end(), p.tensor.data.begin(), p.tensor.data.end());
  }
  nlohmann::json header = {{"format_version", c.format_version},
                           {"architecture", c.architecture},
                           {"features", c.features},
                           {"classes", c.classes},
                           {"rng", {{"engine", "xoshiro256**"}, {"seeding", "splitmix64"}}},
                           {"metadata", c.metadata},
                           {"tensors", table}};
  return encode_container(kCheckpointMagic, header, payload);
}

inline ModelCheckpoint decode_checkpoint(std::span<const unsigned char> bytes) {
  Container raw = decode_container(kCheckpointMagic, bytes);
  const auto& h = raw.header;
  ModelCheckpoint c;
  try {
    c.format_version = h.at("format_version").get<int>();
    if (c.format_version != kCheckpointVersion)
      throw VersionError("checkpoint format version " + std::to_string(c.format_version) + ", this build reads " +
                         std::to_string(kCheckpointVersion));
    c.architecture = h.at("architecture").get<Architecture>();
    c.features = h.at("features").get<FeatureConfig>();
    c.classes = h.at("classes").get<std::vector<std::string>>();
    c.metadata = h.value("metadata", nlohmann::json::object());
    std::size_t expected_offset = 0;
    for (const auto& e : h.at("tensors")) {
      const auto shape = e.at("shape").get<Shape>();
      const auto offset = e.at("offset").get<std::size_t>();
      const auto length = e.at("length").get<std::size_t>();
      if (shape_size(shape) != length)
        throw IntegrityError("tensor " + e.at("name").get<std::string>() + ": shape " + shape_str(shape) +
                             " does not match declared length " + std::to_string(length));
      if (offset != expected_offset) throw IntegrityError("tensor table offsets are not contiguous");
      if (offset / 4 + length > raw.payload.size()) throw TruncatedError("payload shorter than tensor table");
      const auto first = raw.payload.begin() + static_cast<long>(offset / 4);
      c.parameters.push_back({e.at("name").get<std::string>(),
                              Tensor<float>(shape, std::vector<float>(first, first + static_cast<long>(length)))});
      expected_offset += length * 4;
    }
    if (expected_offset / 4 != raw.payload.size()) throw IntegrityError("payload longer than tensor table");
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint header: ") + e.what());
  }
  try {
    (void)c.network();  // shape consistency with the architecture
  } catch (const ShapeError& e) {
    throw IntegrityError(std::string("checkpoint architecture: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw IntegrityError(std::string("checkpoint architecture: ") + e.what());
  }
  return c;
}

inline void save_checkpoint(const ModelCheckpoint& c, const std::string& path) {
  write_bytes(path, encode_checkpoint(c));
}

inline ModelCheckpoint load_checkpoint(const std::string& path) { return decode_checkpoint(read_bytes(path)); }

}  // namespace nlg
