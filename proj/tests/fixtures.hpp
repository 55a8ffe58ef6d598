#pragma once

// Small models and matrices shared by the test suites.

#include <filesystem>
#include <string>

#include "neuralogram/neuralogram.hpp"

namespace nlg::testing {

// Accepts the 129x200 feature map but stays cheap enough for unit tests.
inline Architecture tiny_architecture(std::size_t embedding = 6, std::size_t classes = 3) {
  Architecture a;
  a.input_shape = {1, 129, 200};
  a.layers = {LayerSpec::conv(2), LayerSpec::relu(),         LayerSpec::pool(8, 8),
              LayerSpec::dense(embedding), LayerSpec::relu(), LayerSpec::dropout(0.5),
              LayerSpec::dense(classes), LayerSpec::softmax()};
  a.embedding_layer = 4;
  a.name = "tiny";
  return a;
}

inline ModelCheckpoint tiny_checkpoint(std::uint64_t seed = 1, std::size_t embedding = 6) {
  Network<float> net(tiny_architecture(embedding));
  Rng rng(seed);
  net.init(rng);
  return ModelCheckpoint::from_network(net, FeatureConfig{}, {"a", "b", "c"}, {{"seed", seed}});
}

inline Waveform noise_wave(double dur, std::uint64_t seed, int sr = 8000) {
  Rng rng(seed);
  Waveform w{std::vector<double>(static_cast<std::size_t>(std::llround(dur * sr))), sr};
  for (auto& v : w.samples) v = rng.uniform(-0.5, 0.5);
  return w;
}

inline std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("nlg_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace nlg::testing
