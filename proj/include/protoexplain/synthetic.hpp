#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "protoexplain/tensor_store.hpp"

namespace protoexplain {

// Gaussian-blob dataset in the exporter's on-disk layout. Each block of a
// sample is spatially constant (optionally jittered per cell): a class mean
// plus isotropic noise. Class means of block b are orthogonal with pairwise
// distance separation * sigma * sqrt(D_b), i.e. `separation` times the
// expected noise norm.
struct SyntheticSpec {
  struct Block {
    int id = 0;
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t channels = 0;
  };

  std::string name = "synthetic_blobs";
  std::int64_t num_classes = 5;
  std::size_t train_per_class = 15;
  std::size_t test_per_class = 15;
  std::vector<Block> blocks = {{2, 8, 8, 8}, {3, 4, 4, 12}, {4, 2, 2, 16}};
  double sigma = 1.0;
  double separation = 6.0;
  double cell_jitter = 0.0;
  std::uint64_t seed = 7;
  bool with_images = false;
  int image_size = 224;
};

// Writes manifest.json and its tensors (plus images/ when requested) under
// `dir`, returning the loaded manifest. Output is a pure function of spec.
DatasetManifest write_synthetic_dataset(const SyntheticSpec& spec, const std::filesystem::path& dir);

}  // namespace protoexplain
