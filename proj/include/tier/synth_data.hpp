#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tier/model.hpp"
#include "tier/tensor.hpp"

namespace tier {

// One object class: a caption token plus a deterministic s x s binary tile
// derived from `tile_bits` (bit (y*s+x) mod 64 drives pixel (y,x)).
struct ClassSpec {
  std::string name;
  std::uint16_t token = 0;
  std::uint64_t tile_bits = 0;
};

struct DataConfig {
  std::uint64_t seed = 42;
  std::size_t classes = 12;
  std::size_t filler_vocab = 20;
  std::size_t count_train = 4096;
  std::size_t count_val = 512;
  std::size_t count_test = 512;
  double noise_sigma = 0.1;  // uniform background noise amplitude on [0, sigma)
  std::size_t grid = 7;
  std::size_t patch_size = 8;
  std::size_t max_len = 16;
  std::size_t min_objects = 1;
  std::size_t max_objects = 4;
  std::size_t max_filler = 3;

  std::size_t patches() const { return grid * grid; }
  std::size_t image_side() const { return grid * patch_size; }
  // ids: 0 [CLS], 1 [PAD], classes, then filler tokens
  std::size_t vocab_needed() const { return 2 + classes + filler_vocab; }
  void validate() const;
};

struct SyntheticSample {
  std::uint32_t id = 0;
  Tensor pixels;                         // side x side, values in [0, 1 + sigma)
  std::vector<std::uint16_t> tokens;     // length max_len, padded with [PAD]
  std::size_t token_count = 0;           // T = non-pad tokens
  std::vector<std::uint8_t> alignment;   // T x P row-major 0/1 mask
  std::uint64_t labels = 0;              // multi-hot over class indices

  std::uint8_t mask_at(std::size_t row, std::size_t col, std::size_t patches) const {
    return alignment[row * patches + col];
  }
};

struct DatasetManifest {
  std::uint32_t format_version = 1;
  DataConfig config;
  std::vector<ClassSpec> catalog;

  std::string to_json() const;
  static DatasetManifest from_json(const std::string& text);
};

struct Dataset {
  DatasetManifest manifest;
  std::vector<SyntheticSample> samples;  // ordered train, val, test

  std::span<const SyntheticSample> train() const {
    return {samples.data(), manifest.config.count_train};
  }
  std::span<const SyntheticSample> val() const {
    return {samples.data() + manifest.config.count_train, manifest.config.count_val};
  }
  std::span<const SyntheticSample> test() const {
    return {samples.data() + manifest.config.count_train + manifest.config.count_val,
            manifest.config.count_test};
  }
  std::span<const SyntheticSample> split(const std::string& name) const;
};

std::vector<ClassSpec> default_catalog(const DataConfig& cfg);

SyntheticSample generate_sample(const DataConfig& cfg, const std::vector<ClassSpec>& catalog,
                                std::uint32_t sample_id);

Dataset generate_dataset(const DataConfig& cfg);

void write_dataset(const Dataset& dataset, const std::string& path);
Dataset read_dataset(const std::string& path);

}  // namespace tier
