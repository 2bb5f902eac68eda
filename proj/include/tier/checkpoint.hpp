#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "tier/losses.hpp"
#include "tier/model.hpp"

namespace tier {

struct TrainConfig {
  TierConfig tier;
  ModelConfig model;
  double learning_rate = 1e-4;
  std::size_t batch_size = 32;
  int epochs = 30;
  std::uint64_t seed = 42;
  std::string dataset_path;
  int checkpoint_every = 0;  // epochs between snapshots; 0 = final only
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  void validate() const;
  std::string to_json() const;
  static TrainConfig from_json(const std::string& text);
};

struct EpochStats {
  int epoch = 0;
  LossBreakdown loss;  // means over the epoch's steps
};

struct AdamState {
  // first/second moments aligned with ModelParams::for_each order
  std::vector<std::pair<std::string, Tensor>> m, v;
  std::int64_t step = 0;

  static AdamState init(const ModelParams& params);
};

struct Checkpoint {
  TrainConfig config;
  int epoch = 0;
  ModelParams params;
  AdamState opt;
  std::vector<EpochStats> history;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace tier
