#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "tier/checkpoint.hpp"
#include "tier/synth_data.hpp"
#include "tier/zeroshot.hpp"

namespace tier {

using StepCallback = std::function<void(int epoch, int step, const LossBreakdown&)>;

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<EpochStats> history;
};

// Deterministic training loop: shuffle order derives from (seed, epoch), so a
// resumed run replays the exact step sequence of an uninterrupted one.
// `resume_from` continues at its stored epoch; otherwise params come from
// init_params(config.seed). The per-epoch snapshot callback honors
// config.checkpoint_every when `on_snapshot` is set.
TrainResult train(const TrainConfig& config, const Dataset& dataset,
                  const Checkpoint* resume_from = nullptr, const StepCallback& on_step = nullptr,
                  const std::function<void(const Checkpoint&)>& on_snapshot = nullptr);

struct SweepConfig {
  std::vector<double> lambda_ps;  // grid rows
  std::vector<double> lambda_ts;  // grid columns
  int epochs = 1;
  TrainConfig base;  // shared seed / optimizer / model settings
};

struct SweepResult {
  std::vector<double> lambda_ps, lambda_ts;
  std::vector<double> auc;  // row-major [lambda_p][lambda_t]; NaN = cell failed
  std::uint64_t seed = 0;
  std::size_t best_row = 0, best_col = 0;
  double best_auc = 0.0;

  double cell(std::size_t r, std::size_t c) const { return auc[r * lambda_ts.size() + c]; }
};

// Every cell trains from the same initialization with the same seed, then
// reports mean zero-shot AUC on the validation split. Cell failures become
// NaN cells; the sweep keeps going.
SweepResult sweep(const SweepConfig& config, const Dataset& dataset,
                  const QueryRegistry& registry);

void write_sweep_csv(const SweepResult& result, const std::string& path);

}  // namespace tier
