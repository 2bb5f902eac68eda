#include "tier/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "tier/encoders.hpp"
#include "tier/parallel.hpp"
#include "tier/rng.hpp"

namespace tier {

namespace {

constexpr std::uint64_t kShuffleTag = 0x5AFF1EULL;

void check_dataset_compat(const TrainConfig& cfg, const Dataset& dataset) {
  const DataConfig& d = dataset.manifest.config;
  if (d.grid != cfg.model.grid || d.patch_size != cfg.model.patch_size) {
    throw ConfigError("train: dataset grid/patch geometry does not match the model");
  }
  if (d.max_len > cfg.model.max_len) {
    throw ConfigError("train: dataset captions exceed the model's max_len");
  }
  if (d.vocab_needed() > cfg.model.vocab) {
    throw ConfigError("train: dataset vocabulary exceeds the model's");
  }
}

void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state,
               const TrainConfig& cfg) {
  state.step += 1;
  const double b1 = cfg.adam_beta1;
  const double b2 = cfg.adam_beta2;
  const double bias1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double bias2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  std::size_t slot = 0;
  params.for_each([&](const char* name, Tensor& p) {
    const Tensor* g = nullptr;
    grads.for_each([&](const char* gname, const Tensor& gt) {
      if (g == nullptr && std::string(gname) == name) g = &gt;
    });
    Tensor& m = state.m[slot].second;
    Tensor& v = state.v[slot].second;
    for (std::size_t i = 0; i < p.numel(); ++i) {
      const double gi = (*g)[i];
      m[i] = b1 * m[i] + (1.0 - b1) * gi;
      v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
      const double mhat = m[i] / bias1;
      const double vhat = v[i] / bias2;
      p[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.adam_eps);
    }
    ++slot;
  });
}

}  // namespace

TrainResult train(const TrainConfig& config, const Dataset& dataset,
                  const Checkpoint* resume_from, const StepCallback& on_step,
                  const std::function<void(const Checkpoint&)>& on_snapshot) {
  config.validate();
  check_dataset_compat(config, dataset);
  std::span<const SyntheticSample> split = dataset.train();
  if (split.size() < 2) throw ConfigError("train: training split needs at least 2 samples");

  ModelParams params;
  AdamState opt;
  int start_epoch = 0;
  std::vector<EpochStats> history;
  if (resume_from != nullptr) {
    validate_params(resume_from->params, config.model);
    params = resume_from->params;
    opt = resume_from->opt;
    start_epoch = resume_from->epoch;
    history = resume_from->history;
  } else {
    params = init_params(config.seed, config.model);
    opt = AdamState::init(params);
  }

  for (int epoch = start_epoch; epoch < config.epochs; ++epoch) {
    std::vector<std::size_t> order(split.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng::Stream shuffle_stream(
        rng::mix(config.seed, kShuffleTag, static_cast<std::uint64_t>(epoch)));
    shuffle_stream.shuffle(order);

    LossBreakdown epoch_sum;
    int steps = 0;
    // a trailing singleton cannot form a contrastive batch and is skipped
    for (std::size_t begin = 0; begin + 2 <= order.size(); begin += config.batch_size) {
      const std::size_t end = std::min(begin + config.batch_size, order.size());
      LossBreakdown breakdown;
      try {
        Tape tape;
        ModelNodes nodes = register_params(tape, params);
        std::vector<EncodedPair> batch;
        batch.reserve(end - begin);
        for (std::size_t i = begin; i < end; ++i) {
          const SyntheticSample& sample = split[order[i]];
          batch.push_back(encode_pair(tape, nodes, config.model, sample.pixels, sample.tokens));
        }
        LossNodes loss = tier_loss(tape, batch, config.tier, nodes.log_temperature);
        breakdown = read_breakdown(tape, loss);
        tape.backward(loss.total);
        ModelParams grads = read_gradients(tape, nodes, config.model);
        adam_step(params, grads, opt, config);
      } catch (const NumericError& e) {
        throw NumericError("train: aborted at epoch " + std::to_string(epoch) + " step " +
                           std::to_string(steps) + ": " + e.what());
      }
      if (on_step) on_step(epoch, steps, breakdown);
      epoch_sum.clip_loss += breakdown.clip_loss;
      epoch_sum.patch_penalty += breakdown.patch_penalty;
      epoch_sum.token_penalty += breakdown.token_penalty;
      epoch_sum.total += breakdown.total;
      ++steps;
    }
    EpochStats stats;
    stats.epoch = epoch;
    if (steps > 0) {
      stats.loss.clip_loss = epoch_sum.clip_loss / steps;
      stats.loss.patch_penalty = epoch_sum.patch_penalty / steps;
      stats.loss.token_penalty = epoch_sum.token_penalty / steps;
      stats.loss.total = epoch_sum.total / steps;
    }
    history.push_back(stats);

    if (on_snapshot && config.checkpoint_every > 0 &&
        (epoch + 1) % config.checkpoint_every == 0 && epoch + 1 < config.epochs) {
      Checkpoint snap{config, epoch + 1, params, opt, history};
      on_snapshot(snap);
    }
  }

  TrainResult result;
  result.checkpoint = Checkpoint{config, config.epochs, std::move(params), std::move(opt), history};
  result.history = std::move(history);
  return result;
}

SweepResult sweep(const SweepConfig& config, const Dataset& dataset,
                  const QueryRegistry& registry) {
  if (config.lambda_ps.empty() || config.lambda_ts.empty()) {
    throw ConfigError("sweep: empty lambda grid");
  }
  TrainConfig base = config.base;
  base.epochs = config.epochs;
  base.validate();
  check_dataset_compat(base, dataset);
  if (dataset.val().empty()) throw ConfigError("sweep: dataset has no validation split");

  // one shared starting point for every cell
  ModelParams init = init_params(base.seed, base.model);
  AdamState opt0 = AdamState::init(init);
  Checkpoint start{base, 0, init, opt0, {}};

  SweepResult result;
  result.lambda_ps = config.lambda_ps;
  result.lambda_ts = config.lambda_ts;
  result.seed = base.seed;
  const std::size_t cells = config.lambda_ps.size() * config.lambda_ts.size();
  result.auc.assign(cells, std::numeric_limits<double>::quiet_NaN());

  parallel_for(cells, [&](std::size_t cell) {
    const std::size_t r = cell / config.lambda_ts.size();
    const std::size_t c = cell % config.lambda_ts.size();
    TrainConfig cell_cfg = base;
    cell_cfg.tier.lambda_p = config.lambda_ps[r];
    cell_cfg.tier.lambda_t = config.lambda_ts[c];
    Checkpoint cell_start = start;
    cell_start.config = cell_cfg;
    try {
      TrainResult trained = train(cell_cfg, dataset, &cell_start);
      auto scored = score_split(trained.checkpoint.params, cell_cfg.model, dataset.val(),
                                registry, dataset.manifest);
      result.auc[cell] = mean_zero_shot_auc(scored);
    } catch (const Error&) {
      // cell stays NaN; the sweep carries on
    }
  });

  result.best_auc = -1.0;
  for (std::size_t r = 0; r < result.lambda_ps.size(); ++r) {
    for (std::size_t c = 0; c < result.lambda_ts.size(); ++c) {
      const double v = result.cell(r, c);
      if (std::isfinite(v) && v > result.best_auc) {
        result.best_auc = v;
        result.best_row = r;
        result.best_col = c;
      }
    }
  }
  if (result.best_auc < 0.0) throw Error("sweep: every cell failed");
  return result;
}

void write_sweep_csv(const SweepResult& result, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write sweep table: " + path);
  char buf[64];
  out << "lambda_p\\lambda_t";
  for (double lt : result.lambda_ts) {
    std::snprintf(buf, sizeof(buf), "%.17g", lt);
    out << "," << buf;
  }
  out << "\n";
  for (std::size_t r = 0; r < result.lambda_ps.size(); ++r) {
    std::snprintf(buf, sizeof(buf), "%.17g", result.lambda_ps[r]);
    out << buf;
    for (std::size_t c = 0; c < result.lambda_ts.size(); ++c) {
      std::snprintf(buf, sizeof(buf), "%.17g", result.cell(r, c));
      out << "," << buf;
    }
    out << "\n";
  }
  if (!out) throw Error("sweep table write failed: " + path);
}

}  // namespace tier
