#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <vector>

#include "tier/io.hpp"
#include "tier/trainer.hpp"

using namespace tier;
namespace fs = std::filesystem;

namespace {

// small model + dataset so the suite stays fast
ModelConfig tiny_model() {
  ModelConfig cfg;
  cfg.grid = 3;
  cfg.patch_size = 4;
  cfg.image_feat = 8;
  cfg.text_feat = 8;
  cfg.hidden = 10;
  cfg.embed = 6;
  cfg.vocab = 40;
  cfg.max_len = 12;
  return cfg;
}

DataConfig tiny_data(std::size_t train, std::size_t val = 8, std::size_t test = 8) {
  DataConfig cfg;
  cfg.seed = 123;
  cfg.grid = 3;
  cfg.patch_size = 4;
  cfg.max_len = 12;
  cfg.classes = 6;
  cfg.filler_vocab = 8;
  cfg.max_objects = 3;
  cfg.count_train = train;
  cfg.count_val = val;
  cfg.count_test = test;
  return cfg;
}

TrainConfig tiny_train(std::size_t batch = 8) {
  TrainConfig cfg;
  cfg.model = tiny_model();
  cfg.batch_size = batch;
  cfg.epochs = 1;
  cfg.seed = 7;
  cfg.learning_rate = 1e-3;
  return cfg;
}

bool params_equal(const ModelParams& a, const ModelParams& b) {
  bool equal = true;
  a.for_each([&](const char* name, const Tensor& ta) {
    b.for_each([&](const char* bname, const Tensor& tb) {
      if (std::string(name) == bname && !(ta == tb)) equal = false;
    });
  });
  return equal;
}

fs::path temp_file(const char* name) {
  return fs::temp_directory_path() / (std::string("tier_trainer_") + name);
}

}  // namespace

TEST_SUITE("trainer") {

TEST_CASE("1 epoch over 64 samples at batch 32 takes exactly 2 steps") {
  DataConfig dc = tiny_data(64, 0, 0);
  Dataset data = generate_dataset(dc);
  TrainConfig tc = tiny_train(32);
  int steps = 0;
  double worst_identity = 0.0;
  tc.tier.lambda_p = 0.2;
  tc.tier.lambda_t = 0.1;
  train(tc, data, nullptr, [&](int, int, const LossBreakdown& b) {
    ++steps;
    const double expect = b.clip_loss + 0.2 * b.patch_penalty + 0.1 * b.token_penalty;
    worst_identity = std::max(worst_identity, std::abs(b.total - expect));
  });
  CHECK(steps == 2);
  CHECK(worst_identity <= 1e-12);
}

TEST_CASE("regularized and unregularized runs diverge from step 1") {
  DataConfig dc = tiny_data(16, 0, 0);
  Dataset data = generate_dataset(dc);
  TrainConfig plain = tiny_train(8);
  plain.tier.lambda_p = 0.0;
  plain.tier.lambda_t = 0.0;
  TrainConfig reg = tiny_train(8);
  reg.tier.lambda_p = 0.2;
  reg.tier.lambda_t = 0.1;
  TrainResult a = train(plain, data);
  TrainResult b = train(reg, data);
  CHECK(params_equal(init_params(plain.seed, plain.model), init_params(reg.seed, reg.model)));
  CHECK_FALSE(params_equal(a.checkpoint.params, b.checkpoint.params));
}

TEST_CASE("training loss decreases over 5 epochs") {
  DataConfig dc = tiny_data(128, 0, 0);
  Dataset data = generate_dataset(dc);
  TrainConfig tc = tiny_train(16);
  tc.epochs = 5;
  tc.tier.lambda_p = 0.2;
  tc.tier.lambda_t = 0.1;
  TrainResult result = train(tc, data);
  REQUIRE(result.history.size() == 5);
  CHECK(result.history.back().loss.total < result.history.front().loss.total);
}

TEST_CASE("training is bit-deterministic") {
  DataConfig dc = tiny_data(32, 0, 0);
  Dataset data = generate_dataset(dc);
  TrainConfig tc = tiny_train(8);
  tc.epochs = 2;
  TrainResult a = train(tc, data);
  TrainResult b = train(tc, data);
  CHECK(params_equal(a.checkpoint.params, b.checkpoint.params));
}

TEST_CASE("checkpoint save/load round-trip is byte-identical and resumes exactly") {
  DataConfig dc = tiny_data(32, 0, 0);
  Dataset data = generate_dataset(dc);
  TrainConfig tc = tiny_train(8);
  tc.epochs = 4;
  tc.tier.lambda_p = 0.2;
  tc.tier.lambda_t = 0.1;

  // uninterrupted run
  TrainResult full = train(tc, data);

  // interrupted at epoch 2, saved, reloaded, resumed
  TrainConfig half = tc;
  half.epochs = 2;
  TrainResult part = train(half, data);
  fs::path path = temp_file("resume.tierckpt");
  Checkpoint snap = part.checkpoint;
  snap.config = tc;  // resume with the full-epoch target
  save_checkpoint(snap, path.string());

  Checkpoint loaded = load_checkpoint(path.string());
  CHECK(params_equal(loaded.params, part.checkpoint.params));
  CHECK(loaded.epoch == 2);

  // save -> load -> save produces identical bytes
  fs::path path2 = temp_file("resume2.tierckpt");
  save_checkpoint(loaded, path2.string());
  CHECK(io::read_file(path.string()) == io::read_file(path2.string()));

  TrainResult resumed = train(tc, data, &loaded);
  CHECK(params_equal(resumed.checkpoint.params, full.checkpoint.params));
  CHECK(resumed.history.size() == full.history.size());
  fs::remove(path);
  fs::remove(path2);
}

TEST_CASE("version and dimension mismatches are rejected") {
  DataConfig dc = tiny_data(8, 0, 0);
  Dataset data = generate_dataset(dc);
  TrainConfig tc = tiny_train(4);
  TrainResult result = train(tc, data);
  fs::path path = temp_file("version.tierckpt");
  save_checkpoint(result.checkpoint, path.string());

  auto bytes = io::read_file(path.string());
  bytes[8] += 1;  // bump the version field
  io::write_file(path.string(), bytes);
  CHECK_THROWS_AS((void)load_checkpoint(path.string()), Error);
  fs::remove(path);

  // dataset/model mismatch is a config error
  TrainConfig wrong = tc;
  wrong.model.grid = 5;
  CHECK_THROWS_AS((void)train(wrong, data), ConfigError);
}

TEST_CASE("invalid train configs are rejected") {
  TrainConfig tc = tiny_train();
  tc.batch_size = 1;
  CHECK_THROWS_AS(tc.validate(), ConfigError);
  TrainConfig tc2 = tiny_train();
  tc2.learning_rate = 0.0;
  CHECK_THROWS_AS(tc2.validate(), ConfigError);
  // config json round-trip
  TrainConfig tc3 = tiny_train();
  tc3.tier.lambda_p = 0.15;
  tc3.tier.averaging = PenaltyAveraging::kFlat;
  tc3.dataset_path = "some/data.tierdata";
  TrainConfig back = TrainConfig::from_json(tc3.to_json());
  CHECK(back.to_json() == tc3.to_json());
}

TEST_CASE("sweep covers the grid, flags the best cell, and is order-independent") {
  DataConfig dc = tiny_data(24, 12, 0);
  Dataset data = generate_dataset(dc);
  QueryRegistry registry = QueryRegistry::defaults_for(data.manifest);

  SweepConfig sc;
  sc.lambda_ps = {0.0, 0.1};
  sc.lambda_ts = {0.0, 0.1};
  sc.epochs = 1;
  sc.base = tiny_train(8);
  SweepResult grid = sweep(sc, data, registry);
  REQUIRE(grid.auc.size() == 4);
  for (double v : grid.auc) CHECK(std::isfinite(v));
  CHECK(grid.best_auc == grid.cell(grid.best_row, grid.best_col));

  // run again: cells are independent and bit-identical
  SweepResult again = sweep(sc, data, registry);
  CHECK(grid.auc == again.auc);

  // single-cell sweep equals a plain 1-epoch train + eval
  SweepConfig one;
  one.lambda_ps = {0.1};
  one.lambda_ts = {0.1};
  one.epochs = 1;
  one.base = tiny_train(8);
  SweepResult single = sweep(one, data, registry);
  TrainConfig direct = tiny_train(8);
  direct.epochs = 1;
  direct.tier.lambda_p = 0.1;
  direct.tier.lambda_t = 0.1;
  TrainResult trained = train(direct, data);
  auto scored = score_split(trained.checkpoint.params, direct.model, data.val(), registry,
                            data.manifest);
  CHECK(single.cell(0, 0) == mean_zero_shot_auc(scored));
}

}  // TEST_SUITE
