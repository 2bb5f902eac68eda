// Command-line front end: gen-data, train, sweep, zeroshot, eval, heatmap,
// curves. Every subcommand echoes its fully resolved configuration to the
// output directory before doing any work, and all randomness flows from the
// --seed flag.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tier/checkpoint.hpp"
#include "tier/errors.hpp"
#include "tier/kernels.hpp"
#include "tier/metrics.hpp"
#include "tier/rng.hpp"
#include "tier/synth_data.hpp"
#include "tier/trainer.hpp"
#include "tier/zeroshot.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Fills flag values that were not given on the command line from a JSON
// config file; precedence is flag > file > built-in default.
class ConfigFile {
 public:
  void load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw tier::ConfigError("cannot open config file: " + path);
    json_ = nlohmann::json::parse(in, nullptr, /*allow_exceptions=*/false);
    if (json_.is_discarded()) throw tier::ConfigError("config file is not valid JSON: " + path);
  }

  template <typename T>
  void fallback(const CLI::Option* opt, const char* key, T& value) const {
    if (opt != nullptr && opt->count() > 0) return;
    if (!json_.contains(key)) return;
    try {
      value = json_.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw tier::ConfigError(std::string("config file: bad value for '") + key + "'");
    }
  }

 private:
  nlohmann::json json_;
};

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw tier::Error("cannot write: " + path);
  out << text;
  if (!out) throw tier::Error("write failed: " + path);
}

void echo_config(const fs::path& out_dir, const ordered_json& resolved) {
  fs::create_directories(out_dir);
  write_text((out_dir / "config.resolved.json").string(), resolved.dump(2) + "\n");
}

ordered_json train_config_json(const tier::TrainConfig& cfg) {
  return ordered_json::parse(cfg.to_json());
}

void write_history_csv(const std::vector<tier::EpochStats>& history, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw tier::Error("cannot write: " + path);
  out << "epoch,clip,patch_pen,token_pen,total\n";
  for (const tier::EpochStats& s : history) {
    out << s.epoch << "," << fmt(s.loss.clip_loss) << "," << fmt(s.loss.patch_penalty) << ","
        << fmt(s.loss.token_penalty) << "," << fmt(s.loss.total) << "\n";
  }
}

void write_scores_csv(const std::vector<tier::ScoredLabel>& scored, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw tier::Error("cannot write: " + path);
  out << "sample_id,label,score,truth\n";
  for (const tier::ScoredLabel& sl : scored) {
    for (std::size_t i = 0; i < sl.scores.size(); ++i) {
      out << sl.sample_ids[i] << "," << sl.label << "," << fmt(sl.scores[i]) << ","
          << sl.truth[i] << "\n";
    }
  }
}

struct ScoresFile {
  std::vector<std::string> labels;  // in file order
  std::map<std::string, std::vector<double>> scores;
  std::map<std::string, std::vector<int>> truth;
};

ScoresFile read_scores_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw tier::Error("cannot open scores file: " + path);
  ScoresFile sf;
  std::string line;
  if (!std::getline(in, line)) throw tier::IntegrityError("scores file is empty: " + path);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (;;) {
      std::size_t comma = line.find(',', start);
      fields.push_back(line.substr(start, comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (fields.size() != 4) {
      throw tier::IntegrityError("scores file: malformed line " + std::to_string(lineno) + " in " +
                                 path);
    }
    const std::string& label = fields[1];
    if (sf.scores.find(label) == sf.scores.end()) sf.labels.push_back(label);
    try {
      sf.scores[label].push_back(std::stod(fields[2]));
      sf.truth[label].push_back(std::stoi(fields[3]));
    } catch (const std::exception&) {
      throw tier::IntegrityError("scores file: bad number on line " + std::to_string(lineno) +
                                 " in " + path);
    }
  }
  if (sf.labels.empty()) throw tier::IntegrityError("scores file has no rows: " + path);
  return sf;
}

// ==================== subcommands ====================

int cmd_gen_data(const tier::DataConfig& cfg, const std::string& out, bool force) {
  fs::path out_dir(out);
  fs::path dataset_path = out_dir / "dataset.tierdata";
  fs::path queries_path = out_dir / "queries.json";
  if (!force && (fs::exists(dataset_path) || fs::exists(queries_path))) {
    throw tier::ConfigError("gen-data: output exists (use --force to overwrite): " +
                            dataset_path.string());
  }
  tier::Dataset dataset = tier::generate_dataset(cfg);
  ordered_json resolved = ordered_json::parse(dataset.manifest.to_json());
  echo_config(out_dir, resolved);
  tier::write_dataset(dataset, dataset_path.string());
  tier::QueryRegistry::defaults_for(dataset.manifest).save(queries_path.string());
  std::cout << "dataset: " << dataset_path.string() << "\n"
            << "queries: " << queries_path.string() << "\n"
            << "splits: train=" << cfg.count_train << " val=" << cfg.count_val
            << " test=" << cfg.count_test << "\n"
            << "classes: " << cfg.classes << ", grid " << cfg.grid << "x" << cfg.grid
            << ", patch " << cfg.patch_size << "px, seed " << cfg.seed << "\n";
  return 0;
}

int cmd_train(const tier::TrainConfig& cfg, const std::string& out) {
  cfg.validate();
  fs::path out_dir(out);
  ordered_json resolved = train_config_json(cfg);
  resolved["variant"] =
      (cfg.tier.lambda_p == 0.0 && cfg.tier.lambda_t == 0.0) ? "unregularized" : "regularized";
  echo_config(out_dir, resolved);
  tier::Dataset dataset = tier::read_dataset(cfg.dataset_path);
  auto on_snapshot = [&](const tier::Checkpoint& snap) {
    tier::save_checkpoint(snap, (out_dir / ("checkpoint_epoch" + std::to_string(snap.epoch) +
                                            ".tierckpt"))
                                    .string());
  };
  tier::TrainResult result = tier::train(cfg, dataset, nullptr, nullptr, on_snapshot);
  tier::save_checkpoint(result.checkpoint, (out_dir / "checkpoint.tierckpt").string());
  write_history_csv(result.history, (out_dir / "history.csv").string());
  std::cout << "checkpoint: " << (out_dir / "checkpoint.tierckpt").string() << "\n";
  if (!result.history.empty()) {
    const tier::EpochStats& last = result.history.back();
    std::cout << "final epoch " << last.epoch << ": total " << fmt(last.loss.total) << " (clip "
              << fmt(last.loss.clip_loss) << ")\n";
  }
  return 0;
}

int cmd_sweep(const tier::SweepConfig& cfg, const std::string& dataset_path,
              const std::string& queries_path, const std::string& out) {
  fs::path out_dir(out);
  ordered_json resolved = train_config_json(cfg.base);
  resolved["epochs"] = cfg.epochs;
  resolved["grid_lambda_p"] = cfg.lambda_ps;
  resolved["grid_lambda_t"] = cfg.lambda_ts;
  echo_config(out_dir, resolved);
  tier::Dataset dataset = tier::read_dataset(dataset_path);
  tier::QueryRegistry registry = queries_path.empty()
                                     ? tier::QueryRegistry::defaults_for(dataset.manifest)
                                     : tier::QueryRegistry::load(queries_path);
  tier::SweepResult result = tier::sweep(cfg, dataset, registry);
  tier::write_sweep_csv(result, (out_dir / "sweep.csv").string());
  std::cout << "sweep: " << (out_dir / "sweep.csv").string() << "\n"
            << "best: lambda_p=" << fmt(result.lambda_ps[result.best_row])
            << " lambda_t=" << fmt(result.lambda_ts[result.best_col])
            << " auc=" << fmt(result.best_auc) << "\n";
  return 0;
}

int cmd_zeroshot(const std::string& checkpoint_path, const std::string& queries_path,
                 const std::string& dataset_path, const std::string& split,
                 const std::string& out) {
  fs::path out_dir(out);
  ordered_json resolved;
  resolved["checkpoint"] = checkpoint_path;
  resolved["queries"] = queries_path;
  resolved["dataset"] = dataset_path;
  resolved["split"] = split;
  echo_config(out_dir, resolved);
  tier::Checkpoint ckpt = tier::load_checkpoint(checkpoint_path);
  tier::Dataset dataset = tier::read_dataset(dataset_path);
  tier::QueryRegistry registry = queries_path.empty()
                                     ? tier::QueryRegistry::defaults_for(dataset.manifest)
                                     : tier::QueryRegistry::load(queries_path);
  auto scored = tier::score_split(ckpt.params, ckpt.config.model, dataset.split(split), registry,
                                  dataset.manifest);
  write_scores_csv(scored, (out_dir / "scores.csv").string());
  std::cout << "scores: " << (out_dir / "scores.csv").string() << "\n"
            << "mean zero-shot AUC: " << fmt(tier::mean_zero_shot_auc(scored)) << "\n";
  return 0;
}

tier::metrics::EvalReport build_report(const std::string& name, const ScoresFile& sf,
                                       const ScoresFile* val, std::size_t bootstrap,
                                       std::uint64_t seed,
                                       tier::metrics::ThresholdObjective objective,
                                       std::map<std::string, std::vector<double>>* replicates) {
  tier::metrics::EvalReport report;
  report.model_name = name;
  double auc_sum = 0.0;
  for (const std::string& label : sf.labels) {
    const auto& scores = sf.scores.at(label);
    const auto& truth = sf.truth.at(label);
    tier::metrics::BootstrapResult boot = tier::metrics::bootstrap_auc(
        scores, truth, bootstrap, tier::rng::mix(seed, std::hash<std::string>{}(label)));
    tier::metrics::EvalLabelReport lr;
    lr.label = label;
    lr.auc_mean = boot.mean;
    lr.auc_std = boot.stddev;
    const auto& thr_scores = val != nullptr ? val->scores.at(label) : scores;
    const auto& thr_truth = val != nullptr ? val->truth.at(label) : truth;
    lr.threshold = tier::metrics::threshold_select(thr_scores, thr_truth, objective);
    std::vector<int> pred(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) pred[i] = scores[i] >= lr.threshold ? 1 : 0;
    tier::metrics::MccF1 m = tier::metrics::mcc_f1(pred, truth);
    lr.mcc = m.mcc;
    lr.f1 = m.f1;
    report.labels.push_back(lr);
    auc_sum += boot.mean;
    if (replicates) (*replicates)[label] = std::move(boot.replicates);
  }
  report.mean_auc = auc_sum / static_cast<double>(sf.labels.size());
  return report;
}

int cmd_eval(const std::vector<std::string>& scores_paths,
             const std::vector<std::string>& val_paths, std::size_t bootstrap, std::uint64_t seed,
             const std::string& objective_name, const std::string& out) {
  fs::path out_dir(out);
  ordered_json resolved;
  resolved["scores"] = scores_paths;
  resolved["val_scores"] = val_paths;
  resolved["bootstrap"] = bootstrap;
  resolved["seed"] = seed;
  resolved["threshold_objective"] = objective_name;
  echo_config(out_dir, resolved);
  tier::metrics::ThresholdObjective objective;
  if (objective_name == "mcc") {
    objective = tier::metrics::ThresholdObjective::kMcc;
  } else if (objective_name == "f1") {
    objective = tier::metrics::ThresholdObjective::kF1;
  } else {
    throw tier::ConfigError("eval: threshold objective must be 'mcc' or 'f1'");
  }
  if (!val_paths.empty() && val_paths.size() != scores_paths.size()) {
    throw tier::ConfigError("eval: --val-scores must match --scores count");
  }

  std::vector<ScoresFile> files;
  std::vector<ScoresFile> vals;
  for (const std::string& p : scores_paths) files.push_back(read_scores_csv(p));
  for (const std::string& p : val_paths) vals.push_back(read_scores_csv(p));

  std::vector<std::map<std::string, std::vector<double>>> reps(files.size());
  for (std::size_t f = 0; f < files.size(); ++f) {
    std::string name = fs::path(scores_paths[f]).parent_path().filename().string();
    if (name.empty()) name = "model_" + std::string(1, char('a' + f));
    tier::metrics::EvalReport report =
        build_report(name, files[f], vals.empty() ? nullptr : &vals[f], bootstrap, seed,
                     objective, &reps[f]);
    const std::string stem = "report_" + std::string(1, char('a' + f));
    tier::metrics::write_eval_report_json(report, (out_dir / (stem + ".json")).string());
    tier::metrics::write_eval_report_csv(report, (out_dir / (stem + ".csv")).string());
    std::cout << stem << " (" << name << "): mean AUC " << fmt(report.mean_auc) << "\n";
  }

  if (files.size() == 2) {
    if (files[0].labels != files[1].labels) {
      throw tier::ConfigError("eval: the two scores files cover different labels");
    }
    std::vector<tier::metrics::ComparisonResult> rows;
    std::vector<std::string> labels;
    // paper-style head-to-head: per-label t-test plus an Average row over the
    // per-replicate mean across labels
    std::vector<double> avg_a(bootstrap, 0.0), avg_b(bootstrap, 0.0);
    for (const std::string& label : files[0].labels) {
      const auto& ra = reps[0][label];
      const auto& rb = reps[1][label];
      for (std::size_t r = 0; r < bootstrap; ++r) {
        avg_a[r] += ra[r];
        avg_b[r] += rb[r];
      }
    }
    const double nl = static_cast<double>(files[0].labels.size());
    for (std::size_t r = 0; r < bootstrap; ++r) {
      avg_a[r] /= nl;
      avg_b[r] /= nl;
    }
    rows.push_back(tier::metrics::t_test("A", avg_a, "B", avg_b));
    labels.push_back("Average");
    for (const std::string& label : files[0].labels) {
      rows.push_back(tier::metrics::t_test("A", reps[0][label], "B", reps[1][label]));
      labels.push_back(label);
    }
    tier::metrics::write_comparison_csv(rows, labels, (out_dir / "comparison.csv").string());
    std::cout << "comparison: " << (out_dir / "comparison.csv").string() << "\n";
  }
  return 0;
}

int cmd_heatmap(const std::string& checkpoint_path, const std::string& dataset_path,
                const std::string& split, std::uint32_t sample_id, const std::string& label,
                const std::string& queries_path, const std::string& out) {
  fs::path out_dir(out);
  ordered_json resolved;
  resolved["checkpoint"] = checkpoint_path;
  resolved["dataset"] = dataset_path;
  resolved["split"] = split;
  resolved["sample_id"] = sample_id;
  resolved["label"] = label;
  resolved["queries"] = queries_path;
  echo_config(out_dir, resolved);
  tier::Checkpoint ckpt = tier::load_checkpoint(checkpoint_path);
  tier::Dataset dataset = tier::read_dataset(dataset_path);
  tier::QueryRegistry registry = queries_path.empty()
                                     ? tier::QueryRegistry::defaults_for(dataset.manifest)
                                     : tier::QueryRegistry::load(queries_path);
  const tier::SyntheticSample* sample = nullptr;
  for (const tier::SyntheticSample& s : dataset.split(split)) {
    if (s.id == sample_id) {
      sample = &s;
      break;
    }
  }
  if (sample == nullptr) {
    throw tier::ConfigError("heatmap: sample id " + std::to_string(sample_id) +
                            " not in split '" + split + "' of " + dataset_path);
  }
  const tier::QueryRegistry::Entry* entry = nullptr;
  for (const auto& e : registry.entries) {
    if (e.label == label) {
      entry = &e;
      break;
    }
  }
  if (entry == nullptr) {
    throw tier::ConfigError("heatmap: label '" + label + "' not in query registry");
  }
  tier::QuerySet qs = tier::build_query_set(entry->label, entry->positive, entry->negative,
                                            ckpt.params, ckpt.config.model);
  tier::Heatmap hm = tier::make_heatmap(ckpt.params, ckpt.config.model, sample->pixels, qs,
                                        sample_id);
  const std::string stem = "heatmap_" + std::to_string(sample_id) + "_" + label;
  tier::write_heatmap_ppm(hm, ckpt.config.model.patch_size, (out_dir / (stem + ".ppm")).string());
  tier::write_heatmap_csv(hm, (out_dir / (stem + ".csv")).string());
  std::cout << "heatmap: " << (out_dir / (stem + ".ppm")).string() << "\n";
  return 0;
}

int cmd_curves(const std::vector<std::string>& checkpoint_paths, const std::string& dataset_path,
               const std::string& split, const std::string& out) {
  fs::path out_dir(out);
  ordered_json resolved;
  resolved["checkpoints"] = checkpoint_paths;
  resolved["dataset"] = dataset_path;
  resolved["split"] = split;
  echo_config(out_dir, resolved);
  tier::Dataset dataset = tier::read_dataset(dataset_path);
  for (const std::string& path : checkpoint_paths) {
    tier::Checkpoint ckpt = tier::load_checkpoint(path);
    tier::metrics::SimilarityCurves curves =
        tier::metrics::similarity_curves(ckpt.params, ckpt.config.model, dataset.split(split));
    std::string name = fs::path(path).stem().string();
    tier::metrics::write_similarity_curves_csv(curves.raw,
                                               (out_dir / ("curves_raw_" + name + ".csv")).string());
    tier::metrics::write_similarity_curves_csv(
        curves.normalized, (out_dir / ("curves_norm_" + name + ".csv")).string());
    std::cout << "curves for " << name << ": rank-1 normalized mean "
              << fmt(curves.normalized.mean.front()) << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"TIER: entropy-regularized contrastive text-image training at desk scale"};
  app.require_subcommand(1);

  std::string config_path;
  int workers = 0;
  app.add_option("--config", config_path, "JSON config file (flags override it)");
  app.add_option("--workers", workers, "cap worker threads (0 = all cores)");

  // ---- gen-data ----
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic paired dataset");
  tier::DataConfig dcfg;
  std::string gen_out = "data";
  bool gen_force = false;
  auto* g_seed = gen->add_option("--seed", dcfg.seed, "generator seed");
  auto* g_train = gen->add_option("--count-train", dcfg.count_train, "training samples");
  auto* g_val = gen->add_option("--count-val", dcfg.count_val, "validation samples");
  auto* g_test = gen->add_option("--count-test", dcfg.count_test, "test samples");
  auto* g_classes = gen->add_option("--classes", dcfg.classes, "object classes");
  auto* g_sigma = gen->add_option("--noise-sigma", dcfg.noise_sigma, "background noise amplitude");
  auto* g_out = gen->add_option("--out", gen_out, "output directory");
  gen->add_flag("--force", gen_force, "overwrite existing output");

  // ---- train ----
  auto* tr = app.add_subcommand("train", "train a model on a dataset");
  tier::TrainConfig tcfg;
  std::string train_out = "run";
  auto* t_lp = tr->add_option("--lambda-p", tcfg.tier.lambda_p, "patch penalty weight");
  auto* t_lt = tr->add_option("--lambda-t", tcfg.tier.lambda_t, "token penalty weight");
  auto* t_epochs = tr->add_option("--epochs", tcfg.epochs, "training epochs");
  auto* t_seed = tr->add_option("--seed", tcfg.seed, "training seed");
  auto* t_lr = tr->add_option("--learning-rate", tcfg.learning_rate, "Adam learning rate");
  auto* t_batch = tr->add_option("--batch-size", tcfg.batch_size, "contrastive batch size");
  auto* t_data = tr->add_option("--dataset", tcfg.dataset_path, "dataset container");
  auto* t_every = tr->add_option("--checkpoint-every", tcfg.checkpoint_every,
                                 "epochs between snapshots (0 = final only)");
  bool flat_avg = false;
  bool no_cls = false;
  bool omit_penalties = false;
  auto* t_flat = tr->add_flag("--flat-penalty-average", flat_avg,
                              "pool all rows/columns across the batch before averaging");
  auto* t_nocls = tr->add_flag("--exclude-cls-from-penalty", no_cls,
                               "drop the [CLS] row from the penalty similarity matrix");
  auto* t_omit = tr->add_flag("--omit-penalty-terms", omit_penalties,
                              "build the loss without penalty terms entirely");
  auto* t_out = tr->add_option("--out", train_out, "output directory");

  // ---- sweep ----
  auto* sw = app.add_subcommand("sweep", "grid search over the penalty weights");
  double grid_min = 0.0, grid_max = 0.25, grid_step = 0.05;
  int sweep_epochs = 1;
  tier::TrainConfig scfg;
  std::string sweep_data, sweep_queries, sweep_out = "sweep";
  auto* s_min = sw->add_option("--grid-min", grid_min, "smallest lambda");
  auto* s_max = sw->add_option("--grid-max", grid_max, "largest lambda");
  auto* s_step = sw->add_option("--grid-step", grid_step, "lambda step");
  auto* s_epochs = sw->add_option("--epochs", sweep_epochs, "epochs per cell");
  auto* s_seed = sw->add_option("--seed", scfg.seed, "shared seed for every cell");
  auto* s_lr = sw->add_option("--learning-rate", scfg.learning_rate, "Adam learning rate");
  auto* s_batch = sw->add_option("--batch-size", scfg.batch_size, "contrastive batch size");
  auto* s_data = sw->add_option("--dataset", sweep_data, "dataset container");
  auto* s_queries = sw->add_option("--queries", sweep_queries,
                                   "query registry (default: built from the manifest)");
  auto* s_out = sw->add_option("--out", sweep_out, "output directory");

  // ---- zeroshot ----
  auto* zs = app.add_subcommand("zeroshot", "score a dataset split against label queries");
  std::string zs_ckpt, zs_queries, zs_data, zs_split = "test", zs_out = "zeroshot";
  auto* z_ckpt = zs->add_option("--checkpoint", zs_ckpt, "model checkpoint")->required();
  auto* z_queries = zs->add_option("--queries", zs_queries,
                                   "query registry (default: built from the manifest)");
  auto* z_data = zs->add_option("--dataset", zs_data, "dataset container")->required();
  auto* z_split = zs->add_option("--dataset-split", zs_split, "train|val|test");
  auto* z_out = zs->add_option("--out", zs_out, "output directory");

  // ---- eval ----
  auto* ev = app.add_subcommand("eval", "bootstrap AUC report (and A/B comparison)");
  std::vector<std::string> eval_scores, eval_val_scores;
  std::size_t eval_bootstrap = 1000;
  std::uint64_t eval_seed = 42;
  std::string eval_objective = "mcc", eval_out = "eval";
  auto* e_scores = ev->add_option("--scores", eval_scores, "scores CSV (one or two models)")
                       ->required()
                       ->expected(1, 2);
  auto* e_val = ev->add_option("--val-scores", eval_val_scores,
                               "validation scores CSV for threshold selection")
                    ->expected(1, 2);
  auto* e_boot = ev->add_option("--bootstrap", eval_bootstrap, "bootstrap replicates");
  auto* e_seed = ev->add_option("--seed", eval_seed, "bootstrap seed");
  auto* e_obj = ev->add_option("--threshold-objective", eval_objective, "mcc|f1");
  auto* e_out = ev->add_option("--out", eval_out, "output directory");

  // ---- heatmap ----
  auto* hm = app.add_subcommand("heatmap", "patch-level zero-shot score map for one sample");
  std::string hm_ckpt, hm_data, hm_split = "test", hm_label, hm_queries, hm_out = "heatmap";
  std::uint32_t hm_sample = 0;
  auto* h_ckpt = hm->add_option("--checkpoint", hm_ckpt, "model checkpoint")->required();
  auto* h_data = hm->add_option("--dataset", hm_data, "dataset container")->required();
  auto* h_split = hm->add_option("--dataset-split", hm_split, "train|val|test");
  auto* h_sample = hm->add_option("--sample-id", hm_sample, "sample id")->required();
  auto* h_label = hm->add_option("--label", hm_label, "query label")->required();
  auto* h_queries = hm->add_option("--queries", hm_queries,
                                   "query registry (default: built from the manifest)");
  auto* h_out = hm->add_option("--out", hm_out, "output directory");

  // ---- curves ----
  auto* cv = app.add_subcommand("curves", "sorted patch-to-[CLS] similarity curves");
  std::vector<std::string> cv_ckpts;
  std::string cv_data, cv_split = "val", cv_out = "curves";
  auto* c_ckpt = cv->add_option("--checkpoint", cv_ckpts, "one or two checkpoints")
                     ->required()
                     ->expected(1, 2);
  auto* c_data = cv->add_option("--dataset", cv_data, "dataset container")->required();
  auto* c_split = cv->add_option("--dataset-split", cv_split, "train|val|test");
  auto* c_out = cv->add_option("--out", cv_out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    ConfigFile file;
    if (!config_path.empty()) file.load(config_path);
    tier::kernels::set_max_threads(workers);

    if (gen->parsed()) {
      file.fallback(g_seed, "seed", dcfg.seed);
      file.fallback(g_train, "count-train", dcfg.count_train);
      file.fallback(g_val, "count-val", dcfg.count_val);
      file.fallback(g_test, "count-test", dcfg.count_test);
      file.fallback(g_classes, "classes", dcfg.classes);
      file.fallback(g_sigma, "noise-sigma", dcfg.noise_sigma);
      file.fallback(g_out, "out", gen_out);
      return cmd_gen_data(dcfg, gen_out, gen_force);
    }
    if (tr->parsed()) {
      file.fallback(t_lp, "lambda-p", tcfg.tier.lambda_p);
      file.fallback(t_lt, "lambda-t", tcfg.tier.lambda_t);
      file.fallback(t_epochs, "epochs", tcfg.epochs);
      file.fallback(t_seed, "seed", tcfg.seed);
      file.fallback(t_lr, "learning-rate", tcfg.learning_rate);
      file.fallback(t_batch, "batch-size", tcfg.batch_size);
      file.fallback(t_data, "dataset", tcfg.dataset_path);
      file.fallback(t_every, "checkpoint-every", tcfg.checkpoint_every);
      file.fallback(t_flat, "flat-penalty-average", flat_avg);
      file.fallback(t_nocls, "exclude-cls-from-penalty", no_cls);
      file.fallback(t_omit, "omit-penalty-terms", omit_penalties);
      file.fallback(t_out, "out", train_out);
      tcfg.tier.averaging =
          flat_avg ? tier::PenaltyAveraging::kFlat : tier::PenaltyAveraging::kPerSample;
      tcfg.tier.cls_in_penalty = !no_cls;
      tcfg.tier.build_penalty_terms = !omit_penalties;
      if (tcfg.dataset_path.empty()) throw tier::ConfigError("train: --dataset is required");
      return cmd_train(tcfg, train_out);
    }
    if (sw->parsed()) {
      file.fallback(s_min, "grid-min", grid_min);
      file.fallback(s_max, "grid-max", grid_max);
      file.fallback(s_step, "grid-step", grid_step);
      file.fallback(s_epochs, "epochs", sweep_epochs);
      file.fallback(s_seed, "seed", scfg.seed);
      file.fallback(s_lr, "learning-rate", scfg.learning_rate);
      file.fallback(s_batch, "batch-size", scfg.batch_size);
      file.fallback(s_data, "dataset", sweep_data);
      file.fallback(s_queries, "queries", sweep_queries);
      file.fallback(s_out, "out", sweep_out);
      if (sweep_data.empty()) throw tier::ConfigError("sweep: --dataset is required");
      if (grid_step <= 0.0) throw tier::ConfigError("sweep: --grid-step must be positive");
      if (grid_max < grid_min) throw tier::ConfigError("sweep: --grid-max below --grid-min");
      tier::SweepConfig swcfg;
      for (double v = grid_min; v <= grid_max + 1e-12; v += grid_step) {
        swcfg.lambda_ps.push_back(v);
        swcfg.lambda_ts.push_back(v);
      }
      swcfg.epochs = sweep_epochs;
      scfg.dataset_path = sweep_data;
      swcfg.base = scfg;
      return cmd_sweep(swcfg, sweep_data, sweep_queries, sweep_out);
    }
    if (zs->parsed()) {
      file.fallback(z_ckpt, "checkpoint", zs_ckpt);
      file.fallback(z_queries, "queries", zs_queries);
      file.fallback(z_data, "dataset", zs_data);
      file.fallback(z_split, "dataset-split", zs_split);
      file.fallback(z_out, "out", zs_out);
      return cmd_zeroshot(zs_ckpt, zs_queries, zs_data, zs_split, zs_out);
    }
    if (ev->parsed()) {
      file.fallback(e_scores, "scores", eval_scores);
      file.fallback(e_val, "val-scores", eval_val_scores);
      file.fallback(e_boot, "bootstrap", eval_bootstrap);
      file.fallback(e_seed, "seed", eval_seed);
      file.fallback(e_obj, "threshold-objective", eval_objective);
      file.fallback(e_out, "out", eval_out);
      return cmd_eval(eval_scores, eval_val_scores, eval_bootstrap, eval_seed, eval_objective,
                      eval_out);
    }
    if (hm->parsed()) {
      file.fallback(h_ckpt, "checkpoint", hm_ckpt);
      file.fallback(h_data, "dataset", hm_data);
      file.fallback(h_split, "dataset-split", hm_split);
      file.fallback(h_sample, "sample-id", hm_sample);
      file.fallback(h_label, "label", hm_label);
      file.fallback(h_queries, "queries", hm_queries);
      file.fallback(h_out, "out", hm_out);
      return cmd_heatmap(hm_ckpt, hm_data, hm_split, hm_sample, hm_label, hm_queries, hm_out);
    }
    if (cv->parsed()) {
      file.fallback(c_ckpt, "checkpoint", cv_ckpts);
      file.fallback(c_data, "dataset", cv_data);
      file.fallback(c_split, "dataset-split", cv_split);
      file.fallback(c_out, "out", cv_out);
      return cmd_curves(cv_ckpts, cv_data, cv_split, cv_out);
    }
  } catch (const tier::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const tier::IntegrityError& e) {
    std::cerr << "data integrity error: " << e.what() << "\n";
    return 3;
  } catch (const tier::NumericError& e) {
    std::cerr << "numerical abort: " << e.what() << "\n";
    return 4;
  } catch (const tier::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
