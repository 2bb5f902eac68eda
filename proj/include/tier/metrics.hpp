#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tier/model.hpp"
#include "tier/synth_data.hpp"

namespace tier::metrics {

// Mann-Whitney AUC with average-rank tie handling (each tie counts 1/2).
// Exact: the rank sums are integer arithmetic until the final division.
double auc(std::span<const double> scores, std::span<const int> labels);

struct BootstrapResult {
  std::vector<double> replicates;
  double mean = 0.0;
  double stddev = 0.0;  // sample std (n-1); 0 for a single replicate
  std::uint64_t seed = 0;
};

// Resamples the evaluation set with replacement, one deterministic RNG stream
// per replicate. Single-class resamples are redrawn (up to 100 attempts).
BootstrapResult bootstrap_auc(std::span<const double> scores, std::span<const int> labels,
                              std::size_t n_replicates, std::uint64_t seed);

struct ComparisonResult {
  std::string model_a, model_b;
  double mean_difference = 0.0;  // mean(a) - mean(b)
  double t_statistic = 0.0;
  double p_value = 1.0;
  int winner = 0;  // +1 a, -1 b, 0 tie
};

// Welch's two-sample t-test, two-sided p via the t CDF.
ComparisonResult t_test(std::span<const double> a, std::span<const double> b);
ComparisonResult t_test(const std::string& name_a, std::span<const double> a,
                        const std::string& name_b, std::span<const double> b);

struct MccF1 {
  double mcc = 0.0;
  double f1 = 0.0;
};
MccF1 mcc_f1(std::span<const int> predicted, std::span<const int> truth);

enum class ThresholdObjective { kMcc, kF1 };

// Scans midpoints of sorted unique scores (plus a below-minimum candidate so
// the all-positive prediction is reachable); prediction is score >= threshold.
// Ties keep the lowest threshold.
double threshold_select(std::span<const double> scores, std::span<const int> labels,
                        ThresholdObjective objective);

struct SimilarityCurve {
  std::vector<double> mean, stddev;  // per descending rank, over the image set
};
struct SimilarityCurves {
  SimilarityCurve raw;         // patch-to-[CLS] cosines sorted descending
  SimilarityCurve normalized;  // each image's values divided by their sum
};
SimilarityCurves similarity_curves(const ModelParams& params, const ModelConfig& cfg,
                                   std::span<const SyntheticSample> samples);

// Mean over samples of the mean row entropy of softmax over each token's
// patch similarities.
double mean_row_entropy(const ModelParams& params, const ModelConfig& cfg,
                        std::span<const SyntheticSample> samples, bool cls_in_penalty = true);

// Fraction of (sample, object token) pairs whose ground-truth patch lands in
// the token's top-k similarity patches.
double localization_hit_rate(const ModelParams& params, const ModelConfig& cfg,
                             std::span<const SyntheticSample> samples, std::size_t k);

// Student-t machinery behind the Welch p value; exposed for the oracle tests.
double incomplete_beta(double a, double b, double x);
double student_t_two_sided_p(double t, double dof);

// ==================== report emission ====================

struct EvalLabelReport {
  std::string label;
  double auc_mean = 0.0, auc_std = 0.0;
  double mcc = 0.0, f1 = 0.0, threshold = 0.0;
};
struct EvalReport {
  std::string model_name;
  std::vector<EvalLabelReport> labels;
  double mean_auc = 0.0;
};

std::string eval_report_json(const EvalReport& report);
void write_eval_report_json(const EvalReport& report, const std::string& path);
void write_eval_report_csv(const EvalReport& report, const std::string& path);
void write_comparison_csv(const std::vector<ComparisonResult>& rows,
                          const std::vector<std::string>& labels, const std::string& path);
void write_similarity_curves_csv(const SimilarityCurve& curve, const std::string& path);

}  // namespace tier::metrics
