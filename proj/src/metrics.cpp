#include "tier/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "tier/encoders.hpp"
#include "tier/errors.hpp"
#include "tier/kernels.hpp"
#include "tier/parallel.hpp"
#include "tier/rng.hpp"
#include "tier/tape.hpp"
#include "tier/zeroshot.hpp"

namespace tier::metrics {

// ==================== AUC ====================

namespace {

// 2x the average ranks (1-based) so ties stay integer-exact.
std::vector<std::int64_t> double_ranks(std::span<const double> scores) {
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  std::vector<std::int64_t> rank2(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    // positions i..j-1 share 1-based ranks i+1..j; twice their mean is i+j+1
    for (std::size_t k = i; k < j; ++k) rank2[order[k]] = static_cast<std::int64_t>(i + j + 1);
    i = j;
  }
  return rank2;
}

}  // namespace

double auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw ShapeError("auc: scores/labels length mismatch");
  if (scores.empty()) throw ContractError("auc: empty input");
  std::int64_t n1 = 0;
  for (int y : labels) n1 += (y != 0);
  const std::int64_t n0 = static_cast<std::int64_t>(labels.size()) - n1;
  if (n1 == 0 || n0 == 0) {
    throw DomainError("auc: undefined for single-class labels");
  }
  std::vector<std::int64_t> rank2 = double_ranks(scores);
  std::int64_t pos_rank2 = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0) pos_rank2 += rank2[i];
  }
  // 2*U = sum of positive ranks*2 - n1*(n1+1)
  const std::int64_t u2 = pos_rank2 - n1 * (n1 + 1);
  return static_cast<double>(u2) / static_cast<double>(2 * n1 * n0);
}

BootstrapResult bootstrap_auc(std::span<const double> scores, std::span<const int> labels,
                              std::size_t n_replicates, std::uint64_t seed) {
  if (n_replicates < 1) throw ContractError("bootstrap_auc: need at least one replicate");
  // validates inputs and the both-classes precondition
  (void)auc(scores, labels);
  const std::size_t n = scores.size();
  BootstrapResult result;
  result.seed = seed;
  result.replicates.resize(n_replicates);
  parallel_for(n_replicates, [&](std::size_t r) {
    rng::Stream stream(rng::mix(seed, 0xB007ULL, static_cast<std::uint64_t>(r)));
    std::vector<double> rs(n);
    std::vector<int> rl(n);
    bool ok = false;
    for (int attempt = 0; attempt < 100 && !ok; ++attempt) {
      bool pos = false, neg = false;
      for (std::size_t i = 0; i < n; ++i) {
        std::size_t pick = stream.index(n);
        rs[i] = scores[pick];
        rl[i] = labels[pick];
        (rl[i] != 0 ? pos : neg) = true;
      }
      ok = pos && neg;
    }
    if (!ok) {
      throw Error("bootstrap_auc: could not draw a two-class replicate in 100 attempts");
    }
    result.replicates[r] = auc(rs, rl);
  });

  double acc = 0.0;
  for (double v : result.replicates) acc += v;
  result.mean = acc / static_cast<double>(n_replicates);
  if (n_replicates > 1) {
    double sq = 0.0;
    for (double v : result.replicates) sq += (v - result.mean) * (v - result.mean);
    result.stddev = std::sqrt(sq / static_cast<double>(n_replicates - 1));
  }
  return result;
}

// ==================== Welch's t-test ====================

double incomplete_beta(double a, double b, double x) {
  if (x < 0.0 || x > 1.0) throw DomainError("incomplete_beta: x outside [0,1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  // continued fraction (modified Lentz); converges fastest for
  // x < (a+1)/(a+b+2), otherwise use the symmetry I_x(a,b) = 1 - I_{1-x}(b,a)
  if (x >= (a + 1.0) / (a + b + 2.0)) {
    return 1.0 - incomplete_beta(b, a, 1.0 - x);
  }
  const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                          a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(ln_front) / a;
  const double tiny = 1e-300;
  double c = 1.0;
  double d = 1.0 - (a + b) * x / (a + 1.0);
  if (std::abs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double f = d;
  for (int m = 1; m <= 300; ++m) {
    const double dm = static_cast<double>(m);
    // even step
    double num = dm * (b - dm) * x / ((a + 2.0 * dm - 1.0) * (a + 2.0 * dm));
    d = 1.0 + num * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + num / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    f *= d * c;
    // odd step
    num = -(a + dm) * (a + b + dm) * x / ((a + 2.0 * dm) * (a + 2.0 * dm + 1.0));
    d = 1.0 + num * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + num / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    f *= delta;
    if (std::abs(delta - 1.0) < 1e-16) break;
  }
  return front * f;
}

double student_t_two_sided_p(double t, double dof) {
  if (dof <= 0.0) throw DomainError("student_t_two_sided_p: dof must be positive");
  if (t == 0.0) return 1.0;
  if (std::isinf(t)) return std::numeric_limits<double>::min();
  const double x = dof / (dof + t * t);
  double p = incomplete_beta(dof / 2.0, 0.5, x);
  if (p <= 0.0) p = std::numeric_limits<double>::min();
  if (p > 1.0) p = 1.0;
  return p;
}

ComparisonResult t_test(const std::string& name_a, std::span<const double> a,
                        const std::string& name_b, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) {
    throw ContractError("t_test: both samples need at least 2 values");
  }
  auto mean_var = [](std::span<const double> xs) {
    double mean = 0.0;
    for (double v : xs) mean += v;
    mean /= static_cast<double>(xs.size());
    double sq = 0.0;
    for (double v : xs) sq += (v - mean) * (v - mean);
    return std::pair<double, double>(mean, sq / static_cast<double>(xs.size() - 1));
  };
  auto [ma, va] = mean_var(a);
  auto [mb, vb] = mean_var(b);
  ComparisonResult res;
  res.model_a = name_a;
  res.model_b = name_b;
  res.mean_difference = ma - mb;
  const double ra = va / static_cast<double>(a.size());
  const double rb = vb / static_cast<double>(b.size());
  if (ra + rb == 0.0) {
    // zero variance in both samples
    if (ma == mb) {
      res.t_statistic = 0.0;
      res.p_value = 1.0;
      res.winner = 0;
    } else {
      res.t_statistic = std::copysign(std::numeric_limits<double>::infinity(), ma - mb);
      res.p_value = std::numeric_limits<double>::min();
      res.winner = ma > mb ? 1 : -1;
    }
    return res;
  }
  res.t_statistic = (ma - mb) / std::sqrt(ra + rb);
  const double dof = (ra + rb) * (ra + rb) /
                     (ra * ra / static_cast<double>(a.size() - 1) +
                      rb * rb / static_cast<double>(b.size() - 1));
  res.p_value = student_t_two_sided_p(res.t_statistic, dof);
  res.winner = res.t_statistic > 0.0 ? 1 : (res.t_statistic < 0.0 ? -1 : 0);
  return res;
}

ComparisonResult t_test(std::span<const double> a, std::span<const double> b) {
  return t_test("A", a, "B", b);
}

// ==================== MCC / F1 / thresholds ====================

MccF1 mcc_f1(std::span<const int> predicted, std::span<const int> truth) {
  if (predicted.size() != truth.size()) throw ShapeError("mcc_f1: length mismatch");
  double tp = 0, fp = 0, fn = 0, tn = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const bool p = predicted[i] != 0;
    const bool t = truth[i] != 0;
    if (p && t) ++tp;
    else if (p && !t) ++fp;
    else if (!p && t) ++fn;
    else ++tn;
  }
  MccF1 out;
  const double mcc_den = std::sqrt((tp + fp) * (tp + fn) * (tn + fp) * (tn + fn));
  out.mcc = mcc_den == 0.0 ? 0.0 : (tp * tn - fp * fn) / mcc_den;
  const double f1_den = 2.0 * tp + fp + fn;
  out.f1 = f1_den == 0.0 ? 0.0 : 2.0 * tp / f1_den;
  return out;
}

double threshold_select(std::span<const double> scores, std::span<const int> labels,
                        ThresholdObjective objective) {
  if (scores.size() != labels.size()) throw ShapeError("threshold_select: length mismatch");
  bool pos = false, neg = false;
  for (int y : labels) (y != 0 ? pos : neg) = true;
  if (!pos || !neg) throw DomainError("threshold_select: single-class labels");

  std::vector<double> uniq(scores.begin(), scores.end());
  std::sort(uniq.begin(), uniq.end());
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
  std::vector<double> candidates;
  candidates.push_back(uniq.front() - 1.0);  // all-positive prediction
  for (std::size_t i = 0; i + 1 < uniq.size(); ++i) {
    candidates.push_back((uniq[i] + uniq[i + 1]) / 2.0);
  }

  double best_threshold = candidates.front();
  double best_value = -std::numeric_limits<double>::infinity();
  std::vector<int> pred(scores.size());
  for (double thr : candidates) {
    for (std::size_t i = 0; i < scores.size(); ++i) pred[i] = scores[i] >= thr ? 1 : 0;
    MccF1 m = mcc_f1(pred, labels);
    const double value = objective == ThresholdObjective::kMcc ? m.mcc : m.f1;
    if (value > best_value) {
      best_value = value;
      best_threshold = thr;
    }
  }
  return best_threshold;
}

// ==================== model-level analyses ====================

namespace {

struct PairSims {
  std::vector<double> token_rows;  // T x P similarities, row-major
  std::size_t token_count = 0;
  std::vector<double> cls_to_patches;  // P values: text_e . patch_e[p]
};

PairSims pair_similarities(const ModelParams& params, const ModelConfig& cfg,
                           const SyntheticSample& sample) {
  Tape tape;
  ModelNodes nodes = register_params(tape, params, /*requires_grad=*/false);
  EncodedPair pair = encode_pair(tape, nodes, cfg, sample.pixels, sample.tokens);
  const Tensor& token_e = tape.value(pair.text.token_e);
  const Tensor& patch_e = tape.value(pair.image.patch_e);
  const std::size_t t = token_e.shape()[0];
  const std::size_t p = patch_e.shape()[0];
  const std::size_t d = cfg.embed;
  PairSims sims;
  sims.token_count = t;
  sims.token_rows.resize(t * p);
  kernels::matmul(token_e.data(), patch_e.data(), sims.token_rows.data(), t, d, p,
                  /*ta=*/false, /*tb=*/true, /*accumulate=*/false);
  sims.cls_to_patches.assign(sims.token_rows.begin(), sims.token_rows.begin() + p);
  return sims;
}

SimilarityCurve aggregate_curve(const std::vector<std::vector<double>>& per_image) {
  const std::size_t ranks = per_image.front().size();
  SimilarityCurve curve;
  curve.mean.assign(ranks, 0.0);
  curve.stddev.assign(ranks, 0.0);
  const double n = static_cast<double>(per_image.size());
  for (const auto& values : per_image) {
    for (std::size_t r = 0; r < ranks; ++r) curve.mean[r] += values[r];
  }
  for (std::size_t r = 0; r < ranks; ++r) curve.mean[r] /= n;
  for (const auto& values : per_image) {
    for (std::size_t r = 0; r < ranks; ++r) {
      const double d = values[r] - curve.mean[r];
      curve.stddev[r] += d * d;
    }
  }
  for (std::size_t r = 0; r < ranks; ++r) curve.stddev[r] = std::sqrt(curve.stddev[r] / n);
  return curve;
}

}  // namespace

SimilarityCurves similarity_curves(const ModelParams& params, const ModelConfig& cfg,
                                   std::span<const SyntheticSample> samples) {
  if (samples.empty()) throw ContractError("similarity_curves: empty sample set");
  const std::size_t p = cfg.patches();
  std::vector<std::vector<double>> raw(samples.size()), normalized(samples.size());
  parallel_for(samples.size(), [&](std::size_t i) {
    PairSims sims = pair_similarities(params, cfg, samples[i]);
    std::vector<double> values = sims.cls_to_patches;
    std::sort(values.begin(), values.end(), std::greater<>());
    raw[i] = values;
    double sum = 0.0;
    for (double v : sims.cls_to_patches) sum += v;
    if (std::abs(sum) < 1e-12) {
      throw DegenerateVectorError("similarity_curves: per-image similarity sum is ~0 (sample " +
                                  std::to_string(samples[i].id) + ")");
    }
    std::vector<double> norm(p);
    for (std::size_t j = 0; j < p; ++j) norm[j] = sims.cls_to_patches[j] / sum;
    std::sort(norm.begin(), norm.end(), std::greater<>());
    normalized[i] = norm;
  });
  SimilarityCurves out;
  out.raw = aggregate_curve(raw);
  out.normalized = aggregate_curve(normalized);
  return out;
}

double mean_row_entropy(const ModelParams& params, const ModelConfig& cfg,
                        std::span<const SyntheticSample> samples, bool cls_in_penalty) {
  if (samples.empty()) throw ContractError("mean_row_entropy: empty sample set");
  const std::size_t p = cfg.patches();
  std::vector<double> per_sample(samples.size());
  parallel_for(samples.size(), [&](std::size_t i) {
    PairSims sims = pair_similarities(params, cfg, samples[i]);
    const std::size_t first_row = cls_in_penalty ? 0 : 1;
    if (sims.token_count <= first_row) {
      throw ContractError("mean_row_entropy: sample with no penalty rows");
    }
    const std::size_t rows = sims.token_count - first_row;
    std::vector<double> probs(rows * p), h(rows);
    kernels::softmax_rows(sims.token_rows.data() + first_row * p, probs.data(), rows, p);
    kernels::row_entropy(probs.data(), h.data(), rows, p);
    double acc = 0.0;
    for (double v : h) acc += v;
    per_sample[i] = acc / static_cast<double>(rows);
  });
  double acc = 0.0;
  for (double v : per_sample) acc += v;
  return acc / static_cast<double>(samples.size());
}

double localization_hit_rate(const ModelParams& params, const ModelConfig& cfg,
                             std::span<const SyntheticSample> samples, std::size_t k) {
  if (samples.empty()) throw ContractError("localization_hit_rate: empty sample set");
  if (k == 0) throw ContractError("localization_hit_rate: k must be positive");
  const std::size_t p = cfg.patches();
  std::vector<std::size_t> hits(samples.size(), 0), totals(samples.size(), 0);
  parallel_for(samples.size(), [&](std::size_t i) {
    const SyntheticSample& sample = samples[i];
    PairSims sims = pair_similarities(params, cfg, sample);
    for (std::size_t row = 0; row < sample.token_count; ++row) {
      std::size_t gt = SIZE_MAX;
      for (std::size_t col = 0; col < p; ++col) {
        if (sample.mask_at(row, col, p)) {
          gt = col;
          break;
        }
      }
      if (gt == SIZE_MAX) continue;  // [CLS] or filler token
      const double* srow = sims.token_rows.data() + row * p;
      // rank of the ground-truth patch; ties break toward lower index
      std::size_t better = 0;
      for (std::size_t col = 0; col < p; ++col) {
        if (srow[col] > srow[gt] || (srow[col] == srow[gt] && col < gt)) ++better;
      }
      ++totals[i];
      if (better < k) ++hits[i];
    }
  });
  std::size_t hit_sum = 0, total_sum = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    hit_sum += hits[i];
    total_sum += totals[i];
  }
  if (total_sum == 0) throw ContractError("localization_hit_rate: no object tokens in set");
  return static_cast<double>(hit_sum) / static_cast<double>(total_sum);
}

// ==================== report emission ====================

std::string eval_report_json(const EvalReport& report) {
  nlohmann::ordered_json j;
  j["model"] = report.model_name;
  j["mean_auc"] = report.mean_auc;
  nlohmann::ordered_json labels = nlohmann::ordered_json::array();
  for (const EvalLabelReport& l : report.labels) {
    labels.push_back({{"label", l.label},
                      {"auc_mean", l.auc_mean},
                      {"auc_std", l.auc_std},
                      {"mcc", l.mcc},
                      {"f1", l.f1},
                      {"threshold", l.threshold}});
  }
  j["labels"] = labels;
  return j.dump(2);
}

void write_eval_report_json(const EvalReport& report, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write eval report: " + path);
  out << eval_report_json(report) << "\n";
}

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void write_eval_report_csv(const EvalReport& report, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write eval report: " + path);
  out << "label,auc_mean,auc_std,mcc,f1,threshold\n";
  out << "Average," << fmt(report.mean_auc) << ",,,,\n";
  for (const EvalLabelReport& l : report.labels) {
    out << l.label << "," << fmt(l.auc_mean) << "," << fmt(l.auc_std) << "," << fmt(l.mcc) << ","
        << fmt(l.f1) << "," << fmt(l.threshold) << "\n";
  }
}

void write_comparison_csv(const std::vector<ComparisonResult>& rows,
                          const std::vector<std::string>& labels, const std::string& path) {
  if (rows.size() != labels.size()) throw ShapeError("write_comparison_csv: length mismatch");
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write comparison table: " + path);
  out << "label,mean_difference,t_statistic,p_value,winner\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const ComparisonResult& r = rows[i];
    const char* winner = r.winner > 0 ? r.model_a.c_str() : (r.winner < 0 ? r.model_b.c_str() : "tie");
    out << labels[i] << "," << fmt(r.mean_difference) << "," << fmt(r.t_statistic) << ","
        << fmt(r.p_value) << "," << winner << "\n";
  }
}

void write_similarity_curves_csv(const SimilarityCurve& curve, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write curve: " + path);
  out << "rank,mean,std\n";
  for (std::size_t r = 0; r < curve.mean.size(); ++r) {
    out << (r + 1) << "," << fmt(curve.mean[r]) << "," << fmt(curve.stddev[r]) << "\n";
  }
}

}  // namespace tier::metrics
