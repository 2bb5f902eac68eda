#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tier/model.hpp"
#include "tier/synth_data.hpp"
#include "tier/tensor.hpp"

namespace tier {

// Forward-only encodings of a frozen model (plain tensors, no tape handles).
struct FrozenImage {
  Tensor patch_e;  // P x d_e
  Tensor image_e;  // {d_e}
};
struct FrozenText {
  Tensor token_e;  // T x d_e
  Tensor text_e;   // {d_e}
  std::size_t token_count = 0;
};
FrozenImage encode_frozen_image(const ModelParams& params, const ModelConfig& cfg,
                                const Tensor& pixels);
FrozenText encode_frozen_text(const ModelParams& params, const ModelConfig& cfg,
                              const std::vector<std::uint16_t>& tokens);

// Per-label positive/negative query token sequences.
struct QueryRegistry {
  struct Entry {
    std::string label;
    std::vector<std::vector<std::uint16_t>> positive, negative;
  };
  std::vector<Entry> entries;

  std::string to_json() const;
  static QueryRegistry from_json(const std::string& text);
  static QueryRegistry load(const std::string& path);
  void save(const std::string& path) const;
  // One positive query [CLS, class-token] and one empty-caption negative per class.
  static QueryRegistry defaults_for(const DatasetManifest& manifest);
};

// Averaged, renormalized query embeddings for one label.
struct QuerySet {
  std::string label;
  Tensor positive_mean;  // {d_e}, unit-norm
  Tensor negative_mean;  // {d_e}, unit-norm
};

// Mean of the given vectors followed by renormalization to unit length.
// Raises DegenerateVectorError when the mean's norm falls below 1e-12
// (antipodal queries).
Tensor renormalized_mean(const std::vector<Tensor>& vectors);

QuerySet build_query_set(const std::string& label,
                         const std::vector<std::vector<std::uint16_t>>& positive,
                         const std::vector<std::vector<std::uint16_t>>& negative,
                         const ModelParams& params, const ModelConfig& cfg);

// Z = img . positive_mean - img . negative_mean, in [-2, 2].
double zero_shot_score(const Tensor& image_embedding, const QuerySet& qs);

// Softmax over the two similarities; strictly increasing in the score.
double zero_shot_probability(const Tensor& image_embedding, const QuerySet& qs);

struct Heatmap {
  std::size_t grid = 0;
  std::vector<double> scores;  // K*K patch scores, row-major
  std::string label;
  std::uint32_t sample_id = 0;
};

Heatmap make_heatmap(const ModelParams& params, const ModelConfig& cfg, const Tensor& pixels,
                     const QuerySet& qs, std::uint32_t sample_id);

// Binary PPM (P6) with a diverging map: mid-gray at 0, red positive, blue
// negative; nearest-neighbor patch-to-pixel expansion.
void write_heatmap_ppm(const Heatmap& heatmap, std::size_t patch_size, const std::string& path);
// CSV "row,col,score" with full-precision scores.
void write_heatmap_csv(const Heatmap& heatmap, const std::string& path);

// Batch scoring of a dataset split for every label in a registry.
struct ScoredLabel {
  std::string label;
  std::vector<std::uint32_t> sample_ids;
  std::vector<double> scores;
  std::vector<int> truth;
};
std::vector<ScoredLabel> score_split(const ModelParams& params, const ModelConfig& cfg,
                                     std::span<const SyntheticSample> samples,
                                     const QueryRegistry& registry,
                                     const DatasetManifest& manifest);
double mean_zero_shot_auc(const std::vector<ScoredLabel>& scored);

}  // namespace tier
