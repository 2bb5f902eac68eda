#include "tier/zeroshot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "tier/encoders.hpp"
#include "tier/metrics.hpp"
#include "tier/parallel.hpp"
#include "tier/tape.hpp"

namespace tier {

namespace {

Tensor flatten_row(const Tensor& row_matrix) {
  // {1, d} -> {d}
  return Tensor({row_matrix.numel()}, row_matrix.values());
}

double dot(const Tensor& a, const Tensor& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) acc += a[i] * b[i];
  return acc;
}

void require_unit(const Tensor& v, const char* what) {
  if (std::abs(std::sqrt(dot(v, v)) - 1.0) > 1e-9) {
    throw ContractError(std::string(what) + ": embedding is not unit-norm");
  }
}

}  // namespace

FrozenImage encode_frozen_image(const ModelParams& params, const ModelConfig& cfg,
                                const Tensor& pixels) {
  Tape tape;
  ModelNodes nodes = register_params(tape, params, /*requires_grad=*/false);
  EncodedImage enc = encode_image(tape, nodes, cfg, pixels);
  FrozenImage out;
  out.patch_e = tape.value(enc.patch_e);
  out.image_e = flatten_row(tape.value(enc.image_e));
  return out;
}

FrozenText encode_frozen_text(const ModelParams& params, const ModelConfig& cfg,
                              const std::vector<std::uint16_t>& tokens) {
  Tape tape;
  ModelNodes nodes = register_params(tape, params, /*requires_grad=*/false);
  EncodedText enc = encode_text(tape, nodes, cfg, tokens);
  FrozenText out;
  out.token_e = tape.value(enc.token_e);
  out.text_e = flatten_row(tape.value(enc.text_e));
  out.token_count = enc.token_count;
  return out;
}

// ==================== query registry ====================

std::string QueryRegistry::to_json() const {
  nlohmann::ordered_json j;
  for (const Entry& entry : entries) {
    nlohmann::ordered_json e;
    e["positive"] = entry.positive;
    e["negative"] = entry.negative;
    j[entry.label] = e;
  }
  return j.dump(2);
}

QueryRegistry QueryRegistry::from_json(const std::string& text) {
  nlohmann::ordered_json j = nlohmann::ordered_json::parse(text, nullptr,
                                                           /*allow_exceptions=*/false);
  if (j.is_discarded()) throw ConfigError("query registry: invalid JSON");
  QueryRegistry reg;
  try {
    for (const auto& [label, value] : j.items()) {
      Entry entry;
      entry.label = label;
      entry.positive = value.at("positive").get<std::vector<std::vector<std::uint16_t>>>();
      entry.negative = value.at("negative").get<std::vector<std::vector<std::uint16_t>>>();
      reg.entries.push_back(std::move(entry));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("query registry: ") + e.what());
  }
  return reg;
}

QueryRegistry QueryRegistry::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open query registry: " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return from_json(text);
}

void QueryRegistry::save(const std::string& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write query registry: " + path);
  out << to_json() << "\n";
}

QueryRegistry QueryRegistry::defaults_for(const DatasetManifest& manifest) {
  QueryRegistry reg;
  for (const ClassSpec& spec : manifest.catalog) {
    Entry entry;
    entry.label = spec.name;
    entry.positive = {{kClsToken, spec.token}};
    entry.negative = {{kClsToken}};
    reg.entries.push_back(std::move(entry));
  }
  return reg;
}

// ==================== query embeddings and scores ====================

Tensor renormalized_mean(const std::vector<Tensor>& vectors) {
  if (vectors.empty()) throw ContractError("renormalized_mean: no vectors");
  Tensor acc(vectors.front().shape());
  for (const Tensor& v : vectors) {
    if (!v.same_shape(acc)) throw ShapeError("renormalized_mean: shape mismatch");
    for (std::size_t i = 0; i < acc.numel(); ++i) acc[i] += v[i];
  }
  for (std::size_t i = 0; i < acc.numel(); ++i) acc[i] /= static_cast<double>(vectors.size());
  double norm = std::sqrt(dot(acc, acc));
  if (norm < 1e-12) {
    throw DegenerateVectorError("renormalized_mean: mean vector is degenerate");
  }
  for (std::size_t i = 0; i < acc.numel(); ++i) acc[i] /= norm;
  return acc;
}

namespace {

Tensor mean_query_embedding(const std::vector<std::vector<std::uint16_t>>& queries,
                            const ModelParams& params, const ModelConfig& cfg,
                            const std::string& label, const char* polarity) {
  std::vector<Tensor> embeddings;
  embeddings.reserve(queries.size());
  for (const auto& query : queries) {
    embeddings.push_back(encode_frozen_text(params, cfg, query).text_e);
  }
  try {
    return renormalized_mean(embeddings);
  } catch (const DegenerateVectorError&) {
    throw DegenerateVectorError("build_query_set: " + label + " " + polarity +
                                " queries average to a degenerate embedding");
  }
}

}  // namespace

QuerySet build_query_set(const std::string& label,
                         const std::vector<std::vector<std::uint16_t>>& positive,
                         const std::vector<std::vector<std::uint16_t>>& negative,
                         const ModelParams& params, const ModelConfig& cfg) {
  if (positive.empty() || negative.empty()) {
    throw ContractError("build_query_set: need at least one query per polarity");
  }
  QuerySet qs;
  qs.label = label;
  qs.positive_mean = mean_query_embedding(positive, params, cfg, label, "positive");
  qs.negative_mean = mean_query_embedding(negative, params, cfg, label, "negative");
  return qs;
}

double zero_shot_score(const Tensor& image_embedding, const QuerySet& qs) {
  require_unit(image_embedding, "zero_shot_score");
  return dot(image_embedding, qs.positive_mean) - dot(image_embedding, qs.negative_mean);
}

double zero_shot_probability(const Tensor& image_embedding, const QuerySet& qs) {
  require_unit(image_embedding, "zero_shot_probability");
  const double sp = dot(image_embedding, qs.positive_mean);
  const double sn = dot(image_embedding, qs.negative_mean);
  const double mx = std::max(sp, sn);
  const double ep = std::exp(sp - mx);
  const double en = std::exp(sn - mx);
  return ep / (ep + en);
}

// ==================== heatmaps ====================

Heatmap make_heatmap(const ModelParams& params, const ModelConfig& cfg, const Tensor& pixels,
                     const QuerySet& qs, std::uint32_t sample_id) {
  FrozenImage enc = encode_frozen_image(params, cfg, pixels);
  Heatmap hm;
  hm.grid = cfg.grid;
  hm.label = qs.label;
  hm.sample_id = sample_id;
  hm.scores.resize(cfg.patches());
  for (std::size_t p = 0; p < cfg.patches(); ++p) {
    double sp = 0.0, sn = 0.0;
    for (std::size_t j = 0; j < cfg.embed; ++j) {
      sp += enc.patch_e[p * cfg.embed + j] * qs.positive_mean[j];
      sn += enc.patch_e[p * cfg.embed + j] * qs.negative_mean[j];
    }
    hm.scores[p] = sp - sn;
  }
  return hm;
}

void write_heatmap_ppm(const Heatmap& heatmap, std::size_t patch_size, const std::string& path) {
  const std::size_t side = heatmap.grid * patch_size;
  std::vector<std::uint8_t> rgb(side * side * 3);
  for (std::size_t y = 0; y < side; ++y) {
    for (std::size_t x = 0; x < side; ++x) {
      const std::size_t p = (y / patch_size) * heatmap.grid + (x / patch_size);
      double t = std::clamp(heatmap.scores[p] / 2.0, -1.0, 1.0);
      std::uint8_t r, g, b;
      if (t >= 0.0) {
        r = static_cast<std::uint8_t>(128 + std::lround(127.0 * t));
        g = static_cast<std::uint8_t>(128 - std::lround(128.0 * t));
        b = g;
      } else {
        r = static_cast<std::uint8_t>(128 - std::lround(128.0 * -t));
        g = r;
        b = static_cast<std::uint8_t>(128 + std::lround(127.0 * -t));
      }
      std::uint8_t* px = &rgb[(y * side + x) * 3];
      px[0] = r;
      px[1] = g;
      px[2] = b;
    }
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write heatmap: " + path);
  out << "P6\n" << side << " " << side << "\n255\n";
  out.write(reinterpret_cast<const char*>(rgb.data()), static_cast<std::streamsize>(rgb.size()));
  if (!out) throw Error("heatmap write failed: " + path);
}

void write_heatmap_csv(const Heatmap& heatmap, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write heatmap csv: " + path);
  out << "row,col,score\n";
  char buf[64];
  for (std::size_t r = 0; r < heatmap.grid; ++r) {
    for (std::size_t c = 0; c < heatmap.grid; ++c) {
      std::snprintf(buf, sizeof(buf), "%.17g", heatmap.scores[r * heatmap.grid + c]);
      out << r << "," << c << "," << buf << "\n";
    }
  }
  if (!out) throw Error("heatmap csv write failed: " + path);
}

// ==================== batch scoring ====================

std::vector<ScoredLabel> score_split(const ModelParams& params, const ModelConfig& cfg,
                                     std::span<const SyntheticSample> samples,
                                     const QueryRegistry& registry,
                                     const DatasetManifest& manifest) {
  if (samples.empty()) throw ContractError("score_split: empty sample set");
  std::vector<QuerySet> query_sets;
  std::vector<std::size_t> class_index;
  for (const QueryRegistry::Entry& entry : registry.entries) {
    std::size_t idx = SIZE_MAX;
    for (std::size_t c = 0; c < manifest.catalog.size(); ++c) {
      if (manifest.catalog[c].name == entry.label) {
        idx = c;
        break;
      }
    }
    if (idx == SIZE_MAX) {
      throw ConfigError("score_split: label '" + entry.label + "' not in dataset catalog");
    }
    query_sets.push_back(build_query_set(entry.label, entry.positive, entry.negative, params, cfg));
    class_index.push_back(idx);
  }

  // image embeddings once per sample; scoring is pure given a frozen model
  std::vector<Tensor> image_embeddings(samples.size());
  parallel_for(samples.size(), [&](std::size_t i) {
    image_embeddings[i] = encode_frozen_image(params, cfg, samples[i].pixels).image_e;
  });

  std::vector<ScoredLabel> out(query_sets.size());
  for (std::size_t q = 0; q < query_sets.size(); ++q) {
    ScoredLabel& sl = out[q];
    sl.label = query_sets[q].label;
    sl.sample_ids.reserve(samples.size());
    sl.scores.reserve(samples.size());
    sl.truth.reserve(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
      sl.sample_ids.push_back(samples[i].id);
      sl.scores.push_back(zero_shot_score(image_embeddings[i], query_sets[q]));
      sl.truth.push_back((samples[i].labels >> class_index[q]) & 1ULL ? 1 : 0);
    }
  }
  return out;
}

double mean_zero_shot_auc(const std::vector<ScoredLabel>& scored) {
  if (scored.empty()) throw ContractError("mean_zero_shot_auc: no labels");
  double acc = 0.0;
  for (const ScoredLabel& sl : scored) {
    acc += metrics::auc(sl.scores, sl.truth);
  }
  return acc / static_cast<double>(scored.size());
}

}  // namespace tier
