#pragma once

#include <cstdint>
#include <string>

#include "tier/tensor.hpp"

namespace tier {

// Reserved token ids.
inline constexpr std::uint16_t kClsToken = 0;
inline constexpr std::uint16_t kPadToken = 1;

enum class PenaltyAveraging {
  kPerSample,  // mean within each sample's rows/columns, then across the batch
  kFlat,       // pool all rows/columns across the batch before averaging
};

// Dimensions of the dual encoder. Defaults are small enough that the whole
// model can be finite-difference checked.
struct ModelConfig {
  std::size_t grid = 7;         // patches per image side (K)
  std::size_t patch_size = 8;   // pixels per patch side (s)
  std::size_t channels = 1;     // image channels (c)
  std::size_t image_feat = 32;  // patch feature width (d_i)
  std::size_t text_feat = 32;   // token feature width (d_t)
  std::size_t hidden = 64;      // projection-head hidden width (h)
  std::size_t embed = 16;       // joint embedding width (d_e)
  std::size_t vocab = 64;       // token vocabulary (V)
  std::size_t max_len = 16;     // caption length incl. [CLS] and padding (L)

  std::size_t patches() const { return grid * grid; }
  std::size_t image_side() const { return grid * patch_size; }
  std::size_t patch_dim() const { return patch_size * patch_size * channels; }

  void validate() const;
};

// Linear patch projection + one-hidden-layer head into the joint space.
struct ImageEncoderParams {
  Tensor patch_w;  // patch_dim x d_i
  Tensor patch_b;  // {d_i}
  Tensor head_w1;  // d_i x h
  Tensor head_b1;  // {h}
  Tensor head_w2;  // h x d_e
  Tensor head_b2;  // {d_e}
};

// Token + position embeddings, one mixing layer, one-hidden-layer head.
struct TextEncoderParams {
  Tensor token_table;  // V x d_t
  Tensor pos_table;    // L x d_t
  Tensor mix_w;        // d_t x d_t
  Tensor mix_b;        // {d_t}
  Tensor head_w1;      // d_t x h
  Tensor head_b1;      // {h}
  Tensor head_w2;      // h x d_e
  Tensor head_b2;      // {d_e}
};

struct ModelParams {
  ImageEncoderParams image;
  TextEncoderParams text;
  Tensor log_temperature;  // {1}; logits are scaled by exp(log_temperature)

  // Visits every parameter in a fixed order; `fn(name, tensor)`.
  template <typename F>
  void for_each(F&& fn) {
    fn("image.patch_w", image.patch_w);
    fn("image.patch_b", image.patch_b);
    fn("image.head_w1", image.head_w1);
    fn("image.head_b1", image.head_b1);
    fn("image.head_w2", image.head_w2);
    fn("image.head_b2", image.head_b2);
    fn("text.token_table", text.token_table);
    fn("text.pos_table", text.pos_table);
    fn("text.mix_w", text.mix_w);
    fn("text.mix_b", text.mix_b);
    fn("text.head_w1", text.head_w1);
    fn("text.head_b1", text.head_b1);
    fn("text.head_w2", text.head_w2);
    fn("text.head_b2", text.head_b2);
    fn("log_temperature", log_temperature);
  }
  template <typename F>
  void for_each(F&& fn) const {
    const_cast<ModelParams*>(this)->for_each(
        [&](const char* name, Tensor& t) { fn(name, static_cast<const Tensor&>(t)); });
  }
};

// Seed-deterministic init: weights uniform on [-1/sqrt(fan_in), +1/sqrt(fan_in)],
// biases zero, temperature such that exp(t) = 1/0.07.
ModelParams init_params(std::uint64_t seed, const ModelConfig& cfg);

// Shape consistency between a parameter set and a config.
void validate_params(const ModelParams& params, const ModelConfig& cfg);

}  // namespace tier
