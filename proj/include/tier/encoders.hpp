#pragma once

#include <cstdint>
#include <vector>

#include "tier/model.hpp"
#include "tier/tape.hpp"

namespace tier {

// Tape handles for one parameter set, registered once per forward pass.
struct ModelNodes {
  Tape::NodeId patch_w, patch_b, image_head_w1, image_head_b1, image_head_w2, image_head_b2;
  Tape::NodeId token_table, pos_table, mix_w, mix_b, text_head_w1, text_head_b1, text_head_w2,
      text_head_b2;
  Tape::NodeId log_temperature;
};

ModelNodes register_params(Tape& tape, const ModelParams& params, bool requires_grad = true);

// Reads param gradients back out of the tape in the same fixed order as
// ModelParams::for_each. Valid after tape.backward().
ModelParams read_gradients(const Tape& tape, const ModelNodes& nodes, const ModelConfig& cfg);

struct EncodedImage {
  Tape::NodeId patch_e;  // P x d_e, rows unit-norm
  Tape::NodeId image_e;  // 1 x d_e, unit-norm
};

struct EncodedText {
  Tape::NodeId token_e;  // T x d_e, rows unit-norm, [CLS] at row 0
  Tape::NodeId text_e;   // 1 x d_e ([CLS] row)
  std::size_t token_count = 0;             // T = non-pad tokens
  std::vector<std::size_t> positions;      // original caption positions of the kept tokens
};

struct EncodedPair {
  EncodedImage image;
  EncodedText text;
};

// Rearranges pixels {side, side} (or {side, side, c}) into the patch matrix
// P x (s*s*c). Pure data movement: patch j sees only its own pixels.
Tensor extract_patches(const Tensor& pixels, const ModelConfig& cfg);

EncodedImage encode_image(Tape& tape, const ModelNodes& nodes, const ModelConfig& cfg,
                          const Tensor& pixels);

// Tokens must start with [CLS]; [PAD] positions are dropped before encoding.
EncodedText encode_text(Tape& tape, const ModelNodes& nodes, const ModelConfig& cfg,
                        const std::vector<std::uint16_t>& tokens);

EncodedPair encode_pair(Tape& tape, const ModelNodes& nodes, const ModelConfig& cfg,
                        const Tensor& pixels, const std::vector<std::uint16_t>& tokens);

}  // namespace tier
