#include "tier/encoders.hpp"

#include <string>

namespace tier {

ModelNodes register_params(Tape& tape, const ModelParams& params, bool requires_grad) {
  ModelNodes n;
  n.patch_w = tape.leaf(params.image.patch_w, requires_grad, "image.patch_w");
  n.patch_b = tape.leaf(params.image.patch_b, requires_grad, "image.patch_b");
  n.image_head_w1 = tape.leaf(params.image.head_w1, requires_grad, "image.head_w1");
  n.image_head_b1 = tape.leaf(params.image.head_b1, requires_grad, "image.head_b1");
  n.image_head_w2 = tape.leaf(params.image.head_w2, requires_grad, "image.head_w2");
  n.image_head_b2 = tape.leaf(params.image.head_b2, requires_grad, "image.head_b2");
  n.token_table = tape.leaf(params.text.token_table, requires_grad, "text.token_table");
  n.pos_table = tape.leaf(params.text.pos_table, requires_grad, "text.pos_table");
  n.mix_w = tape.leaf(params.text.mix_w, requires_grad, "text.mix_w");
  n.mix_b = tape.leaf(params.text.mix_b, requires_grad, "text.mix_b");
  n.text_head_w1 = tape.leaf(params.text.head_w1, requires_grad, "text.head_w1");
  n.text_head_b1 = tape.leaf(params.text.head_b1, requires_grad, "text.head_b1");
  n.text_head_w2 = tape.leaf(params.text.head_w2, requires_grad, "text.head_w2");
  n.text_head_b2 = tape.leaf(params.text.head_b2, requires_grad, "text.head_b2");
  n.log_temperature = tape.leaf(params.log_temperature, requires_grad, "log_temperature");
  return n;
}

ModelParams read_gradients(const Tape& tape, const ModelNodes& nodes, const ModelConfig& cfg) {
  (void)cfg;
  ModelParams g;
  g.image.patch_w = tape.grad(nodes.patch_w);
  g.image.patch_b = tape.grad(nodes.patch_b);
  g.image.head_w1 = tape.grad(nodes.image_head_w1);
  g.image.head_b1 = tape.grad(nodes.image_head_b1);
  g.image.head_w2 = tape.grad(nodes.image_head_w2);
  g.image.head_b2 = tape.grad(nodes.image_head_b2);
  g.text.token_table = tape.grad(nodes.token_table);
  g.text.pos_table = tape.grad(nodes.pos_table);
  g.text.mix_w = tape.grad(nodes.mix_w);
  g.text.mix_b = tape.grad(nodes.mix_b);
  g.text.head_w1 = tape.grad(nodes.text_head_w1);
  g.text.head_b1 = tape.grad(nodes.text_head_b1);
  g.text.head_w2 = tape.grad(nodes.text_head_w2);
  g.text.head_b2 = tape.grad(nodes.text_head_b2);
  g.log_temperature = tape.grad(nodes.log_temperature);
  return g;
}

Tensor extract_patches(const Tensor& pixels, const ModelConfig& cfg) {
  const std::size_t side = cfg.image_side();
  const std::size_t c = cfg.channels;
  bool ok = (c == 1 && pixels.ndim() == 2 && pixels.shape()[0] == side &&
             pixels.shape()[1] == side) ||
            (pixels.ndim() == 3 && pixels.shape()[0] == side && pixels.shape()[1] == side &&
             pixels.shape()[2] == c);
  if (!ok) {
    throw ShapeError("extract_patches: image must be " + std::to_string(side) + "x" +
                     std::to_string(side) + "x" + std::to_string(c));
  }
  const std::size_t s = cfg.patch_size;
  const std::size_t k = cfg.grid;
  Tensor out({cfg.patches(), cfg.patch_dim()});
  for (std::size_t pr = 0; pr < k; ++pr) {
    for (std::size_t pc = 0; pc < k; ++pc) {
      const std::size_t p = pr * k + pc;
      std::size_t w = 0;
      for (std::size_t y = 0; y < s; ++y) {
        for (std::size_t x = 0; x < s; ++x) {
          for (std::size_t ch = 0; ch < c; ++ch) {
            const std::size_t py = pr * s + y;
            const std::size_t px = pc * s + x;
            out[p * cfg.patch_dim() + w] = pixels[(py * side + px) * c + ch];
            ++w;
          }
        }
      }
    }
  }
  return out;
}

EncodedImage encode_image(Tape& tape, const ModelNodes& nodes, const ModelConfig& cfg,
                          const Tensor& pixels) {
  Tensor patches = extract_patches(pixels, cfg);
  Tape::NodeId x = tape.leaf(std::move(patches), /*requires_grad=*/false, "pixels");
  Tape::NodeId feat = tape.add_rowvec(tape.matmul(x, nodes.patch_w), nodes.patch_b);
  Tape::NodeId h =
      tape.tanh_op(tape.add_rowvec(tape.matmul(feat, nodes.image_head_w1), nodes.image_head_b1));
  Tape::NodeId proj = tape.add_rowvec(tape.matmul(h, nodes.image_head_w2), nodes.image_head_b2);
  EncodedImage out;
  out.patch_e = tape.l2_normalize(proj, /*axis=*/1);
  out.image_e = tape.l2_normalize(tape.mean_rows(out.patch_e), /*axis=*/1);
  return out;
}

EncodedText encode_text(Tape& tape, const ModelNodes& nodes, const ModelConfig& cfg,
                        const std::vector<std::uint16_t>& tokens) {
  if (tokens.empty() || tokens[0] != kClsToken) {
    throw ContractError("encode_text: caption must start with [CLS]");
  }
  if (tokens.size() > cfg.max_len) {
    throw ShapeError("encode_text: caption longer than max_len");
  }
  EncodedText out;
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i] >= cfg.vocab) {
      throw DomainError("encode_text: token id " + std::to_string(tokens[i]) +
                        " outside vocabulary");
    }
    if (tokens[i] == kPadToken) continue;
    kept.push_back(tokens[i]);
    out.positions.push_back(i);
  }
  out.token_count = kept.size();
  Tape::NodeId tok = tape.gather_rows(nodes.token_table, kept);
  Tape::NodeId pos = tape.gather_rows(nodes.pos_table, out.positions);
  Tape::NodeId emb = tape.add(tok, pos);
  Tape::NodeId mixed = tape.tanh_op(tape.add_rowvec(tape.matmul(emb, nodes.mix_w), nodes.mix_b));
  Tape::NodeId h =
      tape.tanh_op(tape.add_rowvec(tape.matmul(mixed, nodes.text_head_w1), nodes.text_head_b1));
  Tape::NodeId proj = tape.add_rowvec(tape.matmul(h, nodes.text_head_w2), nodes.text_head_b2);
  out.token_e = tape.l2_normalize(proj, /*axis=*/1);
  out.text_e = tape.gather_rows(out.token_e, {0});
  return out;
}

EncodedPair encode_pair(Tape& tape, const ModelNodes& nodes, const ModelConfig& cfg,
                        const Tensor& pixels, const std::vector<std::uint16_t>& tokens) {
  EncodedPair pair;
  pair.image = encode_image(tape, nodes, cfg, pixels);
  pair.text = encode_text(tape, nodes, cfg, tokens);
  return pair;
}

}  // namespace tier
