#include "tier/model.hpp"

#include <cmath>

#include "tier/errors.hpp"
#include "tier/rng.hpp"

namespace tier {

void ModelConfig::validate() const {
  if (grid == 0 || patch_size == 0 || channels == 0 || image_feat == 0 || text_feat == 0 ||
      hidden == 0 || embed == 0) {
    throw ConfigError("model config: all dimensions must be positive");
  }
  if (vocab < 2) throw ConfigError("model config: vocab must hold [CLS] and [PAD]");
  if (max_len < 1) throw ConfigError("model config: max_len must be at least 1");
}

namespace {

Tensor uniform_init(rng::Stream& stream, std::size_t rows, std::size_t cols, std::size_t fan_in) {
  Tensor t({rows, cols});
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = stream.uniform(-bound, bound);
  return t;
}

}  // namespace

ModelParams init_params(std::uint64_t seed, const ModelConfig& cfg) {
  cfg.validate();
  rng::Stream stream(rng::mix(seed, /*tag=*/0x70617261ULL));  // parameter stream
  ModelParams p;
  p.image.patch_w = uniform_init(stream, cfg.patch_dim(), cfg.image_feat, cfg.patch_dim());
  p.image.patch_b = Tensor({cfg.image_feat});
  p.image.head_w1 = uniform_init(stream, cfg.image_feat, cfg.hidden, cfg.image_feat);
  p.image.head_b1 = Tensor({cfg.hidden});
  p.image.head_w2 = uniform_init(stream, cfg.hidden, cfg.embed, cfg.hidden);
  p.image.head_b2 = Tensor({cfg.embed});
  p.text.token_table = uniform_init(stream, cfg.vocab, cfg.text_feat, cfg.text_feat);
  p.text.pos_table = uniform_init(stream, cfg.max_len, cfg.text_feat, cfg.text_feat);
  p.text.mix_w = uniform_init(stream, cfg.text_feat, cfg.text_feat, cfg.text_feat);
  p.text.mix_b = Tensor({cfg.text_feat});
  p.text.head_w1 = uniform_init(stream, cfg.text_feat, cfg.hidden, cfg.text_feat);
  p.text.head_b1 = Tensor({cfg.hidden});
  p.text.head_w2 = uniform_init(stream, cfg.hidden, cfg.embed, cfg.hidden);
  p.text.head_b2 = Tensor({cfg.embed});
  p.log_temperature = Tensor::scalar(std::log(1.0 / 0.07));
  return p;
}

void validate_params(const ModelParams& params, const ModelConfig& cfg) {
  auto expect = [](const Tensor& t, std::vector<std::size_t> shape, const char* name) {
    if (t.shape() != shape) {
      throw Error(std::string("params: unexpected shape for ") + name);
    }
  };
  expect(params.image.patch_w, {cfg.patch_dim(), cfg.image_feat}, "image.patch_w");
  expect(params.image.patch_b, {cfg.image_feat}, "image.patch_b");
  expect(params.image.head_w1, {cfg.image_feat, cfg.hidden}, "image.head_w1");
  expect(params.image.head_b1, {cfg.hidden}, "image.head_b1");
  expect(params.image.head_w2, {cfg.hidden, cfg.embed}, "image.head_w2");
  expect(params.image.head_b2, {cfg.embed}, "image.head_b2");
  expect(params.text.token_table, {cfg.vocab, cfg.text_feat}, "text.token_table");
  expect(params.text.pos_table, {cfg.max_len, cfg.text_feat}, "text.pos_table");
  expect(params.text.mix_w, {cfg.text_feat, cfg.text_feat}, "text.mix_w");
  expect(params.text.mix_b, {cfg.text_feat}, "text.mix_b");
  expect(params.text.head_w1, {cfg.text_feat, cfg.hidden}, "text.head_w1");
  expect(params.text.head_b1, {cfg.hidden}, "text.head_b1");
  expect(params.text.head_w2, {cfg.hidden, cfg.embed}, "text.head_w2");
  expect(params.text.head_b2, {cfg.embed}, "text.head_b2");
  expect(params.log_temperature, {1}, "log_temperature");
}

}  // namespace tier
