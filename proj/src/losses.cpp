#include "tier/losses.hpp"

#include <cmath>
#include <string>

namespace tier {

namespace {

void require_unit_rows(const Tensor& t, const char* what) {
  if (t.ndim() != 2) throw ShapeError(std::string(what) + ": expected a 2-d tensor");
  const std::size_t r = t.shape()[0];
  const std::size_t c = t.shape()[1];
  for (std::size_t i = 0; i < r; ++i) {
    double sq = 0.0;
    for (std::size_t j = 0; j < c; ++j) sq += t[i * c + j] * t[i * c + j];
    if (std::abs(std::sqrt(sq) - 1.0) > 1e-9) {
      throw ContractError(std::string(what) + ": row " + std::to_string(i) + " is not unit-norm");
    }
  }
}

}  // namespace

Tape::NodeId similarity_matrix(Tape& tape, Tape::NodeId token_e, Tape::NodeId patch_e) {
  require_unit_rows(tape.value(token_e), "similarity_matrix(token_e)");
  require_unit_rows(tape.value(patch_e), "similarity_matrix(patch_e)");
  return tape.matmul(token_e, patch_e, /*transpose_a=*/false, /*transpose_b=*/true);
}

Tape::NodeId patch_entropy_penalty(Tape& tape, Tape::NodeId S) {
  const Tensor& s = tape.value(S);
  if (s.ndim() != 2 || s.shape()[0] == 0 || s.shape()[1] == 0) {
    throw ContractError("patch_entropy_penalty: empty similarity matrix");
  }
  return tape.mean_all(tape.entropy(tape.softmax(S, /*axis=*/1), /*axis=*/1));
}

Tape::NodeId token_entropy_penalty(Tape& tape, Tape::NodeId S) {
  return patch_entropy_penalty(tape, tape.transpose(S));
}

Tape::NodeId clip_loss(Tape& tape, Tape::NodeId image_e, Tape::NodeId text_e,
                       Tape::NodeId log_temperature) {
  const Tensor& img = tape.value(image_e);
  const Tensor& txt = tape.value(text_e);
  if (img.ndim() != 2 || txt.ndim() != 2 || !img.same_shape(txt)) {
    throw ShapeError("clip_loss: embedding matrices must share shape n x d");
  }
  if (img.shape()[0] < 2) {
    throw ContractError("clip_loss: contrastive batch needs at least 2 pairs");
  }
  require_unit_rows(img, "clip_loss(image_e)");
  require_unit_rows(txt, "clip_loss(text_e)");
  Tape::NodeId logits = tape.mul_by_scalar(
      tape.matmul(image_e, text_e, /*transpose_a=*/false, /*transpose_b=*/true),
      tape.exp_scalar(log_temperature));
  Tape::NodeId loss_i = tape.cross_entropy_diag_rows(logits);
  Tape::NodeId loss_t = tape.cross_entropy_diag_rows(tape.transpose(logits));
  return tape.scale(tape.add(loss_i, loss_t), 0.5);
}

LossNodes tier_loss(Tape& tape, const std::vector<EncodedPair>& batch, const TierConfig& cfg,
                    Tape::NodeId log_temperature) {
  cfg.validate();
  if (batch.size() < 2) throw ContractError("tier_loss: batch must hold at least 2 pairs");

  std::vector<Tape::NodeId> image_rows, text_rows;
  image_rows.reserve(batch.size());
  text_rows.reserve(batch.size());
  for (const EncodedPair& pair : batch) {
    image_rows.push_back(pair.image.image_e);
    text_rows.push_back(pair.text.text_e);
  }
  LossNodes out;
  out.clip = clip_loss(tape, tape.stack_rows(image_rows), tape.stack_rows(text_rows),
                       log_temperature);
  if (!cfg.build_penalty_terms) {
    out.total = out.clip;
    return out;
  }

  // Entropy penalties on each sample's T x P similarity matrix.
  std::vector<Tape::NodeId> row_entropies, col_entropies;  // 1-d nodes per sample
  std::size_t total_rows = 0, total_cols = 0;
  for (const EncodedPair& pair : batch) {
    Tape::NodeId token_e = pair.text.token_e;
    std::size_t t_rows = pair.text.token_count;
    if (!cfg.cls_in_penalty) {
      if (t_rows <= 1) continue;  // caption with no non-CLS tokens contributes nothing
      std::vector<std::size_t> rest(t_rows - 1);
      for (std::size_t i = 0; i + 1 < t_rows; ++i) rest[i] = i + 1;
      token_e = tape.gather_rows(token_e, rest);
      t_rows -= 1;
    }
    Tape::NodeId S = similarity_matrix(tape, token_e, pair.image.patch_e);
    const std::size_t p_cols = tape.value(S).shape()[1];
    row_entropies.push_back(tape.entropy(tape.softmax(S, /*axis=*/1), /*axis=*/1));
    col_entropies.push_back(tape.entropy(tape.softmax(S, /*axis=*/0), /*axis=*/0));
    total_rows += t_rows;
    total_cols += p_cols;
  }
  if (row_entropies.empty()) {
    throw ContractError("tier_loss: no similarity rows left for the penalty terms");
  }

  auto average = [&](const std::vector<Tape::NodeId>& per_sample, std::size_t pooled_count) {
    Tape::NodeId acc = -1;
    if (cfg.averaging == PenaltyAveraging::kPerSample) {
      for (Tape::NodeId h : per_sample) {
        Tape::NodeId m = tape.mean_all(h);
        acc = (acc < 0) ? m : tape.add(acc, m);
      }
      return tape.scale(acc, 1.0 / static_cast<double>(per_sample.size()));
    }
    for (Tape::NodeId h : per_sample) {
      Tape::NodeId s = tape.sum_all(h);
      acc = (acc < 0) ? s : tape.add(acc, s);
    }
    return tape.scale(acc, 1.0 / static_cast<double>(pooled_count));
  };
  out.patch_penalty = average(row_entropies, total_rows);
  out.token_penalty = average(col_entropies, total_cols);

  out.total = tape.add(tape.add(out.clip, tape.scale(out.patch_penalty, cfg.lambda_p)),
                       tape.scale(out.token_penalty, cfg.lambda_t));

  // LossBreakdown identity, checked on every construction.
  const double expected = tape.value(out.clip)[0] +
                          cfg.lambda_p * tape.value(out.patch_penalty)[0] +
                          cfg.lambda_t * tape.value(out.token_penalty)[0];
  if (std::abs(tape.value(out.total)[0] - expected) > 1e-12 * std::max(1.0, std::abs(expected))) {
    throw NumericError("tier_loss: loss breakdown identity violated");
  }
  return out;
}

LossBreakdown read_breakdown(const Tape& tape, const LossNodes& nodes) {
  LossBreakdown b;
  b.clip_loss = tape.value(nodes.clip)[0];
  if (nodes.patch_penalty >= 0) b.patch_penalty = tape.value(nodes.patch_penalty)[0];
  if (nodes.token_penalty >= 0) b.token_penalty = tape.value(nodes.token_penalty)[0];
  b.total = tape.value(nodes.total)[0];
  return b;
}

}  // namespace tier
