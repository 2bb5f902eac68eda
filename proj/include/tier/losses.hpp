#pragma once

#include <vector>

#include "tier/encoders.hpp"
#include "tier/tape.hpp"

namespace tier {

struct TierConfig {
  double lambda_p = 0.2;  // weight of the patch penalty (row entropies)
  double lambda_t = 0.1;  // weight of the token penalty (column entropies)
  bool cls_in_penalty = true;
  PenaltyAveraging averaging = PenaltyAveraging::kPerSample;
  // When false the penalty subgraph is never built and the total IS the clip
  // loss node. (0,0) with the default true path must match this bit-for-bit.
  bool build_penalty_terms = true;

  void validate() const {
    if (lambda_p < 0.0 || lambda_t < 0.0) {
      throw ConfigError("tier config: lambda weights must be non-negative");
    }
  }
};

struct LossNodes {
  Tape::NodeId clip = -1;
  Tape::NodeId patch_penalty = -1;  // unweighted mean row entropy
  Tape::NodeId token_penalty = -1;  // unweighted mean column entropy
  Tape::NodeId total = -1;
};

struct LossBreakdown {
  double clip_loss = 0.0;
  double patch_penalty = 0.0;
  double token_penalty = 0.0;
  double total = 0.0;
};

// S = token_e * patch_e^T, the T x P cosine-similarity matrix of one pair.
// Rows of both inputs must be unit-norm (checked to 1e-9).
Tape::NodeId similarity_matrix(Tape& tape, Tape::NodeId token_e, Tape::NodeId patch_e);

// Mean over rows of the entropy of the row-wise softmax of S.
Tape::NodeId patch_entropy_penalty(Tape& tape, Tape::NodeId S);

// Same with rows and columns swapped; identical to the patch penalty of S^T.
Tape::NodeId token_entropy_penalty(Tape& tape, Tape::NodeId S);

// Symmetric cross-entropy over exp(t)-scaled cosine logits with diagonal
// targets. image_e and text_e are n x d_e with unit rows; n >= 2.
Tape::NodeId clip_loss(Tape& tape, Tape::NodeId image_e, Tape::NodeId text_e,
                       Tape::NodeId log_temperature);

// Full objective: clip + lambda_p * patch_penalty + lambda_t * token_penalty.
LossNodes tier_loss(Tape& tape, const std::vector<EncodedPair>& batch, const TierConfig& cfg,
                    Tape::NodeId log_temperature);

LossBreakdown read_breakdown(const Tape& tape, const LossNodes& nodes);

}  // namespace tier
