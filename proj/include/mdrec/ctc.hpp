#pragma once

#include <Eigen/Dense>
#include <vector>

#include "mdrec/network.hpp"

namespace mdrec {

// Label sequence: class indices in [1, C], no blanks.
using LabelSeq = std::vector<int>;

// CTC path-to-label map: merge adjacent equal indices, then drop blanks.
LabelSeq collapse(const std::vector<int>& path);

// Frames required to emit `target` (length plus one blank between each
// adjacent repeated pair).
int ctc_min_frames(const LabelSeq& target);

struct CtcResult {
  double loss = 0.0;            // -ln sum of path probabilities
  Eigen::MatrixXd d_logits;     // gradient wrt pre-softmax logits, (C+1 x T)
};

// Log-space forward-backward over the blank-augmented target. Targets that
// need more frames than available raise Errc::infeasible_target.
CtcResult ctc_loss_grad(const ProbMatrix& probs, const LabelSeq& target);

}  // namespace mdrec
