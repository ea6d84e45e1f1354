#include "mdrec/ctc.hpp"

#include <cmath>
#include <limits>

#include "mdrec/error.hpp"

namespace mdrec {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

inline double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  double m = std::max(a, b);
  return m + std::log1p(std::exp(std::min(a, b) - m));
}

inline double log_add3(double a, double b, double c) { return log_add(log_add(a, b), c); }

}  // namespace

LabelSeq collapse(const std::vector<int>& path) {
  LabelSeq out;
  int prev = -1;
  for (int c : path) {
    if (c != prev && c != 0) out.push_back(c);
    prev = c;
  }
  return out;
}

int ctc_min_frames(const LabelSeq& target) {
  int n = static_cast<int>(target.size());
  for (size_t i = 1; i < target.size(); ++i)
    if (target[i] == target[i - 1]) ++n;
  return n;
}

CtcResult ctc_loss_grad(const ProbMatrix& probs, const LabelSeq& target) {
  const int t_frames = probs.frames();
  const int classes = probs.classes();
  for (int c : target)
    if (c < 1 || c >= classes) fail(Errc::invalid_config, "ctc: label index out of range");
  if (ctc_min_frames(target) > t_frames)
    fail(Errc::infeasible_target, "ctc: target needs " + std::to_string(ctc_min_frames(target)) +
                                      " frames but only " + std::to_string(t_frames) +
                                      " are available");
  if (t_frames == 0) {
    CtcResult res;
    res.loss = 0.0;  // empty target over zero frames: the empty path, probability 1
    res.d_logits.resize(classes, 0);
    return res;
  }

  // Blank-augmented label sequence: blank, l1, blank, l2, ..., blank.
  const int s_len = 2 * static_cast<int>(target.size()) + 1;
  auto label_at = [&](int s) { return s % 2 == 0 ? 0 : target[s / 2]; };

  Eigen::MatrixXd logp = probs.p.array().max(0.0).log().matrix();

  Eigen::MatrixXd alpha(s_len, t_frames), beta(s_len, t_frames);
  alpha.setConstant(kNegInf);
  beta.setConstant(kNegInf);

  alpha(0, 0) = logp(0, 0);
  if (s_len > 1) alpha(1, 0) = logp(label_at(1), 0);
  for (int t = 1; t < t_frames; ++t) {
    for (int s = 0; s < s_len; ++s) {
      double v = alpha(s, t - 1);
      if (s >= 1) v = log_add(v, alpha(s - 1, t - 1));
      if (s >= 2 && label_at(s) != 0 && label_at(s) != label_at(s - 2))
        v = log_add(v, alpha(s - 2, t - 1));
      alpha(s, t) = v == kNegInf ? kNegInf : v + logp(label_at(s), t);
    }
  }

  beta(s_len - 1, t_frames - 1) = 0.0;
  if (s_len > 1) beta(s_len - 2, t_frames - 1) = 0.0;
  for (int t = t_frames - 2; t >= 0; --t) {
    for (int s = 0; s < s_len; ++s) {
      double v = beta(s, t + 1) + logp(label_at(s), t + 1);
      if (s + 1 < s_len) v = log_add(v, beta(s + 1, t + 1) + logp(label_at(s + 1), t + 1));
      if (s + 2 < s_len && label_at(s + 2) != 0 && label_at(s + 2) != label_at(s))
        v = log_add(v, beta(s + 2, t + 1) + logp(label_at(s + 2), t + 1));
      beta(s, t) = v;
    }
  }

  double log_total = s_len > 1 ? log_add(alpha(s_len - 1, t_frames - 1), alpha(s_len - 2, t_frames - 1))
                               : alpha(0, t_frames - 1);
  if (!(log_total > kNegInf))
    fail(Errc::numeric, "ctc: target has zero probability under the given posteriors");

  CtcResult res;
  res.loss = -log_total;

  // d loss / d logit[k, t] = p[k, t] - sum of state occupancies emitting k.
  res.d_logits = probs.p;
  for (int t = 0; t < t_frames; ++t) {
    for (int s = 0; s < s_len; ++s) {
      double g = alpha(s, t) + beta(s, t) - log_total;
      if (g == kNegInf) continue;
      res.d_logits(label_at(s), t) -= std::exp(g);
    }
  }
  return res;
}

}  // namespace mdrec
