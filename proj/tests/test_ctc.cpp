#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mdrec/ctc.hpp"
#include "mdrec/error.hpp"
#include "mdrec/rng.hpp"

using namespace mdrec;

namespace {

// Independent oracle: sum the probability of every path over the full
// (C+1)^T path space whose collapse equals the target.
double brute_force_loss(const ProbMatrix& probs, const LabelSeq& target) {
  const int t_frames = probs.frames();
  const int classes = probs.classes();
  double total = 0.0;
  std::vector<int> path(t_frames, 0);
  while (true) {
    double p = 1.0;
    for (int t = 0; t < t_frames; ++t) p *= probs.p(path[t], t);
    if (collapse(path) == target) total += p;
    int pos = t_frames - 1;
    while (pos >= 0 && ++path[pos] == classes) path[pos--] = 0;
    if (pos < 0) break;
  }
  return -std::log(total);
}

ProbMatrix random_probs(int t_frames, int classes, Rng& rng) {
  ProbMatrix probs;
  probs.p.resize(classes, t_frames);
  for (int t = 0; t < t_frames; ++t) {
    double sum = 0.0;
    for (int k = 0; k < classes; ++k) {
      probs.p(k, t) = 0.05 + rng.unit();
      sum += probs.p(k, t);
    }
    probs.p.col(t) /= sum;
  }
  return probs;
}

ProbMatrix softmax_of(const Eigen::MatrixXd& logits) {
  ProbMatrix probs;
  probs.p.resize(logits.rows(), logits.cols());
  for (int t = 0; t < logits.cols(); ++t) {
    Eigen::VectorXd col = logits.col(t);
    Eigen::VectorXd e = (col.array() - col.maxCoeff()).exp();
    probs.p.col(t) = e / e.sum();
  }
  return probs;
}

}  // namespace

TEST_CASE("collapse merges repeats then removes blanks") {
  CHECK(collapse({0, 0, 0}) == LabelSeq{});
  CHECK(collapse({1, 1, 0, 1, 2, 0}) == LabelSeq{1, 1, 2});
  CHECK(collapse({1, 2, 2, 1}) == LabelSeq{1, 2, 1});
  CHECK(collapse({}) == LabelSeq{});
  CHECK(collapse({0, 3, 3, 3, 0, 0, 3}) == LabelSeq{3, 3});
}

TEST_CASE("ctc single-frame single-label loss") {
  ProbMatrix probs;
  probs.p.resize(3, 1);
  probs.p << 0.35, 0.4, 0.25;  // blank, a, b
  CtcResult res = ctc_loss_grad(probs, {1});
  CHECK(res.loss == doctest::Approx(0.916290731874155).epsilon(1e-12));  // -ln 0.4
}

TEST_CASE("ctc two-frame uniform example") {
  // T=2, classes {blank, a}, all probabilities 0.5. Paths collapsing to
  // [a]: aa, a-, -a with total mass 0.75 -> loss = -ln 0.75.
  ProbMatrix probs;
  probs.p.resize(2, 2);
  probs.p << 0.5, 0.5, 0.5, 0.5;
  CtcResult res = ctc_loss_grad(probs, {1});
  CHECK(res.loss == doctest::Approx(0.2876820724517809).epsilon(1e-12));
}

TEST_CASE("ctc matches brute force on fuzzed instances") {
  Rng rng(2024);
  int done = 0;
  while (done < 300) {
    int t_frames = rng.range_int(1, 6);
    int c = rng.range_int(1, 3);
    ProbMatrix probs = random_probs(t_frames, c + 1, rng);
    int len = rng.range_int(0, t_frames);
    LabelSeq target;
    for (int i = 0; i < len; ++i) target.push_back(rng.range_int(1, c));
    if (ctc_min_frames(target) > t_frames) continue;
    CtcResult res = ctc_loss_grad(probs, target);
    double oracle = brute_force_loss(probs, target);
    CHECK(res.loss == doctest::Approx(oracle).epsilon(1e-9));
    ++done;
  }
}

TEST_CASE("ctc infeasible target raises a distinct error") {
  ProbMatrix probs;
  probs.p.resize(2, 2);
  probs.p.setConstant(0.5);
  try {
    ctc_loss_grad(probs, {1, 1});  // needs 3 frames (repeat)
    FAIL("expected infeasible error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::infeasible_target);
  }
  CHECK(ctc_min_frames({1, 1}) == 3);
  CHECK(ctc_min_frames({1, 2}) == 2);
  CHECK(ctc_min_frames({}) == 0);
}

TEST_CASE("ctc gradient wrt logits matches finite differences") {
  Rng rng(77);
  for (int iter = 0; iter < 20; ++iter) {
    int t_frames = rng.range_int(2, 5);
    int c = rng.range_int(1, 3);
    Eigen::MatrixXd logits(c + 1, t_frames);
    for (Eigen::Index i = 0; i < logits.size(); ++i) logits.data()[i] = rng.uniform(-2, 2);
    LabelSeq target;
    int len = rng.range_int(1, std::min(t_frames, 3));
    for (int i = 0; i < len; ++i) target.push_back(rng.range_int(1, c));
    if (ctc_min_frames(target) > t_frames) continue;

    CtcResult res = ctc_loss_grad(softmax_of(logits), target);
    double scale = std::max(res.d_logits.cwiseAbs().maxCoeff(), 1e-12);
    double worst = 0.0;
    const double h = 1e-6;
    for (Eigen::Index i = 0; i < logits.size(); ++i) {
      double orig = logits.data()[i];
      logits.data()[i] = orig + h;
      double lp = ctc_loss_grad(softmax_of(logits), target).loss;
      logits.data()[i] = orig - h;
      double lm = ctc_loss_grad(softmax_of(logits), target).loss;
      logits.data()[i] = orig;
      double fd = (lp - lm) / (2 * h);
      worst = std::max(worst, std::fabs(fd - res.d_logits.data()[i]) / scale);
    }
    CHECK(worst < 1e-6);
  }
}

TEST_CASE("ctc stays finite for vanishing probabilities") {
  ProbMatrix probs;
  const int t_frames = 40;
  probs.p.resize(3, t_frames);
  probs.p.setConstant(1e-300);
  for (int t = 0; t < t_frames; ++t) probs.p(2, t) = 1.0 - 2e-300;
  LabelSeq target(5, 1);  // forces many tiny factors
  CtcResult res = ctc_loss_grad(probs, target);
  CHECK(std::isfinite(res.loss));
  CHECK(res.loss > 0.0);
  CHECK(std::exp(-res.loss) <= 1.0);
  for (Eigen::Index i = 0; i < res.d_logits.size(); ++i)
    CHECK(std::isfinite(res.d_logits.data()[i]));
}

TEST_CASE("exp(-loss) lies in (0, 1]") {
  Rng rng(31);
  for (int iter = 0; iter < 50; ++iter) {
    int t_frames = rng.range_int(1, 6);
    ProbMatrix probs = random_probs(t_frames, 3, rng);
    LabelSeq target;
    int len = rng.range_int(0, 2);
    for (int i = 0; i < len; ++i) target.push_back(rng.range_int(1, 2));
    if (ctc_min_frames(target) > t_frames) continue;
    double p = std::exp(-ctc_loss_grad(probs, target).loss);
    CHECK(p > 0.0);
    CHECK(p <= 1.0 + 1e-12);
  }
}
