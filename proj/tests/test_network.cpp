#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <fstream>

#include "mdrec/ctc.hpp"
#include "mdrec/error.hpp"
#include "mdrec/network.hpp"
#include "mdrec/rng.hpp"
#include "test_util.hpp"

using namespace mdrec;
using testutil::TempDir;

namespace {

GrayImage random_image(int w, int h, uint64_t seed) {
  Rng rng(seed);
  GrayImage img(w, h);
  for (double& v : img.px) v = rng.unit();
  return img;
}

}  // namespace

TEST_CASE("parameter count matches the hand-computed tiny value") {
  // Tiny config: tile 2x2 (4 inputs), levels 2/3/4 units, ff 3/4,
  // subsample 2x2 twice, alphabet 3.
  //   L1: 4 * 5*2*(4 + 2*2 + 1) = 360        FF1: 3*(2*4) + 3 = 27
  //   L2: 4 * 5*3*(3 + 2*3 + 1) = 600        FF2: 4*(3*4) + 4 = 52
  //   L3: 4 * 5*4*(4 + 2*4 + 1) = 1040       OUT: 4*4 + 4 = 20
  // total = 2099
  NetConfig cfg = NetConfig::tiny(3);
  CHECK(param_count(cfg) == 2099);

  // Count must agree with the actual tensor sizes.
  NetParams p = zeros_like(cfg);
  long n = 0;
  p.for_each_tensor([&n](const std::string&, const double*, size_t sz) { n += sz; });
  CHECK(n == param_count(cfg));

  NetConfig big;  // defaults: 3/15/75, ff 9/30, must also agree
  big.alphabet_size = 152;
  NetParams pb = zeros_like(big);
  long nb = 0;
  pb.for_each_tensor([&nb](const std::string&, const double*, size_t sz) { nb += sz; });
  CHECK(nb == param_count(big));
}

TEST_CASE("parameter count is identical for both cell variants") {
  NetConfig a = NetConfig::tiny(5);
  NetConfig b = a;
  b.cell = CellVariant::mdlstm;
  CHECK(param_count(a) == param_count(b));
}

TEST_CASE("init_params is deterministic and bounded") {
  NetConfig cfg = NetConfig::tiny(3);
  NetParams p1 = init_params(cfg, 42), p2 = init_params(cfg, 42), p3 = init_params(cfg, 43);
  bool identical = true, differs = false;
  p1.for_each_tensor([&](const std::string& name, const double* data, size_t n) {
    (void)name;
    (void)data;
    (void)n;
  });
  std::vector<double> v1, v2, v3;
  p1.for_each_tensor([&v1](const std::string&, const double* d, size_t n) {
    v1.insert(v1.end(), d, d + n);
  });
  p2.for_each_tensor([&v2](const std::string&, const double* d, size_t n) {
    v2.insert(v2.end(), d, d + n);
  });
  p3.for_each_tensor([&v3](const std::string&, const double* d, size_t n) {
    v3.insert(v3.end(), d, d + n);
  });
  for (size_t i = 0; i < v1.size(); ++i) {
    if (v1[i] != v2[i]) identical = false;
    if (v1[i] != v3[i]) differs = true;
    CHECK(std::fabs(v1[i]) <= 0.1);
  }
  CHECK(identical);
  CHECK(differs);
}

TEST_CASE("forward rows sum to 1 and are strictly inside (0,1)") {
  NetConfig cfg = NetConfig::tiny(4);
  NetParams p = init_params(cfg, 9);
  GrayImage img = random_image(20, 8, 1);
  ProbMatrix probs = net_forward(img, p);
  REQUIRE(probs.classes() == 5);
  REQUIRE(probs.frames() > 0);
  for (int t = 0; t < probs.frames(); ++t) {
    CHECK(probs.p.col(t).sum() == doctest::Approx(1.0).epsilon(1e-6));
    for (int k = 0; k < probs.classes(); ++k) {
      CHECK(probs.p(k, t) > 0.0);
      CHECK(probs.p(k, t) < 1.0);
    }
  }
}

TEST_CASE("forward is bit-reproducible and rejects narrow input") {
  NetConfig cfg = NetConfig::tiny(3);
  NetParams p = init_params(cfg, 5);
  GrayImage img = random_image(16, 8, 2);
  ProbMatrix a = net_forward(img, p), b = net_forward(img, p);
  CHECK((a.p - b.p).cwiseAbs().maxCoeff() == 0.0);

  GrayImage narrow(1, 8);
  CHECK_THROWS_AS(net_forward(narrow, p), Error);
}

TEST_CASE("blank input is invariant to intensity doubling") {
  NetConfig cfg = NetConfig::tiny(3);
  NetParams p = init_params(cfg, 5);
  GrayImage blank(12, 8);
  ProbMatrix a = net_forward(blank, p);
  GrayImage doubled = blank;  // 2 * 0 = 0
  for (double& v : doubled.px) v *= 2.0;
  ProbMatrix b = net_forward(doubled, p);
  CHECK((a.p - b.p).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("zero logit gradient gives zero parameter gradient") {
  NetConfig cfg = NetConfig::tiny(3);
  NetParams p = init_params(cfg, 5);
  GrayImage img = random_image(12, 8, 3);
  ForwardCache cache;
  ProbMatrix probs = net_forward(img, p, &cache);
  Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(probs.classes(), probs.frames());
  NetParams g = net_backward(p, cache, zero);
  CHECK(max_abs(g) == 0.0);
}

static double full_net_fd_check(CellVariant variant) {
  NetConfig cfg = NetConfig::tiny(3);
  cfg.cell = variant;
  NetParams params = init_params(cfg, 77);
  GrayImage img = random_image(12, 8, 4);
  LabelSeq target{1, 3};

  auto loss_fn = [&]() { return ctc_loss_grad(net_forward(img, params), target).loss; };

  ForwardCache cache;
  ProbMatrix probs = net_forward(img, params, &cache);
  CtcResult ctc = ctc_loss_grad(probs, target);
  NetParams analytic = net_backward(params, cache, ctc.d_logits);

  std::vector<double*> param_ptrs;
  params.for_each_tensor([&](const std::string&, double* d, size_t n) {
    for (size_t i = 0; i < n; ++i) param_ptrs.push_back(d + i);
  });
  std::vector<double> ga;
  analytic.for_each_tensor([&ga](const std::string&, const double* d, size_t n) {
    ga.insert(ga.end(), d, d + n);
  });

  double scale = 1e-12;
  for (double g : ga) scale = std::max(scale, std::fabs(g));
  double worst = 0.0;
  const double h = 1e-5;
  for (size_t i = 0; i < param_ptrs.size(); ++i) {
    double orig = *param_ptrs[i];
    *param_ptrs[i] = orig + h;
    double lp = loss_fn();
    *param_ptrs[i] = orig - h;
    double lm = loss_fn();
    *param_ptrs[i] = orig;
    double fd = (lp - lm) / (2 * h);
    worst = std::max(worst, std::fabs(fd - ga[i]) / scale);
  }
  return worst;
}

TEST_CASE("full tiny-network gradient matches finite differences") {
  CHECK(full_net_fd_check(CellVariant::mdleaky) < 1e-4);
  CHECK(full_net_fd_check(CellVariant::mdlstm) < 1e-4);
}

TEST_CASE("gradient accumulation over two lines equals the sum") {
  NetConfig cfg = NetConfig::tiny(3);
  NetParams p = init_params(cfg, 8);
  GrayImage img1 = random_image(14, 8, 5), img2 = random_image(18, 8, 6);
  LabelSeq t1{1}, t2{2, 3};

  auto grad_of = [&](const GrayImage& img, const LabelSeq& t) {
    ForwardCache cache;
    ProbMatrix probs = net_forward(img, p, &cache);
    return net_backward(p, cache, ctc_loss_grad(probs, t).d_logits);
  };
  NetParams g1 = grad_of(img1, t1);
  NetParams g2 = grad_of(img2, t2);
  NetParams sum = zeros_like(cfg);
  axpy(1.0, g1, sum);
  axpy(1.0, g2, sum);
  NetParams acc = grad_of(img1, t1);
  axpy(1.0, g2, acc);
  std::vector<double> a, b;
  sum.for_each_tensor([&a](const std::string&, const double* d, size_t n) {
    a.insert(a.end(), d, d + n);
  });
  acc.for_each_tensor([&b](const std::string&, const double* d, size_t n) {
    b.insert(b.end(), d, d + n);
  });
  for (size_t i = 0; i < a.size(); ++i) CHECK(std::fabs(a[i] - b[i]) <= 1e-12);
}

TEST_CASE("checkpoint round-trips bit-exactly") {
  TempDir tmp;
  NetConfig cfg = NetConfig::tiny(6);
  cfg.cell = CellVariant::mdlstm;
  NetParams p = init_params(cfg, 123);
  save_params(p, tmp.file("net.bin"));
  NetParams q = load_params(tmp.file("net.bin"));
  CHECK(q.cfg == cfg);
  std::vector<double> a, b;
  p.for_each_tensor([&a](const std::string&, const double* d, size_t n) {
    a.insert(a.end(), d, d + n);
  });
  q.for_each_tensor([&b](const std::string&, const double* d, size_t n) {
    b.insert(b.end(), d, d + n);
  });
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);

  // Saving the loaded params again gives identical bytes.
  save_params(q, tmp.file("net2.bin"));
  std::ifstream f1(tmp.file("net.bin"), std::ios::binary), f2(tmp.file("net2.bin"), std::ios::binary);
  std::string s1((std::istreambuf_iterator<char>(f1)), {});
  std::string s2((std::istreambuf_iterator<char>(f2)), {});
  CHECK(s1 == s2);
}

TEST_CASE("checkpoint corruption raises distinct errors") {
  TempDir tmp;
  NetParams p = init_params(NetConfig::tiny(3), 1);
  save_params(p, tmp.file("net.bin"));
  std::ifstream in(tmp.file("net.bin"), std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), {});
  in.close();

  {
    std::string bad = bytes;
    bad[0] = 'X';
    std::ofstream out(tmp.file("bad_magic.bin"), std::ios::binary);
    out << bad;
  }
  try {
    load_params(tmp.file("bad_magic.bin"));
    FAIL("expected bad magic");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::bad_magic);
  }

  {
    std::string bad = bytes;
    bad[4] = 99;  // version word
    std::ofstream out(tmp.file("bad_version.bin"), std::ios::binary);
    out << bad;
  }
  try {
    load_params(tmp.file("bad_version.bin"));
    FAIL("expected bad version");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::bad_version);
  }

  {
    std::string bad = bytes.substr(0, bytes.size() - 37);  // cut mid-tensor
    std::ofstream out(tmp.file("trunc.bin"), std::ios::binary);
    out << bad;
  }
  try {
    load_params(tmp.file("trunc.bin"));
    FAIL("expected truncation");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::truncated);
  }
}
