#include "mdrec/network.hpp"

#include <cmath>
#include <fstream>

#include "binio.hpp"
#include "mdrec/error.hpp"
#include "mdrec/rng.hpp"

namespace mdrec {

void NetConfig::validate() const {
  if (level_units.size() != 3) fail(Errc::invalid_config, "net config: expected three recurrent levels");
  if (ff_sizes.size() != level_units.size() - 1)
    fail(Errc::invalid_config, "net config: need one feedforward layer between consecutive levels");
  if (subsample.size() != level_units.size() - 1)
    fail(Errc::invalid_config, "net config: need one subsample tile between consecutive levels");
  if (tile_w < 1 || tile_h < 1) fail(Errc::invalid_config, "net config: input tile must be >= 1x1");
  for (int u : level_units)
    if (u < 1) fail(Errc::invalid_config, "net config: level size must be >= 1");
  for (int f : ff_sizes)
    if (f < 1) fail(Errc::invalid_config, "net config: feedforward size must be >= 1");
  for (auto& s : subsample)
    if (s[0] < 1 || s[1] < 1) fail(Errc::invalid_config, "net config: subsample tile must be >= 1x1");
  if (alphabet_size < 1) fail(Errc::invalid_config, "net config: alphabet size must be >= 1");
}

NetConfig NetConfig::tiny(int alphabet) {
  NetConfig cfg;
  cfg.level_units = {2, 3, 4};
  cfg.ff_sizes = {3, 4};
  cfg.alphabet_size = alphabet;
  return cfg;
}

bool operator==(const NetConfig& a, const NetConfig& b) {
  return a.cell == b.cell && a.tile_w == b.tile_w && a.tile_h == b.tile_h &&
         a.level_units == b.level_units && a.ff_sizes == b.ff_sizes &&
         a.subsample == b.subsample && a.alphabet_size == b.alphabet_size;
}

namespace {

int level_input_dim(const NetConfig& cfg, int level) {
  if (level == 0) return cfg.tile_w * cfg.tile_h;
  return cfg.ff_sizes[level - 1];
}

int ff_input_dim(const NetConfig& cfg, int gap) {
  return cfg.level_units[gap] * cfg.subsample[gap][0] * cfg.subsample[gap][1];
}

int ceil_div(int a, int b) { return (a + b - 1) / b; }

}  // namespace

long param_count(const NetConfig& cfg) {
  cfg.validate();
  long n = 0;
  for (int l = 0; l < cfg.levels(); ++l) {
    long u = cfg.level_units[l], in = level_input_dim(cfg, l);
    n += 4 * (5 * u * (in + 2 * u + 1));
  }
  for (size_t g = 0; g < cfg.ff_sizes.size(); ++g)
    n += static_cast<long>(cfg.ff_sizes[g]) * (ff_input_dim(cfg, static_cast<int>(g)) + 1);
  n += static_cast<long>(cfg.outputs()) * (cfg.level_units.back() + 1);
  return n;
}

NetParams zeros_like(const NetConfig& cfg) {
  cfg.validate();
  NetParams p;
  p.cfg = cfg;
  p.levels.resize(cfg.levels());
  for (int l = 0; l < cfg.levels(); ++l)
    for (auto& d : p.levels[l].dir)
      d = CellWeights::zeros(cfg.level_units[l], level_input_dim(cfg, l));
  p.ff.resize(cfg.ff_sizes.size());
  for (size_t g = 0; g < p.ff.size(); ++g) {
    p.ff[g].w = Eigen::MatrixXd::Zero(cfg.ff_sizes[g], ff_input_dim(cfg, static_cast<int>(g)));
    p.ff[g].b = Eigen::VectorXd::Zero(cfg.ff_sizes[g]);
  }
  p.out.w = Eigen::MatrixXd::Zero(cfg.outputs(), cfg.level_units.back());
  p.out.b = Eigen::VectorXd::Zero(cfg.outputs());
  return p;
}

NetParams init_params(const NetConfig& cfg, uint64_t seed) {
  NetParams p = zeros_like(cfg);
  Rng rng(seed);
  auto fill = [&rng](Eigen::MatrixXd& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-0.1, 0.1);
  };
  for (auto& level : p.levels)
    for (auto& d : level.dir) {
      fill(d.w_in);
      fill(d.w_rec1);
      fill(d.w_rec2);
    }
  for (auto& f : p.ff) fill(f.w);
  fill(p.out.w);
  return p;
}

void NetParams::for_each_tensor(
    const std::function<void(const std::string&, double*, size_t)>& f) {
  for (size_t l = 0; l < levels.size(); ++l)
    for (size_t d = 0; d < 4; ++d) {
      std::string base = "level" + std::to_string(l) + ".dir" + std::to_string(d) + ".";
      CellWeights& w = levels[l].dir[d];
      f(base + "w_in", w.w_in.data(), w.w_in.size());
      f(base + "w_rec1", w.w_rec1.data(), w.w_rec1.size());
      f(base + "w_rec2", w.w_rec2.data(), w.w_rec2.size());
      f(base + "bias", w.bias.data(), w.bias.size());
    }
  for (size_t g = 0; g < ff.size(); ++g) {
    std::string base = "ff" + std::to_string(g) + ".";
    f(base + "w", ff[g].w.data(), ff[g].w.size());
    f(base + "b", ff[g].b.data(), ff[g].b.size());
  }
  f("out.w", out.w.data(), out.w.size());
  f("out.b", out.b.data(), out.b.size());
}

void NetParams::for_each_tensor(
    const std::function<void(const std::string&, const double*, size_t)>& f) const {
  const_cast<NetParams*>(this)->for_each_tensor(
      [&f](const std::string& name, double* p, size_t n) { f(name, p, n); });
}

void axpy(double alpha, const NetParams& x, NetParams& y) {
  std::vector<std::pair<const double*, size_t>> xs;
  x.for_each_tensor([&xs](const std::string&, const double* p, size_t n) { xs.push_back({p, n}); });
  size_t i = 0;
  y.for_each_tensor([&](const std::string&, double* p, size_t n) {
    if (i >= xs.size() || xs[i].second != n) fail(Errc::invalid_config, "axpy: shape mismatch");
    const double* q = xs[i++].first;
    for (size_t k = 0; k < n; ++k) p[k] += alpha * q[k];
  });
}

void scale(NetParams& x, double alpha) {
  x.for_each_tensor([alpha](const std::string&, double* p, size_t n) {
    for (size_t k = 0; k < n; ++k) p[k] *= alpha;
  });
}

double max_abs(const NetParams& x) {
  double m = 0.0;
  x.for_each_tensor([&m](const std::string&, const double* p, size_t n) {
    for (size_t k = 0; k < n; ++k) m = std::max(m, std::fabs(p[k]));
  });
  return m;
}

bool all_finite(const NetParams& x, std::string* offending) {
  bool ok = true;
  x.for_each_tensor([&](const std::string& name, const double* p, size_t n) {
    if (!ok) return;
    for (size_t k = 0; k < n; ++k)
      if (!std::isfinite(p[k])) {
        ok = false;
        if (offending) *offending = name;
        return;
      }
  });
  return ok;
}

long clip_inplace(NetParams& x, double bound) {
  long clipped = 0;
  x.for_each_tensor([&](const std::string&, double* p, size_t n) {
    for (size_t k = 0; k < n; ++k) {
      if (p[k] > bound) {
        p[k] = bound;
        ++clipped;
      } else if (p[k] < -bound) {
        p[k] = -bound;
        ++clipped;
      }
    }
  });
  return clipped;
}

namespace {

Grid tile_image(const GrayImage& img, const NetConfig& cfg) {
  Grid g;
  g.w = ceil_div(img.width, cfg.tile_w);
  g.h = ceil_div(img.height, cfg.tile_h);
  g.f = Eigen::MatrixXd::Zero(cfg.tile_w * cfg.tile_h, g.positions());
  for (int bx = 0; bx < g.w; ++bx)
    for (int by = 0; by < g.h; ++by) {
      int col = g.idx(bx, by);
      for (int ty = 0; ty < cfg.tile_h; ++ty)
        for (int tx = 0; tx < cfg.tile_w; ++tx) {
          int x = bx * cfg.tile_w + tx, y = by * cfg.tile_h + ty;
          if (x < img.width && y < img.height) g.f(ty * cfg.tile_w + tx, col) = img.at(x, y);
        }
    }
  return g;
}

void run_direction(CellVariant variant, const CellWeights& w, const Grid& in, Direction d,
                   DirCache& cache) {
  const int u = w.units();
  const int p = in.positions();
  cache.a.resize(5 * u, p);
  cache.s.resize(u, p);
  cache.y.resize(u, p);
  for (const ScanStep& st : scan_order(in.w, in.h, d)) {
    const int col = in.idx(st.x, st.y);
    const int c1 = st.has_p1 ? in.idx(st.x - d.dx, st.y) : -1;
    const int c2 = st.has_p2 ? in.idx(st.x, st.y - d.dy) : -1;
    auto a = cache.a.col(col);
    a = w.bias;
    a.noalias() += w.w_in * in.f.col(col);
    if (c1 >= 0) a.noalias() += w.w_rec1 * cache.y.col(c1);
    if (c2 >= 0) a.noalias() += w.w_rec2 * cache.y.col(c2);
    cell_update(variant, cache.a.col(col), c1 >= 0 ? cache.s.col(c1).data() : nullptr,
                c2 >= 0 ? cache.s.col(c2).data() : nullptr, cache.s.col(col), cache.y.col(col));
  }
}

// Gathers the subsample-tile block (bx, by) of ysum into vec; cells beyond
// the grid edge stay zero.
void gather_block(const Eigen::MatrixXd& ysum, const Grid& gdim, int sw, int sh, int bx, int by,
                  Eigen::VectorXd& vec) {
  const int u = static_cast<int>(ysum.rows());
  vec.setZero();
  for (int ty = 0; ty < sh; ++ty)
    for (int tx = 0; tx < sw; ++tx) {
      int x = bx * sw + tx, y = by * sh + ty;
      if (x < gdim.w && y < gdim.h)
        vec.segment((ty * sw + tx) * u, u) = ysum.col(gdim.idx(x, y));
    }
}

}  // namespace

ProbMatrix net_forward(const GrayImage& img, const NetParams& params, ForwardCache* cache) {
  const NetConfig& cfg = params.cfg;
  cfg.validate();
  if (img.empty()) fail(Errc::empty_input, "net_forward: empty image");
  if (img.width < cfg.tile_w)
    fail(Errc::invalid_config, "net_forward: writing narrower than one input tile");

  ForwardCache local;
  ForwardCache& fc = cache ? *cache : local;
  fc.level.assign(cfg.levels(), LevelCache{});

  fc.level[0].in = tile_image(img, cfg);
  for (int l = 0; l < cfg.levels(); ++l) {
    LevelCache& lc = fc.level[l];
    const Grid& in = lc.in;
    for (int d = 0; d < 4; ++d)
      run_direction(cfg.cell, params.levels[l].dir[d], in, kDirections[d], lc.dir[d]);
    lc.ysum = lc.dir[0].y + lc.dir[1].y + lc.dir[2].y + lc.dir[3].y;

    if (l + 1 < cfg.levels()) {
      const int sw = cfg.subsample[l][0], sh = cfg.subsample[l][1];
      Grid next;
      next.w = ceil_div(in.w, sw);
      next.h = ceil_div(in.h, sh);
      next.f.resize(cfg.ff_sizes[l], next.positions());
      Eigen::VectorXd vec(ff_input_dim(cfg, l));
      for (int bx = 0; bx < next.w; ++bx)
        for (int by = 0; by < next.h; ++by) {
          gather_block(lc.ysum, in, sw, sh, bx, by, vec);
          next.f.col(next.idx(bx, by)) =
              ((params.ff[l].w * vec + params.ff[l].b).array()).tanh();
        }
      fc.level[l + 1].in = std::move(next);
    }
  }

  // Collapse over the vertical axis, then affine map and per-frame softmax.
  const LevelCache& top = fc.level.back();
  const int t_frames = top.in.w;
  const int u_last = cfg.level_units.back();
  fc.collapsed = Eigen::MatrixXd::Zero(u_last, t_frames);
  for (int x = 0; x < top.in.w; ++x)
    for (int y = 0; y < top.in.h; ++y) fc.collapsed.col(x) += top.ysum.col(top.in.idx(x, y));
  fc.logits = (params.out.w * fc.collapsed).colwise() + params.out.b;

  ProbMatrix probs;
  probs.p.resize(cfg.outputs(), t_frames);
  for (int t = 0; t < t_frames; ++t) {
    Eigen::VectorXd col = fc.logits.col(t);
    double m = col.maxCoeff();
    Eigen::VectorXd e = (col.array() - m).exp();
    probs.p.col(t) = e / e.sum();
  }
  return probs;
}

NetParams net_backward(const NetParams& params, const ForwardCache& cache,
                       const Eigen::MatrixXd& d_logits) {
  const NetConfig& cfg = params.cfg;
  NetParams grads = zeros_like(cfg);
  if (d_logits.rows() != cfg.outputs() || d_logits.cols() != cache.logits.cols())
    fail(Errc::invalid_config, "net_backward: logit gradient shape mismatch");

  grads.out.w.noalias() += d_logits * cache.collapsed.transpose();
  grads.out.b += d_logits.rowwise().sum();
  Eigen::MatrixXd d_collapsed = params.out.w.transpose() * d_logits;

  // Upstream gradient with respect to the current level's ysum.
  const LevelCache& top = cache.level.back();
  Eigen::MatrixXd d_ysum(cfg.level_units.back(), top.in.positions());
  for (int x = 0; x < top.in.w; ++x)
    for (int y = 0; y < top.in.h; ++y) d_ysum.col(top.in.idx(x, y)) = d_collapsed.col(x);

  for (int l = cfg.levels() - 1; l >= 0; --l) {
    const LevelCache& lc = cache.level[l];
    const Grid& in = lc.in;
    const int u = cfg.level_units[l];
    const int in_dim = level_input_dim(cfg, l);

    // Backprop through the four direction instances; each received the
    // same upstream gradient since their outputs were summed.
    Eigen::MatrixXd d_in = Eigen::MatrixXd::Zero(in_dim, in.positions());
    Eigen::MatrixXd d_y(u, in.positions()), d_s(u, in.positions());
    Eigen::VectorXd da(5 * u);
    for (int d = 0; d < 4; ++d) {
      const Direction dir = kDirections[d];
      const CellWeights& w = params.levels[l].dir[d];
      CellWeights& gw = grads.levels[l].dir[d];
      const DirCache& dc = lc.dir[d];
      d_y = d_ysum;
      d_s.setZero();
      auto order = scan_order(in.w, in.h, dir);
      for (auto it = order.rbegin(); it != order.rend(); ++it) {
        const ScanStep& st = *it;
        const int col = in.idx(st.x, st.y);
        const int c1 = st.has_p1 ? in.idx(st.x - dir.dx, st.y) : -1;
        const int c2 = st.has_p2 ? in.idx(st.x, st.y - dir.dy) : -1;
        cell_backward_core(cfg.cell, dc.a.col(col), c1 >= 0 ? dc.s.col(c1).data() : nullptr,
                           c2 >= 0 ? dc.s.col(c2).data() : nullptr, d_y.col(col), d_s.col(col),
                           da, c1 >= 0 ? d_s.col(c1).data() : nullptr,
                           c2 >= 0 ? d_s.col(c2).data() : nullptr);
        d_in.col(col).noalias() += w.w_in.transpose() * da;
        if (c1 >= 0) d_y.col(c1).noalias() += w.w_rec1.transpose() * da;
        if (c2 >= 0) d_y.col(c2).noalias() += w.w_rec2.transpose() * da;
        gw.w_in.noalias() += da * in.f.col(col).transpose();
        if (c1 >= 0) gw.w_rec1.noalias() += da * dc.y.col(c1).transpose();
        if (c2 >= 0) gw.w_rec2.noalias() += da * dc.y.col(c2).transpose();
        gw.bias += da;
      }
    }

    if (l == 0) break;

    // d_in is the gradient at the tanh output of feedforward layer l-1;
    // push it through the tanh, the affine map and the block gather.
    const int gap = l - 1;
    const LevelCache& prev = cache.level[gap];
    const int sw = cfg.subsample[gap][0], sh = cfg.subsample[gap][1];
    Eigen::MatrixXd d_prev_ysum =
        Eigen::MatrixXd::Zero(cfg.level_units[gap], prev.in.positions());
    Eigen::VectorXd vec(ff_input_dim(cfg, gap));
    Eigen::VectorXd d_vec(ff_input_dim(cfg, gap));
    for (int bx = 0; bx < in.w; ++bx)
      for (int by = 0; by < in.h; ++by) {
        const int col = in.idx(bx, by);
        Eigen::VectorXd d_pre =
            d_in.col(col).array() * (1.0 - in.f.col(col).array().square());
        gather_block(prev.ysum, prev.in, sw, sh, bx, by, vec);
        grads.ff[gap].w.noalias() += d_pre * vec.transpose();
        grads.ff[gap].b += d_pre;
        d_vec.noalias() = params.ff[gap].w.transpose() * d_pre;
        for (int ty = 0; ty < sh; ++ty)
          for (int tx = 0; tx < sw; ++tx) {
            int x = bx * sw + tx, y = by * sh + ty;
            if (x < prev.in.w && y < prev.in.h)
              d_prev_ysum.col(prev.in.idx(x, y)) +=
                  d_vec.segment((ty * sw + tx) * cfg.level_units[gap], cfg.level_units[gap]);
          }
      }
    d_ysum = std::move(d_prev_ysum);
  }
  return grads;
}

namespace {

constexpr char kMagic[4] = {'A', 'R', 'G', 'S'};
constexpr uint16_t kVersion = 1;

}  // namespace

void write_params(std::ostream& os, const NetParams& params) {
  const NetConfig& cfg = params.cfg;
  cfg.validate();
  binio::write_bytes(os, kMagic, 4);
  binio::write_u16(os, kVersion);
  binio::write_pod<uint8_t>(os, cfg.cell == CellVariant::mdleaky ? 0 : 1);
  binio::write_u32(os, cfg.tile_w);
  binio::write_u32(os, cfg.tile_h);
  binio::write_u32(os, static_cast<uint32_t>(cfg.level_units.size()));
  for (int u : cfg.level_units) binio::write_u32(os, u);
  binio::write_u32(os, static_cast<uint32_t>(cfg.ff_sizes.size()));
  for (int f : cfg.ff_sizes) binio::write_u32(os, f);
  binio::write_u32(os, static_cast<uint32_t>(cfg.subsample.size()));
  for (auto& s : cfg.subsample) {
    binio::write_u32(os, s[0]);
    binio::write_u32(os, s[1]);
  }
  binio::write_u32(os, cfg.alphabet_size);
  params.for_each_tensor([&os](const std::string& name, const double* p, size_t n) {
    (void)name;
    binio::write_bytes(os, p, n * sizeof(double));
  });
}

NetParams read_params(std::istream& is) {
  char magic[4];
  binio::read_bytes(is, magic, 4, "checkpoint magic");
  if (std::memcmp(magic, kMagic, 4) != 0) fail(Errc::bad_magic, "bad magic: not a checkpoint file");
  uint16_t version = binio::read_u16(is, "checkpoint version");
  if (version != kVersion)
    fail(Errc::bad_version, "unsupported checkpoint version " + std::to_string(version));
  NetConfig cfg;
  cfg.cell = binio::read_pod<uint8_t>(is, "cell variant") == 0 ? CellVariant::mdleaky
                                                               : CellVariant::mdlstm;
  cfg.tile_w = static_cast<int>(binio::read_u32(is, "tile width"));
  cfg.tile_h = static_cast<int>(binio::read_u32(is, "tile height"));
  cfg.level_units.assign(binio::read_u32(is, "level count"), 0);
  for (auto& u : cfg.level_units) u = static_cast<int>(binio::read_u32(is, "level size"));
  cfg.ff_sizes.assign(binio::read_u32(is, "ff count"), 0);
  for (auto& f : cfg.ff_sizes) f = static_cast<int>(binio::read_u32(is, "ff size"));
  cfg.subsample.assign(binio::read_u32(is, "subsample count"), {0, 0});
  for (auto& s : cfg.subsample) {
    s[0] = static_cast<int>(binio::read_u32(is, "subsample width"));
    s[1] = static_cast<int>(binio::read_u32(is, "subsample height"));
  }
  cfg.alphabet_size = static_cast<int>(binio::read_u32(is, "alphabet size"));
  cfg.validate();
  NetParams params = zeros_like(cfg);
  params.for_each_tensor([&is](const std::string& name, double* p, size_t n) {
    binio::read_bytes(is, p, n * sizeof(double), "tensor " + name);
  });
  return params;
}

void save_params(const NetParams& params, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) fail(Errc::io, "cannot write " + path);
  write_params(os, params);
  if (!os) fail(Errc::io, "write failed for " + path);
}

NetParams load_params(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(Errc::io, "cannot open " + path);
  return read_params(is);
}

}  // namespace mdrec
