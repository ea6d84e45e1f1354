#pragma once

#include <array>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "mdrec/cells.hpp"
#include "mdrec/image.hpp"

namespace mdrec {

// Layout of the hierarchical multi-directional recurrent network: three
// recurrent levels, each run in all four scan directions with untied
// weights, fused by summation and fed through a shared tanh feedforward
// layer that subsamples the grid; after the last level the activations are
// collapsed vertically and mapped to per-frame class posteriors.
struct NetConfig {
  CellVariant cell = CellVariant::mdleaky;
  int tile_w = 2, tile_h = 2;                          // input tiling
  std::vector<int> level_units{3, 15, 75};
  std::vector<int> ff_sizes{9, 30};
  std::vector<std::array<int, 2>> subsample{{{2, 2}}, {{2, 2}}};
  int alphabet_size = 0;  // character classes C; network emits C+1 (blank first)

  void validate() const;
  int outputs() const { return alphabet_size + 1; }
  int levels() const { return static_cast<int>(level_units.size()); }

  static NetConfig tiny(int alphabet = 3);
};

bool operator==(const NetConfig& a, const NetConfig& b);

struct Affine {
  Eigen::MatrixXd w;
  Eigen::VectorXd b;
};

struct LevelParams {
  std::array<CellWeights, 4> dir;
};

// All trainable weights. The same structure serves as gradient and
// velocity buffer; tensor iteration order is the serialization order.
struct NetParams {
  NetConfig cfg;
  std::vector<LevelParams> levels;
  std::vector<Affine> ff;
  Affine out;

  void for_each_tensor(const std::function<void(const std::string&, double*, size_t)>& f);
  void for_each_tensor(
      const std::function<void(const std::string&, const double*, size_t)>& f) const;
};

long param_count(const NetConfig& cfg);
NetParams zeros_like(const NetConfig& cfg);
// Deterministic init: weights uniform in [-0.1, 0.1], biases 0.
NetParams init_params(const NetConfig& cfg, uint64_t seed);

// In-place tensor arithmetic used by the optimizer.
void axpy(double alpha, const NetParams& x, NetParams& y);  // y += alpha * x
void scale(NetParams& x, double alpha);
double max_abs(const NetParams& x);
bool all_finite(const NetParams& x, std::string* offending = nullptr);
long clip_inplace(NetParams& x, double bound);  // returns number of clipped entries

// Per-frame class posteriors; column t is the distribution over the C+1
// classes (blank = row 0) at frame t. Every column sums to 1.
struct ProbMatrix {
  Eigen::MatrixXd p;  // (classes x frames)
  int frames() const { return static_cast<int>(p.cols()); }
  int classes() const { return static_cast<int>(p.rows()); }
};

// Rectangular feature grid; column idx(x, y) = x*h + y of `f` holds the
// feature vector at (x, y).
struct Grid {
  int w = 0, h = 0;
  Eigen::MatrixXd f;
  int positions() const { return w * h; }
  int idx(int x, int y) const { return x * h + y; }
};

struct DirCache {
  Eigen::MatrixXd a;  // pre-activations (5U x P)
  Eigen::MatrixXd s;  // internal states (U x P)
  Eigen::MatrixXd y;  // activations    (U x P)
};

struct LevelCache {
  Grid in;                      // level input grid
  std::array<DirCache, 4> dir;  // per-direction forward values
  Eigen::MatrixXd ysum;         // sum of the four direction outputs (U x P)
};

struct ForwardCache {
  std::vector<LevelCache> level;
  Eigen::MatrixXd collapsed;  // (U_last x T)
  Eigen::MatrixXd logits;     // (C+1 x T)
};

// Maps a writing to per-frame posteriors. Rejects images narrower than one
// input tile. Pass a cache to enable a later backward pass.
ProbMatrix net_forward(const GrayImage& img, const NetParams& params,
                       ForwardCache* cache = nullptr);

// Exact gradient of the scalar loss whose logit gradient is d_logits
// ((C+1) x T) with respect to every parameter.
NetParams net_backward(const NetParams& params, const ForwardCache& cache,
                       const Eigen::MatrixXd& d_logits);

// Self-describing binary container: magic "ARGS", version, NetConfig
// fields, then every tensor as little-endian 64-bit floats in declaration
// order. Round-trips bit-exactly.
void write_params(std::ostream& os, const NetParams& params);
NetParams read_params(std::istream& is);
void save_params(const NetParams& params, const std::string& path);
NetParams load_params(const std::string& path);

}  // namespace mdrec
