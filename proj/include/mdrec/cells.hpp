#pragma once

#include <Eigen/Dense>
#include <array>
#include <vector>

namespace mdrec {

enum class CellVariant { mdleaky, mdlstm };

// One of the four column-first scan directions over a 2D grid.
struct Direction {
  int dx = 1;  // column traversal order
  int dy = 1;  // row traversal order within a column
};

inline constexpr std::array<Direction, 4> kDirections{{{+1, +1}, {+1, -1}, {-1, +1}, {-1, -1}}};

// One lattice position together with its predecessors. Predecessor 1 is
// (x - dx, y), predecessor 2 is (x, y - dy); absent when off-grid.
struct ScanStep {
  int x = 0;
  int y = 0;
  bool has_p1 = false;
  bool has_p2 = false;
};

// Emits every cell of a w-by-h grid exactly once, columns outermost, such
// that each cell appears after both of its predecessors.
std::vector<ScanStep> scan_order(int w, int h, Direction d);

// Trainable weights of one recurrent layer instance (one direction).
// Rows hold five gate blocks of `units` rows each, in the order
// input gate, forget gate 1, forget gate 2, output gate, cell input.
// MDLeaky and MDLSTM interpret the same tensors, so both variants have
// identical parameter shapes.
struct CellWeights {
  Eigen::MatrixXd w_in;    // (5U x inputs)
  Eigen::MatrixXd w_rec1;  // (5U x U), applied to predecessor 1 activation
  Eigen::MatrixXd w_rec2;  // (5U x U), applied to predecessor 2 activation
  Eigen::VectorXd bias;    // (5U)

  static CellWeights zeros(int units, int inputs);
  int units() const { return static_cast<int>(w_rec1.cols()); }
  int inputs() const { return static_cast<int>(w_in.cols()); }
};

struct CellState {
  Eigen::VectorXd s;  // internal state per unit
  Eigen::VectorXd y;  // activation per unit

  static CellState zeros(int units) {
    return {Eigen::VectorXd::Zero(units), Eigen::VectorXd::Zero(units)};
  }
};

// Pre-activations for one position: w_in*x + w_rec1*p1.y + w_rec2*p2.y + bias,
// with absent predecessors treated as zero states.
Eigen::VectorXd cell_preacts(const Eigen::VectorXd& x, const CellState* p1, const CellState* p2,
                             const CellWeights& w);

// Allocation-free state update used by the lattice loops. s1/s2 point at
// the predecessor internal states (length U) or are null when off-grid.
void cell_update(CellVariant variant, const Eigen::Ref<const Eigen::VectorXd>& preacts,
                 const double* s1, const double* s2, Eigen::Ref<Eigen::VectorXd> s_out,
                 Eigen::Ref<Eigen::VectorXd> y_out);

// Allocation-free backward kernel: turns upstream (d_y, d_s) into the
// pre-activation gradient and accumulates the predecessor state gradients
// into ds1_out/ds2_out when present.
void cell_backward_core(CellVariant variant, const Eigen::Ref<const Eigen::VectorXd>& preacts,
                        const double* s1, const double* s2,
                        const Eigen::Ref<const Eigen::VectorXd>& d_y,
                        const Eigen::Ref<const Eigen::VectorXd>& d_s,
                        Eigen::Ref<Eigen::VectorXd> da_out, double* ds1_out, double* ds2_out);

// State update from pre-activations.
//   MDLeaky: (li, l1, l2) = softmax(a_i, a_f1, a_f2) per unit;
//            s = l1*p1.s + l2*p2.s + li*tanh(a_g); y = sigmoid(a_o)*tanh(s).
//   MDLSTM:  s = sig(a_f1)*p1.s + sig(a_f2)*p2.s + sig(a_i)*tanh(a_g);
//            y = sigmoid(a_o)*tanh(s).
CellState cell_state_from_preacts(CellVariant variant, const Eigen::VectorXd& preacts,
                                  const CellState* p1, const CellState* p2);

CellState cell_forward(CellVariant variant, const Eigen::VectorXd& x, const CellState* p1,
                       const CellState* p2, const CellWeights& w,
                       Eigen::VectorXd* preacts_out = nullptr);

// Exact gradients of one forward step. d_y/d_s are the upstream gradients
// of the loss with respect to this position's activation and state.
// Outputs are accumulated (+=) into d_x, d_p1, d_p2 and gw.
void cell_backward(CellVariant variant, const CellWeights& w, const Eigen::VectorXd& x,
                   const CellState* p1, const CellState* p2, const Eigen::VectorXd& preacts,
                   const Eigen::VectorXd& d_y, const Eigen::VectorXd& d_s, Eigen::VectorXd& d_x,
                   CellState* d_p1, CellState* d_p2, CellWeights& gw);

}  // namespace mdrec
