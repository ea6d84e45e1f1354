#include "mdrec/cells.hpp"

#include <cmath>

#include "mdrec/error.hpp"

namespace mdrec {

std::vector<ScanStep> scan_order(int w, int h, Direction d) {
  if (w < 1 || h < 1) fail(Errc::invalid_config, "scan_order: grid must be at least 1x1");
  if ((d.dx != 1 && d.dx != -1) || (d.dy != 1 && d.dy != -1))
    fail(Errc::invalid_config, "scan_order: direction signs must be +-1");
  std::vector<ScanStep> order;
  order.reserve(static_cast<size_t>(w) * h);
  int x0 = d.dx > 0 ? 0 : w - 1;
  int y0 = d.dy > 0 ? 0 : h - 1;
  for (int i = 0; i < w; ++i) {
    int x = x0 + i * d.dx;
    for (int j = 0; j < h; ++j) {
      int y = y0 + j * d.dy;
      ScanStep st;
      st.x = x;
      st.y = y;
      int px = x - d.dx;
      int py = y - d.dy;
      st.has_p1 = px >= 0 && px < w;
      st.has_p2 = py >= 0 && py < h;
      order.push_back(st);
    }
  }
  return order;
}

CellWeights CellWeights::zeros(int units, int inputs) {
  CellWeights w;
  w.w_in = Eigen::MatrixXd::Zero(5 * units, inputs);
  w.w_rec1 = Eigen::MatrixXd::Zero(5 * units, units);
  w.w_rec2 = Eigen::MatrixXd::Zero(5 * units, units);
  w.bias = Eigen::VectorXd::Zero(5 * units);
  return w;
}

namespace {

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Eigen::VectorXd cell_preacts(const Eigen::VectorXd& x, const CellState* p1, const CellState* p2,
                             const CellWeights& w) {
  Eigen::VectorXd a = w.bias;
  a.noalias() += w.w_in * x;
  if (p1) a.noalias() += w.w_rec1 * p1->y;
  if (p2) a.noalias() += w.w_rec2 * p2->y;
  return a;
}

void cell_update(CellVariant variant, const Eigen::Ref<const Eigen::VectorXd>& a,
                 const double* s1, const double* s2, Eigen::Ref<Eigen::VectorXd> s_out,
                 Eigen::Ref<Eigen::VectorXd> y_out) {
  const int u = static_cast<int>(a.size()) / 5;
  for (int k = 0; k < u; ++k) {
    const double ai = a[k], af1 = a[u + k], af2 = a[2 * u + k], ao = a[3 * u + k],
                 ag = a[4 * u + k];
    const double ps1 = s1 ? s1[k] : 0.0;
    const double ps2 = s2 ? s2[k] : 0.0;
    double s;
    if (variant == CellVariant::mdleaky) {
      double m = std::max(ai, std::max(af1, af2));
      double ei = std::exp(ai - m), e1 = std::exp(af1 - m), e2 = std::exp(af2 - m);
      double z = ei + e1 + e2;
      s = (e1 * ps1 + e2 * ps2 + ei * std::tanh(ag)) / z;
    } else {
      s = sigmoid(af1) * ps1 + sigmoid(af2) * ps2 + sigmoid(ai) * std::tanh(ag);
    }
    s_out[k] = s;
    y_out[k] = sigmoid(ao) * std::tanh(s);
  }
}

CellState cell_state_from_preacts(CellVariant variant, const Eigen::VectorXd& a,
                                  const CellState* p1, const CellState* p2) {
  const int u = static_cast<int>(a.size()) / 5;
  CellState out = CellState::zeros(u);
  cell_update(variant, a, p1 ? p1->s.data() : nullptr, p2 ? p2->s.data() : nullptr, out.s, out.y);
  return out;
}

CellState cell_forward(CellVariant variant, const Eigen::VectorXd& x, const CellState* p1,
                       const CellState* p2, const CellWeights& w, Eigen::VectorXd* preacts_out) {
  Eigen::VectorXd a = cell_preacts(x, p1, p2, w);
  CellState out = cell_state_from_preacts(variant, a, p1, p2);
  if (preacts_out) *preacts_out = std::move(a);
  return out;
}

void cell_backward_core(CellVariant variant, const Eigen::Ref<const Eigen::VectorXd>& a,
                        const double* s1, const double* s2,
                        const Eigen::Ref<const Eigen::VectorXd>& d_y,
                        const Eigen::Ref<const Eigen::VectorXd>& d_s,
                        Eigen::Ref<Eigen::VectorXd> da, double* ds1_out, double* ds2_out) {
  const int u = static_cast<int>(a.size()) / 5;
  for (int k = 0; k < u; ++k) {
    const double ai = a[k], af1 = a[u + k], af2 = a[2 * u + k], ao = a[3 * u + k],
                 ag = a[4 * u + k];
    const double ps1 = s1 ? s1[k] : 0.0;
    const double ps2 = s2 ? s2[k] : 0.0;
    const double g = std::tanh(ag);
    const double o = sigmoid(ao);

    double li = 0, l1 = 0, l2 = 0, fi = 0, f1 = 0, f2 = 0, s;
    if (variant == CellVariant::mdleaky) {
      double m = std::max(ai, std::max(af1, af2));
      double ei = std::exp(ai - m), e1 = std::exp(af1 - m), e2 = std::exp(af2 - m);
      double z = ei + e1 + e2;
      li = ei / z;
      l1 = e1 / z;
      l2 = e2 / z;
      s = l1 * ps1 + l2 * ps2 + li * g;
    } else {
      fi = sigmoid(ai);
      f1 = sigmoid(af1);
      f2 = sigmoid(af2);
      s = f1 * ps1 + f2 * ps2 + fi * g;
    }
    const double ts = std::tanh(s);

    // Total gradient at the internal state: direct upstream d_s plus the
    // path through y = sigmoid(a_o) * tanh(s).
    const double ds = d_s[k] + d_y[k] * o * (1.0 - ts * ts);
    da[3 * u + k] = d_y[k] * ts * o * (1.0 - o);

    if (variant == CellVariant::mdleaky) {
      da[4 * u + k] = ds * li * (1.0 - g * g);
      // Softmax Jacobian over the three mixing coefficients.
      const double dli = ds * g, dl1 = ds * ps1, dl2 = ds * ps2;
      const double dot = li * dli + l1 * dl1 + l2 * dl2;
      da[k] = li * (dli - dot);
      da[u + k] = l1 * (dl1 - dot);
      da[2 * u + k] = l2 * (dl2 - dot);
      if (ds1_out) ds1_out[k] += ds * l1;
      if (ds2_out) ds2_out[k] += ds * l2;
    } else {
      da[4 * u + k] = ds * fi * (1.0 - g * g);
      da[k] = ds * g * fi * (1.0 - fi);
      da[u + k] = ds * ps1 * f1 * (1.0 - f1);
      da[2 * u + k] = ds * ps2 * f2 * (1.0 - f2);
      if (ds1_out) ds1_out[k] += ds * f1;
      if (ds2_out) ds2_out[k] += ds * f2;
    }
  }
}

void cell_backward(CellVariant variant, const CellWeights& w, const Eigen::VectorXd& x,
                   const CellState* p1, const CellState* p2, const Eigen::VectorXd& a,
                   const Eigen::VectorXd& d_y, const Eigen::VectorXd& d_s, Eigen::VectorXd& d_x,
                   CellState* d_p1, CellState* d_p2, CellWeights& gw) {
  Eigen::VectorXd da(a.size());
  cell_backward_core(variant, a, p1 ? p1->s.data() : nullptr, p2 ? p2->s.data() : nullptr, d_y,
                     d_s, da, d_p1 ? d_p1->s.data() : nullptr, d_p2 ? d_p2->s.data() : nullptr);
  d_x.noalias() += w.w_in.transpose() * da;
  if (d_p1) d_p1->y.noalias() += w.w_rec1.transpose() * da;
  if (d_p2) d_p2->y.noalias() += w.w_rec2.transpose() * da;
  gw.w_in.noalias() += da * x.transpose();
  if (p1) gw.w_rec1.noalias() += da * p1->y.transpose();
  if (p2) gw.w_rec2.noalias() += da * p2->y.transpose();
  gw.bias += da;
}

}  // namespace mdrec
