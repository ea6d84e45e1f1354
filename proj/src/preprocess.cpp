#include "mdrec/preprocess.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "mdrec/error.hpp"

namespace mdrec {

void NormConfig::validate() const {
  if (above < 0 || below < 0 || target_height < 1)
    fail(Errc::invalid_config, "norm config: negative band or height");
  if (above + below > target_height)
    fail(Errc::invalid_config, "norm config: above + below exceeds target height");
  if (!(scale > 0.0 && scale <= 1.0)) fail(Errc::invalid_config, "norm config: scale must be in (0,1]");
  if (median_window < 1 || median_window % 2 == 0)
    fail(Errc::invalid_config, "norm config: median window must be odd and >= 1");
}

int NormConfig::output_height() const {
  int h = static_cast<int>(std::lround(target_height * scale));
  return std::max(1, h);
}

MedianCurve estimate_median_curve(const GrayImage& img, const NormConfig& cfg) {
  cfg.validate();
  if (img.empty()) fail(Errc::empty_input, "estimate_median_curve: empty image");
  const int w = img.width, h = img.height;
  const int half = cfg.median_window / 2;

  // Ink rows per column, sorted top to bottom by construction.
  std::vector<std::vector<int>> ink_rows(w);
  for (int x = 0; x < w; ++x)
    for (int y = 0; y < h; ++y)
      if (img.at(x, y) >= cfg.ink_threshold) ink_rows[x].push_back(y);

  MedianCurve curve(w, std::numeric_limits<double>::quiet_NaN());
  std::vector<int> window;
  for (int x = 0; x < w; ++x) {
    window.clear();
    int lo = std::max(0, x - half), hi = std::min(w - 1, x + half);
    for (int c = lo; c <= hi; ++c)
      window.insert(window.end(), ink_rows[c].begin(), ink_rows[c].end());
    if (window.empty()) continue;
    std::sort(window.begin(), window.end());
    size_t n = window.size();
    curve[x] = (n % 2 == 1) ? window[n / 2]
                            : 0.5 * (window[n / 2 - 1] + window[n / 2]);
  }

  // Fill gaps: linear interpolation between defined neighbors, constant
  // extrapolation at the ends, height/2 when there is no ink anywhere.
  int first = -1, last = -1;
  for (int x = 0; x < w; ++x)
    if (!std::isnan(curve[x])) {
      if (first < 0) first = x;
      last = x;
    }
  if (first < 0) {
    std::fill(curve.begin(), curve.end(), h / 2.0);
    return curve;
  }
  for (int x = 0; x < first; ++x) curve[x] = curve[first];
  for (int x = last + 1; x < w; ++x) curve[x] = curve[last];
  int prev = first;
  for (int x = first + 1; x <= last; ++x) {
    if (std::isnan(curve[x])) continue;
    for (int g = prev + 1; g < x; ++g) {
      double t = static_cast<double>(g - prev) / (x - prev);
      curve[g] = (1.0 - t) * curve[prev] + t * curve[x];
    }
    prev = x;
  }
  return curve;
}

GrayImage normalize_height(const GrayImage& img, const MedianCurve& curve, const NormConfig& cfg) {
  cfg.validate();
  if (img.empty()) fail(Errc::empty_input, "normalize_height: empty image");
  if (static_cast<int>(curve.size()) != img.width)
    fail(Errc::invalid_config, "normalize_height: curve length != image width");

  const int out_h = cfg.target_height;
  const double dst_band_top = cfg.band_top();
  const double dst_band_bot = cfg.band_top() + cfg.above + cfg.below;
  const double dst_bot = out_h - 1.0;
  GrayImage out(img.width, out_h);

  for (int x = 0; x < img.width; ++x) {
    const double src_band_top = curve[x] - cfg.above;
    const double src_band_bot = curve[x] + cfg.below;
    const double src_bot = img.height - 1.0;
    for (int oy = 0; oy < out_h; ++oy) {
      double sy;
      if (oy <= dst_band_top) {
        // Region above the band. When the band sticks out of the image the
        // region is empty; continue at unit slope into background instead
        // of smearing the top row.
        if (src_band_top > 0.0 && dst_band_top > 0.0)
          sy = src_band_top * (oy / dst_band_top);
        else
          sy = src_band_top + (oy - dst_band_top);
      } else if (oy <= dst_band_bot) {
        sy = src_band_top + (oy - dst_band_top);  // pure shift inside the band
      } else {
        if (src_band_bot < src_bot && dst_band_bot < dst_bot)
          sy = src_band_bot +
               (src_bot - src_band_bot) * ((oy - dst_band_bot) / (dst_bot - dst_band_bot));
        else
          sy = src_band_bot + (oy - dst_band_bot);
      }
      // Vertical-only linear interpolation within the column.
      int y0 = static_cast<int>(std::floor(sy));
      double f = sy - y0;
      auto get = [&](int yi) -> double {
        return (yi < 0 || yi >= img.height) ? 0.0 : img.at(x, yi);
      };
      out.at(x, oy) = (1.0 - f) * get(y0) + f * get(y0 + 1);
    }
  }
  return out;
}

namespace {

// Variance of column-wise ink sums after shifting each ink pixel by
// -tan(angle) * row. Ink mass is split linearly between adjacent bins.
double shear_projection_variance(const std::vector<std::array<double, 3>>& ink, int width,
                                 int height, double angle) {
  const double t = std::tan(angle);
  const double lo = std::min(0.0, -t * (height - 1.0));
  const double hi = (width - 1.0) + std::max(0.0, -t * (height - 1.0));
  const int bins = static_cast<int>(std::ceil(hi - lo)) + 1;
  std::vector<double> sums(static_cast<size_t>(std::max(1, bins)), 0.0);
  for (const auto& p : ink) {
    double xs = p[0] - t * p[1] - lo;
    int b = static_cast<int>(std::floor(xs));
    double f = xs - b;
    if (b >= 0 && b < bins) sums[b] += (1.0 - f) * p[2];
    if (b + 1 >= 0 && b + 1 < bins) sums[b + 1] += f * p[2];
  }
  double mean = 0.0;
  for (double v : sums) mean += v;
  mean /= sums.size();
  double var = 0.0;
  for (double v : sums) var += (v - mean) * (v - mean);
  return var / sums.size();
}

}  // namespace

double estimate_slant(const GrayImage& img, double ink_threshold) {
  if (img.empty()) return 0.0;
  std::vector<std::array<double, 3>> ink;  // x, y, intensity
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      if (img.at(x, y) >= ink_threshold)
        ink.push_back({static_cast<double>(x), static_cast<double>(y), img.at(x, y)});
  if (ink.empty()) return 0.0;

  // 29 candidates over [-0.7, 0.7]; visiting by increasing |angle| with a
  // strict comparison breaks ties toward 0.
  std::vector<double> candidates;
  for (int k = 0; k < 29; ++k) candidates.push_back(-0.7 + k * (1.4 / 28.0));
  std::sort(candidates.begin(), candidates.end(),
            [](double a, double b) { return std::fabs(a) != std::fabs(b) ? std::fabs(a) < std::fabs(b) : a < b; });

  double best_angle = 0.0, best_var = -1.0;
  for (double a : candidates) {
    double v = shear_projection_variance(ink, img.width, img.height, a);
    if (v > best_var) {
      best_var = v;
      best_angle = a;
    }
  }
  return best_angle;
}

GrayImage correct_slant(const GrayImage& img, double angle, double baseline_row) {
  if (std::fabs(angle) >= M_PI / 2.0) fail(Errc::invalid_config, "correct_slant: |angle| must be < pi/2");
  if (img.empty()) fail(Errc::empty_input, "correct_slant: empty image");
  const double t = std::tan(angle);
  double min_shift = 0.0, max_shift = 0.0;
  for (int y = 0; y < img.height; ++y) {
    double s = (y - baseline_row) * t;
    min_shift = std::min(min_shift, s);
    max_shift = std::max(max_shift, s);
  }
  const int left_pad = static_cast<int>(std::ceil(-min_shift));
  const int right_pad = static_cast<int>(std::ceil(max_shift));
  GrayImage out(img.width + left_pad + right_pad, img.height);

  for (int y = 0; y < img.height; ++y) {
    const double s = (y - baseline_row) * t;
    for (int ox = 0; ox < out.width; ++ox) {
      double sx = ox - left_pad - s;
      int x0 = static_cast<int>(std::floor(sx));
      double f = sx - x0;
      auto get = [&](int xi) -> double {
        return (xi < 0 || xi >= img.width) ? 0.0 : img.at(xi, y);
      };
      out.at(ox, y) = (1.0 - f) * get(x0) + f * get(x0 + 1);
    }
  }
  return out;
}

GrayImage preprocess_line(const GrayImage& img, const NormConfig& cfg) {
  cfg.validate();
  if (img.empty()) fail(Errc::empty_input, "preprocess_line: empty image");
  MedianCurve curve = estimate_median_curve(img, cfg);
  GrayImage norm = normalize_height(img, curve, cfg);
  double slant = estimate_slant(norm, cfg.ink_threshold);
  GrayImage straight = correct_slant(norm, -slant, cfg.baseline_row());
  int out_w = std::max(1, static_cast<int>(std::lround(straight.width * cfg.scale)));
  return resize_bilinear(straight, out_w, cfg.output_height());
}

}  // namespace mdrec
