#pragma once

#include <vector>

#include "mdrec/image.hpp"

namespace mdrec {

// Geometry of the line normalization. The main body of the characters is
// the band from `above` pixels above to `below` pixels below the local
// median of the ink; it is moved to a fixed position inside a canvas of
// `target_height` rows, and the result is finally rescaled by `scale`.
struct NormConfig {
  int above = 80;
  int below = 60;
  int target_height = 180;
  double scale = 0.5;
  double ink_threshold = 0.5;
  int median_window = 61;

  void validate() const;
  // First output row of the main-body band.
  int band_top() const { return (target_height - above - below) / 2; }
  // Row the median curve is moved to.
  int baseline_row() const { return band_top() + above; }
  int output_height() const;
};

// One row coordinate per column; the vertical center of the ink in a
// sliding window around that column.
using MedianCurve = std::vector<double>;

MedianCurve estimate_median_curve(const GrayImage& img, const NormConfig& cfg);

// Remaps each column vertically so the band [curve-above, curve+below]
// lands on [band_top, band_top+above+below] at unit scale (a pure shift)
// while the regions outside the band are linearly stretched or shrunk to
// fill the remaining output rows. Output height = cfg.target_height.
GrayImage normalize_height(const GrayImage& img, const MedianCurve& curve, const NormConfig& cfg);

// Shear angle in [-0.7, 0.7] (29-point grid, ties toward 0) that maximizes
// the variance of column-wise ink sums after shearing by the negated angle.
double estimate_slant(const GrayImage& img, double ink_threshold = 0.5);

// Shifts row r horizontally by (r - baseline_row) * tan(angle) with linear
// interpolation; the canvas is widened so nothing is clipped.
GrayImage correct_slant(const GrayImage& img, double angle, double baseline_row);

// estimate_median_curve -> normalize_height -> estimate_slant ->
// correct_slant -> bilinear downscale by cfg.scale.
GrayImage preprocess_line(const GrayImage& img, const NormConfig& cfg);

}  // namespace mdrec
