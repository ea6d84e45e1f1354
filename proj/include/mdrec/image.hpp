#pragma once

#include <string>
#include <vector>

namespace mdrec {

// 2D raster of ink intensities in [0,1]; 1 = full ink, 0 = background.
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<double> px;  // row-major, px[y * width + x]

  GrayImage() = default;
  GrayImage(int w, int h, double fill = 0.0)
      : width(w), height(h), px(static_cast<size_t>(w) * h, fill) {}

  double& at(int x, int y) { return px[static_cast<size_t>(y) * width + x]; }
  double at(int x, int y) const { return px[static_cast<size_t>(y) * width + x]; }

  bool empty() const { return width <= 0 || height <= 0; }

  // Intensity at a real-valued position, bilinear, 0 outside the canvas.
  double sample(double x, double y) const;

  double ink_mass() const;
  double mean_intensity() const;
};

// Mean absolute per-pixel difference; images must have equal dimensions.
double mean_abs_diff(const GrayImage& a, const GrayImage& b);

// Bilinear resize to the given dimensions (both >= 1).
GrayImage resize_bilinear(const GrayImage& img, int new_w, int new_h);

// Binary 8-bit PGM ("P5"). Dark ink maps to high intensity: on load
// intensity = 1 - raw/maxval, on save raw = round((1 - intensity) * 255).
GrayImage load_pgm(const std::string& path);
void save_pgm(const GrayImage& img, const std::string& path);

}  // namespace mdrec
