#include "mdrec/image.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "mdrec/error.hpp"

namespace mdrec {

double GrayImage::sample(double x, double y) const {
  if (empty()) return 0.0;
  int x0 = static_cast<int>(std::floor(x));
  int y0 = static_cast<int>(std::floor(y));
  double fx = x - x0;
  double fy = y - y0;
  auto get = [&](int xi, int yi) -> double {
    if (xi < 0 || xi >= width || yi < 0 || yi >= height) return 0.0;
    return at(xi, yi);
  };
  double top = (1.0 - fx) * get(x0, y0) + fx * get(x0 + 1, y0);
  double bot = (1.0 - fx) * get(x0, y0 + 1) + fx * get(x0 + 1, y0 + 1);
  return (1.0 - fy) * top + fy * bot;
}

double GrayImage::ink_mass() const {
  double s = 0.0;
  for (double v : px) s += v;
  return s;
}

double GrayImage::mean_intensity() const {
  if (px.empty()) return 0.0;
  return ink_mass() / static_cast<double>(px.size());
}

double mean_abs_diff(const GrayImage& a, const GrayImage& b) {
  if (a.width != b.width || a.height != b.height)
    fail(Errc::invalid_config, "mean_abs_diff: image dimensions differ");
  if (a.px.empty()) return 0.0;
  double s = 0.0;
  for (size_t i = 0; i < a.px.size(); ++i) s += std::fabs(a.px[i] - b.px[i]);
  return s / static_cast<double>(a.px.size());
}

GrayImage resize_bilinear(const GrayImage& img, int new_w, int new_h) {
  if (new_w < 1 || new_h < 1) fail(Errc::invalid_config, "resize: target size must be >= 1");
  GrayImage out(new_w, new_h);
  double sx = static_cast<double>(img.width) / new_w;
  double sy = static_cast<double>(img.height) / new_h;
  for (int y = 0; y < new_h; ++y) {
    double src_y = (y + 0.5) * sy - 0.5;
    for (int x = 0; x < new_w; ++x) {
      double src_x = (x + 0.5) * sx - 0.5;
      out.at(x, y) = img.sample(src_x, src_y);
    }
  }
  return out;
}

namespace {

// Reads one PNM header token, skipping whitespace and '#' comments.
std::string next_token(std::istream& in) {
  std::string tok;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok += static_cast<char>(c);
  }
  return tok;
}

}  // namespace

GrayImage load_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::io, "cannot open " + path);
  std::string magic = next_token(in);
  if (magic != "P5") fail(Errc::bad_magic, path + ": not a binary PGM (P5)");
  std::string ws = next_token(in), hs = next_token(in), ms = next_token(in);
  if (ws.empty() || hs.empty() || ms.empty()) fail(Errc::truncated, path + ": truncated PGM header");
  long w = 0, h = 0, maxval = 0;
  try {
    w = std::stol(ws);
    h = std::stol(hs);
    maxval = std::stol(ms);
  } catch (const std::exception&) {
    fail(Errc::malformed, path + ": bad PGM header");
  }
  if (w < 1 || h < 1 || maxval < 1 || maxval > 255)
    fail(Errc::malformed, path + ": unsupported PGM dimensions or maxval");
  GrayImage img(static_cast<int>(w), static_cast<int>(h));
  std::vector<unsigned char> raw(static_cast<size_t>(w) * h);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (static_cast<size_t>(in.gcount()) != raw.size())
    fail(Errc::truncated, path + ": PGM pixel data truncated");
  for (size_t i = 0; i < raw.size(); ++i)
    img.px[i] = 1.0 - static_cast<double>(raw[i]) / static_cast<double>(maxval);
  return img;
}

void save_pgm(const GrayImage& img, const std::string& path) {
  if (img.empty()) fail(Errc::empty_input, "save_pgm: empty image");
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(Errc::io, "cannot write " + path);
  out << "P5\n" << img.width << " " << img.height << "\n255\n";
  std::vector<unsigned char> raw(img.px.size());
  for (size_t i = 0; i < img.px.size(); ++i) {
    double v = 1.0 - img.px[i];
    double q = std::lround(v * 255.0);
    raw[i] = static_cast<unsigned char>(q < 0 ? 0 : (q > 255 ? 255 : q));
  }
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!out) fail(Errc::io, "write failed for " + path);
}

}  // namespace mdrec
