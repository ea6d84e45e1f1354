#pragma once

#include <cstdlib>
#include <filesystem>
#include <string>

#include "mdrec/image.hpp"

namespace testutil {

// Self-deleting scratch directory under the system temp path.
class TempDir {
 public:
  TempDir() {
    std::string tmpl = (std::filesystem::temp_directory_path() / "mdrec_test_XXXXXX").string();
    char* p = mkdtemp(tmpl.data());
    if (!p) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::string& path() const { return path_; }
  std::string file(const std::string& name) const {
    return (std::filesystem::path(path_) / name).string();
  }

 private:
  std::string path_;
};

// Vertical bar of ink of the given thickness centered at column x.
inline void draw_vbar(mdrec::GrayImage& img, int x, int y0, int y1, int thickness = 1,
                      double value = 1.0) {
  for (int t = 0; t < thickness; ++t)
    for (int y = y0; y <= y1; ++y)
      if (x + t >= 0 && x + t < img.width && y >= 0 && y < img.height) img.at(x + t, y) = value;
}

inline void draw_hbar(mdrec::GrayImage& img, int y, int x0, int x1, double value = 1.0) {
  for (int x = x0; x <= x1; ++x)
    if (x >= 0 && x < img.width && y >= 0 && y < img.height) img.at(x, y) = value;
}

}  // namespace testutil
