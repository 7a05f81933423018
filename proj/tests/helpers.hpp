#pragma once

// Shared scaffolding for the unit tests: scratch directories, file slurping,
// and random test-image builders.

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "vq/image.hpp"
#include "vq/rng.hpp"

namespace vqtest {

// Unique scratch directory, removed (recursively) on destruction.
struct TempDir {
  std::filesystem::path path;

  TempDir() {
    static int counter = 0;
    path = std::filesystem::temp_directory_path() /
           ("vq_test_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter++));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const {
    return (path / name).string();
  }
};

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void spit(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

// Random 8-bit-valued image (integer intensities, stored as doubles).
inline vq::GrayImage random_image(vq::Rng& rng, Eigen::Index w,
                                  Eigen::Index h) {
  vq::GrayImage img = vq::make_image(w, h);
  for (Eigen::Index y = 0; y < h; ++y)
    for (Eigen::Index x = 0; x < w; ++x)
      img.pixels(y, x) = static_cast<double>(rng.below(256));
  return img;
}

}  // namespace vqtest
