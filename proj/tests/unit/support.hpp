#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>

#include "emo/core/rng.hpp"
#include "emo/core/tensor.hpp"

namespace test {

inline emo::Tensor random_tensor(emo::Shape shape, emo::RngStream& rng, double lo = -1.0, double hi = 1.0) {
  emo::Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

inline bool close_rel(double a, double b, double tol) {
  return std::abs(a - b) <= tol * std::max({std::abs(a), std::abs(b), 1e-300});
}

// Fresh, empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("emo_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace test
