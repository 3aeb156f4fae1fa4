#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <algorithm>
#include <random>
#include <string>
#include <vector>

#include "protoexplain/matrix.hpp"

namespace testing {

namespace fs = std::filesystem;

inline fs::path fixtures() { return PROTOEXPLAIN_FIXTURES; }

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = fs::temp_directory_path() / ("protoexplain_" + tag + "_" + std::to_string(rd()));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_bytes(const fs::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

inline protoexplain::Matrix random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng,
                                          float lo = -1.0f, float hi = 1.0f) {
  std::uniform_real_distribution<float> u(lo, hi);
  protoexplain::Matrix m(rows, cols);
  for (float& v : m.data()) v = u(rng);
  return m;
}

// Exact k-means optimum by enumerating every assignment of n points to k
// non-empty clusters (n <= 10, k <= 3 keeps this under 60k partitions).
inline double optimal_inertia(const protoexplain::Matrix& pts, std::size_t k) {
  const std::size_t n = pts.rows();
  const std::size_t d = pts.cols();
  std::vector<std::size_t> label(n, 0);
  double best = std::numeric_limits<double>::infinity();
  while (true) {
    std::vector<std::size_t> count(k, 0);
    for (auto l : label) ++count[l];
    bool full = true;
    for (auto c : count) full = full && c > 0;
    if (full) {
      double total = 0.0;
      for (std::size_t c = 0; c < k; ++c) {
        std::vector<double> mean(d, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
          if (label[i] != c) continue;
          for (std::size_t j = 0; j < d; ++j) mean[j] += pts(i, j);
        }
        for (auto& m : mean) m /= static_cast<double>(count[c]);
        for (std::size_t i = 0; i < n; ++i) {
          if (label[i] != c) continue;
          for (std::size_t j = 0; j < d; ++j) {
            const double diff = pts(i, j) - mean[j];
            total += diff * diff;
          }
        }
      }
      best = std::min(best, total);
    }
    std::size_t pos = 0;
    while (pos < n && ++label[pos] == k) label[pos++] = 0;
    if (pos == n) break;
  }
  return best;
}

}  // namespace testing
