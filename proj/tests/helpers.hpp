#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "diffuse/vectors.hpp"

namespace testing_util {

inline std::vector<std::string> make_ids(std::size_t n, const std::string& prefix = "e") {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < n; ++i) ids.push_back(prefix + std::to_string(i));
  return ids;
}

inline diffuse::DifferenceSpace gaussian_space(std::size_t n, std::size_t dim,
                                               std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::vector<double> values(n * dim);
  for (double& v : values) v = normal(rng);
  return diffuse::DifferenceSpace(make_ids(n), diffuse::PairMode::kSubtract, dim,
                                  std::move(values));
}

inline std::vector<std::vector<double>> rows_of(const diffuse::DifferenceSpace& s) {
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < s.size(); ++i) {
    auto r = s.row(i);
    rows.emplace_back(r.begin(), r.end());
  }
  return rows;
}

class TempDir {
 public:
  TempDir() {
    static std::mt19937_64 rng(std::random_device{}());
    path_ = std::filesystem::temp_directory_path() /
            ("diffuse-test-" + std::to_string(rng()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace testing_util
