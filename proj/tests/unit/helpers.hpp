#pragma once

#include <atomic>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <unistd.h>

#include "dose/core_model.hpp"
#include "dose/random_keys.hpp"

namespace testutil {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("dose-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  [[nodiscard]] const fs::path& path() const { return path_; }
  [[nodiscard]] fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

inline dose::Dataset make_dataset(const std::vector<std::tuple<std::string, double, double>>& rows) {
  std::vector<dose::ScoredSample> records;
  for (const auto& [id, x, y] : rows) records.push_back({id, x, y});
  return dose::validate_dataset(std::move(records));
}

inline std::vector<double> normal_draws(std::size_t n, double mu, double sigma, std::uint64_t seed) {
  dose::PortableRng rng(seed);
  std::vector<double> out(n);
  for (auto& v : out) v = mu + sigma * rng.normal();
  return out;
}

// Independent normal scores on both axes, ids "p0", "p1", ...
inline dose::Dataset normal_dataset(std::size_t n, double mx, double sx, double my, double sy,
                                    std::uint64_t seed) {
  dose::PortableRng rng(seed);
  std::vector<dose::ScoredSample> records;
  records.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = mx + sx * rng.normal();
    const double y = my + sy * rng.normal();
    records.push_back({"p" + std::to_string(i), x, y});
  }
  return dose::validate_dataset(std::move(records));
}

}  // namespace testutil
