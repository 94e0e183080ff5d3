#pragma once

#include <unistd.h>

#include <filesystem>
#include <string>

#include "pul/embedder.hpp"
#include "pul/rng.hpp"
#include "pul/types.hpp"

namespace testutil {

inline pul::EmbedModel random_model(pul::EmbedArch arch, int d, int h, int e, int c,
                                    std::uint64_t seed, double scale = 0.5) {
  pul::EmbedModel m = pul::make_model(arch, d, h, e, c);
  pul::Rng rng(seed);
  for (double& v : m.w1.data) v = rng.normal(0.0, scale);
  for (double& v : m.b1) v = rng.normal(0.0, scale);
  for (double& v : m.w2.data) v = rng.normal(0.0, scale);
  for (double& v : m.b2) v = rng.normal(0.0, scale);
  for (double& v : m.wc.data) v = rng.normal(0.0, scale);
  for (double& v : m.bc) v = rng.normal(0.0, scale);
  return m;
}

inline pul::FloatMatrix random_features(std::size_t n, std::size_t dim, std::uint64_t seed,
                                        double scale = 1.0) {
  pul::FloatMatrix xs(n, dim);
  pul::Rng rng(seed);
  for (float& v : xs.data) v = static_cast<float>(rng.normal(0.0, scale));
  return xs;
}

inline pul::Matrix random_matrix(std::size_t n, std::size_t dim, std::uint64_t seed,
                                 double scale = 1.0) {
  pul::Matrix xs(n, dim);
  pul::Rng rng(seed);
  for (double& v : xs.data) v = rng.normal(0.0, scale);
  return xs;
}

// Unique scratch directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    const auto base = std::filesystem::temp_directory_path();
    path_ = base / ("pul_" + tag + "_" + std::to_string(::getpid()) + "_" +
                    std::to_string(counter_++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  static inline int counter_ = 0;
  std::filesystem::path path_;
};

}  // namespace testutil
