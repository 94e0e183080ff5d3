#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace pul {

// Dense row-major matrix. Feature tables are float (matching the on-disk
// format), all numerics run in double.
template <class T>
struct Mat {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<T> data;

  Mat() = default;
  Mat(std::size_t r, std::size_t c, T fill = T{}) : rows(r), cols(c), data(r * c, fill) {}

  std::span<const T> row(std::size_t i) const { return {data.data() + i * cols, cols}; }
  std::span<T> row(std::size_t i) { return {data.data() + i * cols, cols}; }

  T& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  const T& at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  bool operator==(const Mat&) const = default;
};

using Matrix = Mat<double>;
using FloatMatrix = Mat<float>;

double dot(std::span<const double> a, std::span<const double> b);
double squared_distance(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> a);

}  // namespace pul
