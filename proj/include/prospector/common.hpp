#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace prospector {

/// Integer grid cell. `x` is the column, `y` the row; the cell covers
/// [x, x+1) x [y, y+1) in continuous grid coordinates.
struct Cell {
  int x = 0;
  int y = 0;

  friend bool operator==(const Cell&, const Cell&) = default;
  friend auto operator<=>(const Cell&, const Cell&) = default;
};

struct GridShape {
  int nx = 32;
  int ny = 32;

  int size() const { return nx * ny; }
  bool contains(Cell c) const { return c.x >= 0 && c.y >= 0 && c.x < nx && c.y < ny; }
  int index(Cell c) const { return c.y * nx + c.x; }
  Cell cell(int idx) const { return {idx % nx, idx / nx}; }

  friend bool operator==(const GridShape&, const GridShape&) = default;
};

/// Row-major 2D grid of values.
template <typename T>
class Grid {
 public:
  Grid() = default;
  explicit Grid(GridShape shape, T fill = T{}) : shape_(shape), data_(shape.size(), fill) {}

  GridShape shape() const { return shape_; }
  T& operator[](Cell c) { return data_[shape_.index(c)]; }
  const T& operator[](Cell c) const { return data_[shape_.index(c)]; }
  T& at(int idx) { return data_[idx]; }
  const T& at(int idx) const { return data_[idx]; }
  std::vector<T>& values() { return data_; }
  const std::vector<T>& values() const { return data_; }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  GridShape shape_{};
  std::vector<T> data_;
};

/// Raised when a linear system cannot be factorized.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Deterministic random stream. Child streams are derived by key so that
/// parallel or reordered work draws identical numbers.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed = 0) : seed_(seed), engine_(mix(seed)) {}

  std::uint64_t seed() const { return seed_; }

  RngStream derive(std::uint64_t key) const { return RngStream(mix(seed_ ^ mix(key + 0x9e3779b97f4a7c15ULL))); }

  double normal() { return normal_(engine_); }
  double normal(double mean, double std) { return mean + std * normal_(engine_); }
  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }
  std::size_t index(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
  }
  std::uint64_t bits() { return engine_(); }
  std::mt19937_64& engine() { return engine_; }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace prospector
