#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace aetsep {

using Index = std::int64_t;

// Dense row-major array of 64-bit reals. Shapes are immutable after
// construction; product(shape) always equals values.size().
struct Tensor {
  std::vector<Index> shape;
  std::vector<double> values;

  Tensor() = default;
  explicit Tensor(std::vector<Index> s, double fill = 0.0);
  Tensor(std::vector<Index> s, std::vector<double> v);

  static Tensor scalar(double v);

  Index numel() const { return static_cast<Index>(values.size()); }
  int rank() const { return static_cast<int>(shape.size()); }
  Index dim(int i) const { return shape[static_cast<std::size_t>(i)]; }

  bool same_shape(const Tensor& other) const { return shape == other.shape; }
  bool all_finite() const;

  // 2-D accessors (row-major). Caller guarantees rank() == 2.
  double& at2(Index r, Index c) { return values[static_cast<std::size_t>(r * shape[1] + c)]; }
  double at2(Index r, Index c) const { return values[static_cast<std::size_t>(r * shape[1] + c)]; }

  // 3-D accessors.
  double& at3(Index a, Index b, Index c) {
    return values[static_cast<std::size_t>((a * shape[1] + b) * shape[2] + c)];
  }
  double at3(Index a, Index b, Index c) const {
    return values[static_cast<std::size_t>((a * shape[1] + b) * shape[2] + c)];
  }

  double* data() { return values.data(); }
  const double* data() const { return values.data(); }
};

Index shape_numel(const std::vector<Index>& shape);
std::string shape_str(const std::vector<Index>& shape);

}  // namespace aetsep
