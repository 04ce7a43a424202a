#include "aetsep/tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace aetsep {

Index shape_numel(const std::vector<Index>& shape) {
  Index n = 1;
  for (Index d : shape) {
    if (d < 0) throw std::invalid_argument("negative dimension in shape " + shape_str(shape));
    n *= d;
  }
  return n;
}

std::string shape_str(const std::vector<Index>& shape) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ")";
  return os.str();
}

Tensor::Tensor(std::vector<Index> s, double fill)
    : shape(std::move(s)), values(static_cast<std::size_t>(shape_numel(shape)), fill) {}

Tensor::Tensor(std::vector<Index> s, std::vector<double> v) : shape(std::move(s)), values(std::move(v)) {
  if (shape_numel(shape) != static_cast<Index>(values.size()))
    throw std::invalid_argument("tensor shape " + shape_str(shape) + " does not match value count " +
                                std::to_string(values.size()));
}

Tensor Tensor::scalar(double v) { return Tensor({1}, std::vector<double>{v}); }

bool Tensor::all_finite() const {
  for (double v : values)
    if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace aetsep
