#include "aetsep/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace aetsep {

namespace {

void check_lengths(const NodePtr& estimate, const std::vector<double>& reference) {
  if (estimate->value.numel() != static_cast<Index>(reference.size()))
    throw std::invalid_argument("loss length mismatch: estimate has " +
                                std::to_string(estimate->value.numel()) + " samples, reference " +
                                std::to_string(reference.size()));
}

NodePtr as_reference_node(const NodePtr& estimate, const std::vector<double>& reference) {
  return constant(Tensor(estimate->value.shape, std::vector<double>(reference)));
}

}  // namespace

NodePtr mse_loss(const NodePtr& estimate, const std::vector<double>& reference) {
  check_lengths(estimate, reference);
  auto diff = sub_elem(estimate, as_reference_node(estimate, reference));
  return scale(reduce_dot(diff, diff), 1.0 / static_cast<double>(reference.size()));
}

NodePtr sdr_loss(const NodePtr& estimate, const std::vector<double>& reference, double eps) {
  check_lengths(estimate, reference);
  double yy = 0.0;
  for (double v : reference) yy += v * v;
  if (yy <= 0.0) throw std::invalid_argument("sdr_loss: reference has zero energy");
  auto y = as_reference_node(estimate, reference);
  auto xx = reduce_dot(estimate, estimate);
  auto xy = reduce_dot(estimate, y);
  auto denom = add_const(mul_elem(xy, xy), eps);
  // denom >= eps > 0, so pass a clamp threshold far below it
  return div_elem(xx, denom, eps * 1e-6);
}

NodePtr make_loss(LossKind kind, const NodePtr& estimate, const std::vector<double>& reference) {
  return kind == LossKind::kMse ? mse_loss(estimate, reference) : sdr_loss(estimate, reference);
}

double sdr_db(const std::vector<double>& estimate, const std::vector<double>& reference) {
  if (estimate.size() != reference.size())
    throw std::invalid_argument("sdr_db length mismatch");
  double xx = 0.0, yy = 0.0, xy = 0.0;
  for (std::size_t i = 0; i < estimate.size(); ++i) {
    xx += estimate[i] * estimate[i];
    yy += reference[i] * reference[i];
    xy += estimate[i] * reference[i];
  }
  if (xx <= 0.0 || yy <= 0.0) throw std::invalid_argument("sdr_db: zero signal");
  double denom = yy * xx - xy * xy;
  if (denom <= 1e-24) return 300.0;
  double ratio = xy * xy / denom;
  double db = 10.0 * std::log10(std::max(ratio, 0.0) + 1e-300);
  return std::min(300.0, std::max(-300.0, db));
}

double mse_value(const std::vector<double>& estimate, const std::vector<double>& reference) {
  if (estimate.size() != reference.size()) throw std::invalid_argument("mse length mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < estimate.size(); ++i) {
    double d = estimate[i] - reference[i];
    acc += d * d;
  }
  return acc / static_cast<double>(estimate.size());
}

}  // namespace aetsep
