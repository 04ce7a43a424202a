#pragma once

#include <vector>

#include "aetsep/graph.hpp"

namespace aetsep {

enum class LossKind { kMse, kSdr };

// (1/T) sum (x_t - y_t)^2 against a fixed reference waveform.
NodePtr mse_loss(const NodePtr& estimate, const std::vector<double>& reference);

// <x,x> / (<x,y>^2 + eps); minimizing this maximizes the signal-to-distortion
// ratio. eps guards the orthogonal case so early training stays finite.
NodePtr sdr_loss(const NodePtr& estimate, const std::vector<double>& reference,
                 double eps = 1e-12);

NodePtr make_loss(LossKind kind, const NodePtr& estimate, const std::vector<double>& reference);

// 10 log10( <xy>^2 / (<yy><xx> - <xy>^2) ), capped at +/-300 dB. Scale
// invariant in the estimate.
double sdr_db(const std::vector<double>& estimate, const std::vector<double>& reference);

double mse_value(const std::vector<double>& estimate, const std::vector<double>& reference);

}  // namespace aetsep
