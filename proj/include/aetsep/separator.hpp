#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "aetsep/aet.hpp"
#include "aetsep/fixed_frontend.hpp"
#include "aetsep/graph.hpp"

namespace aetsep {

enum class FrontendKind { kStft, kAet, kAetOrthogonal };

std::string to_string(FrontendKind kind);
FrontendKind frontend_from_string(const std::string& name);

// Three hidden dense layers with softplus plus a softplus output projection
// back to the coefficient dimension, applied frame-wise to magnitude frames.
struct SeparatorParams {
  Index input_dim = 0;
  Index hidden = 512;
  std::vector<Tensor> weights;  // [in x h, h x h, h x h, h x in]
  std::vector<Tensor> biases;   // [h, h, h, in]
};

SeparatorParams init_separator(Index input_dim, Index hidden, std::uint64_t seed);
Index trainable_count(const SeparatorParams& params);

struct StftGeometry {
  Index window = 1024;
  Index hop = 16;
};

struct ModelGeometry {
  AetConfig aet;           // used by the learned front-ends
  StftGeometry stft;       // used by the fixed front-end
  Index hidden = 512;
  double sample_rate = 16000.0;
};

struct SeparationModel {
  FrontendKind frontend = FrontendKind::kAet;
  ModelGeometry geometry;
  AetParams aet_params;        // empty for the STFT front-end
  SeparatorParams separator;

  Index coeff_dim() const;     // K (AET) or N/2 + 1 (STFT)
};

// Constructs and deterministically initializes all parameters. The
// orthogonal variant forces tied synthesis filters; the STFT variant has no
// trainable front-end at all.
SeparationModel build_model(FrontendKind kind, const ModelGeometry& geometry, std::uint64_t seed);

Index trainable_count(const SeparationModel& model);

struct ForwardResult {
  NodePtr estimate;  // 1 x len(mixture)
  std::vector<std::pair<std::string, NodePtr>> params;  // stable name -> leaf order
};

// Runs the full separation graph: front-end analysis, frame-wise separator on
// the magnitude representation, synthesis with the mixture carrier/phase.
// Dropout masks the inputs of each hidden layer with inverted scaling and is
// deterministic per seed; pass training=false for inference.
ForwardResult separate_forward(const SeparationModel& model, const std::vector<double>& mixture,
                               double dropout_rate, bool training, std::uint64_t seed);

// Convenience inference path returning the waveform.
std::vector<double> separate(const SeparationModel& model, const std::vector<double>& mixture);

// Frame-wise separator application on raw magnitude frames (rows), inference
// mode. Exposed for inspection and direct testing.
Tensor separator_apply(const SeparatorParams& params, const Tensor& frames /*B x K*/);

// Named references to every trainable tensor, in the same order as the
// parameter nodes produced by separate_forward.
std::vector<std::pair<std::string, Tensor*>> named_parameters(SeparationModel& model);

}  // namespace aetsep
