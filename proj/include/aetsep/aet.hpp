#pragma once

#include <cstdint>
#include <vector>

#include "aetsep/graph.hpp"
#include "aetsep/tensor.hpp"

namespace aetsep {

struct AetConfig {
  Index num_filters = 1024;    // K
  Index filter_width = 1024;   // W, samples
  Index pool = 16;             // h, samples
  Index smoothing_len = 5;     // L, frames
  bool tied = false;           // orthogonal variant: synthesis reuses analysis filters
  double carrier_eps = 1e-8;
};

void validate(const AetConfig& config);

struct AetParams {
  Tensor analysis;        // K x W
  Tensor smoothing;       // K x L (depthwise, along time)
  Tensor smoothing_bias;  // K
  Tensor synthesis;       // K x W; empty when tied
};

// Uniform init: filters in [-sqrt(1/W), sqrt(1/W)], smoothing in [0, 2/L],
// bias zero. Deterministic per seed.
AetParams init_params(const AetConfig& config, std::uint64_t seed);

Index trainable_count(const AetParams& params);

// Parameter leaves for one forward/backward graph. synthesis is null when the
// config is tied.
struct AetNodes {
  NodePtr analysis;
  NodePtr smoothing;
  NodePtr smoothing_bias;
  NodePtr synthesis;
};

AetNodes bind_params(const AetParams& params, const AetConfig& config);

struct EncodedSignal {
  NodePtr coeffs;      // X: K x T, unit-hop front-end output
  NodePtr mag_full;    // M: K x T, strictly positive
  NodePtr carrier;     // P: K x T, X = M .* P where M > eps
  NodePtr mag_pooled;  // K x ceil(T / pool)
  std::vector<Index> pool_indices;
  Index input_len = 0;
};

// Analysis encoder: front-end conv (same padding, unit stride), modulus,
// depthwise smoothing conv + bias, softplus, max pooling.
EncodedSignal encode(const std::vector<double>& x, const AetNodes& nodes, const AetConfig& config);

// Filterbank-summation synthesis: zero-insert unpooling, carrier multiply,
// then every coefficient adds a shifted copy of its basis function. Output is
// scaled by 1/W so a complete orthonormal filterbank gives unit gain.
NodePtr decode(const NodePtr& magnitude_pooled, const EncodedSignal& encoded, const AetNodes& nodes,
               const AetConfig& config,
               UnpoolPlacement placement = UnpoolPlacement::kWindowStart);

// The synthesis convolution on its own (adjoint of the same-padded analysis
// correlation), exposed for reuse and direct testing.
NodePtr synthesis_conv1d(const NodePtr& coeffs /*K x T*/, const NodePtr& filters /*K x W*/,
                         Index out_len);

struct BasisSpectrum {
  Index filter_index = 0;      // row in the analysis matrix
  Index dominant_bin = 0;      // argmax of the magnitude spectrum
  std::vector<double> filter;  // W taps
  std::vector<double> spectrum;  // fft_size/2 + 1 bins, peak-normalized
};

// Filters sorted by dominant frequency (ties by filter index); spectra are
// zero-padded FFTs normalized to unit peak.
std::vector<BasisSpectrum> inspect_bases(const AetParams& params, Index fft_size = 1024);

}  // namespace aetsep
