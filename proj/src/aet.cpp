#include "aetsep/aet.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "aetsep/fixed_frontend.hpp"
#include "aetsep/rng.hpp"

namespace aetsep {

void validate(const AetConfig& config) {
  if (config.num_filters < 1) throw std::invalid_argument("AET needs at least one filter");
  if (config.filter_width < 2) throw std::invalid_argument("AET filter width must be >= 2");
  if (config.pool < 1) throw std::invalid_argument("AET pool must be >= 1");
  if (config.smoothing_len < 1) throw std::invalid_argument("AET smoothing length must be >= 1");
}

AetParams init_params(const AetConfig& config, std::uint64_t seed) {
  validate(config);
  Rng rng(seed);
  double bound = std::sqrt(1.0 / static_cast<double>(config.filter_width));
  AetParams p;
  p.analysis = Tensor({config.num_filters, config.filter_width});
  for (auto& v : p.analysis.values) v = rng.uniform(-bound, bound);
  p.smoothing = Tensor({config.num_filters, config.smoothing_len});
  for (auto& v : p.smoothing.values) v = rng.uniform(0.0, 2.0 / static_cast<double>(config.smoothing_len));
  p.smoothing_bias = Tensor({config.num_filters});
  if (!config.tied) {
    p.synthesis = Tensor({config.num_filters, config.filter_width});
    for (auto& v : p.synthesis.values) v = rng.uniform(-bound, bound);
  }
  return p;
}

Index trainable_count(const AetParams& params) {
  return params.analysis.numel() + params.smoothing.numel() + params.smoothing_bias.numel() +
         params.synthesis.numel();
}

AetNodes bind_params(const AetParams& params, const AetConfig& config) {
  AetNodes n;
  n.analysis = parameter(params.analysis);
  n.smoothing = parameter(params.smoothing);
  n.smoothing_bias = parameter(params.smoothing_bias);
  if (!config.tied) {
    if (params.synthesis.numel() == 0)
      throw std::invalid_argument("untied AET requires synthesis filters");
    n.synthesis = parameter(params.synthesis);
  }
  return n;
}

EncodedSignal encode(const std::vector<double>& x, const AetNodes& nodes, const AetConfig& config) {
  validate(config);
  Index len = static_cast<Index>(x.size());
  if (len < config.filter_width)
    throw std::invalid_argument("signal of length " + std::to_string(len) +
                                " is shorter than one filter (" +
                                std::to_string(config.filter_width) + ")");

  auto signal = constant(Tensor({1, len}, std::vector<double>(x)));

  // front-end filters as a C_out x 1 x W bank
  auto filters = make_op(
      Tensor({config.num_filters, 1, config.filter_width}, nodes.analysis->value.values),
      {nodes.analysis}, [parent = nodes.analysis](const GraphNode& self) {
        Tensor g(parent->value.shape, self.grad.values);
        accumulate_grad(*parent, g);
      });

  EncodedSignal enc;
  enc.input_len = len;
  enc.coeffs = conv1d(signal, filters, 1, Padding::kSame);
  auto smoothed = depthwise_conv1d(abs_elem(enc.coeffs), nodes.smoothing, 1, Padding::kSame);
  enc.mag_full = softplus(add_channel_bias(smoothed, nodes.smoothing_bias));
  enc.carrier = div_elem(enc.coeffs, enc.mag_full, config.carrier_eps);
  MaxPoolResult pooled = maxpool1d(enc.mag_full, config.pool);
  enc.mag_pooled = pooled.values;
  enc.pool_indices = std::move(pooled.argmax);
  return enc;
}

NodePtr synthesis_conv1d(const NodePtr& coeffs, const NodePtr& filters, Index out_len) {
  if (coeffs->value.rank() != 2 || filters->value.rank() != 2)
    throw std::invalid_argument("synthesis_conv1d expects K x T coefficients and K x W filters");
  Index k = coeffs->value.dim(0), t = coeffs->value.dim(1);
  Index w = filters->value.dim(1);
  if (filters->value.dim(0) != k)
    throw std::invalid_argument("synthesis_conv1d: " + std::to_string(filters->value.dim(0)) +
                                " filters for " + std::to_string(k) + " coefficient rows");
  Index pad_left = (w - 1) / 2;
  double inv_w = 1.0 / static_cast<double>(w);

  // out[n] = (1/W) sum_k sum_i coeffs[k][n - i + pad] * filters[k][i]:
  // coefficient (k, n) adds basis function k, scaled, at position n.
  Tensor out({1, out_len});
  for (Index row = 0; row < k; ++row) {
    const double* cr = coeffs->value.data() + row * t;
    const double* fr = filters->value.data() + row * w;
    double* yr = out.data();
    for (Index n = 0; n < t; ++n) {
      double cv = cr[n];
      if (cv == 0.0) continue;
      Index base = n - pad_left;
      Index lo = std::max<Index>(0, -base);
      Index hi = std::min<Index>(w, out_len - base);
      for (Index i = lo; i < hi; ++i) yr[base + i] += cv * fr[i];
    }
  }
  for (auto& v : out.values) v *= inv_w;

  NodePtr pc = coeffs, pf = filters;
  return make_op(std::move(out), {coeffs, filters}, [=](const GraphNode& self) {
    const double* g = self.grad.data();
    if (pc->requires_grad) {
      // adjoint of the synthesis sum is the analysis correlation of the
      // output gradient with the same filters
      Tensor gc({k, t});
      for (Index row = 0; row < k; ++row) {
        const double* fr = pf->value.data() + row * w;
        double* cr = gc.data() + row * t;
        for (Index n = 0; n < t; ++n) {
          Index base = n - pad_left;
          Index lo = std::max<Index>(0, -base);
          Index hi = std::min<Index>(w, out_len - base);
          double acc = 0.0;
          for (Index i = lo; i < hi; ++i) acc += g[base + i] * fr[i];
          cr[n] = acc * inv_w;
        }
      }
      accumulate_grad(*pc, gc);
    }
    if (pf->requires_grad) {
      Tensor gf({k, w});
      for (Index row = 0; row < k; ++row) {
        const double* cr = pc->value.data() + row * t;
        double* fr = gf.data() + row * w;
        for (Index n = 0; n < t; ++n) {
          double cv = cr[n];
          if (cv == 0.0) continue;
          Index base = n - pad_left;
          Index lo = std::max<Index>(0, -base);
          Index hi = std::min<Index>(w, out_len - base);
          for (Index i = lo; i < hi; ++i) fr[i] += cv * g[base + i];
        }
      }
      for (auto& v : gf.values) v *= inv_w;
      accumulate_grad(*pf, gf);
    }
  });
}

NodePtr decode(const NodePtr& magnitude_pooled, const EncodedSignal& encoded, const AetNodes& nodes,
               const AetConfig& config, UnpoolPlacement placement) {
  if (!magnitude_pooled->value.same_shape(encoded.mag_pooled->value))
    throw std::invalid_argument("decode: magnitude shape " +
                                shape_str(magnitude_pooled->value.shape) +
                                " does not match encoded geometry " +
                                shape_str(encoded.mag_pooled->value.shape));
  Index t = encoded.coeffs->value.dim(1);
  const std::vector<Index>* idx =
      placement == UnpoolPlacement::kRecordedIndices ? &encoded.pool_indices : nullptr;
  auto unpooled = unpool_zero_insert(magnitude_pooled, config.pool, t, placement, idx);
  auto coeffs_hat = mul_elem(unpooled, encoded.carrier);
  const NodePtr& filters = config.tied ? nodes.analysis : nodes.synthesis;
  if (!filters) throw std::invalid_argument("decode: synthesis filters missing");
  return synthesis_conv1d(coeffs_hat, filters, encoded.input_len);
}

std::vector<BasisSpectrum> inspect_bases(const AetParams& params, Index fft_size) {
  Index k = params.analysis.dim(0), w = params.analysis.dim(1);
  Index bins = fft_size / 2 + 1;
  std::vector<BasisSpectrum> out(static_cast<std::size_t>(k));
  std::vector<double> padded(static_cast<std::size_t>(fft_size));
  std::vector<double> re(static_cast<std::size_t>(bins)), im(static_cast<std::size_t>(bins));
  for (Index row = 0; row < k; ++row) {
    BasisSpectrum& b = out[static_cast<std::size_t>(row)];
    b.filter_index = row;
    b.filter.assign(params.analysis.data() + row * w, params.analysis.data() + (row + 1) * w);
    std::fill(padded.begin(), padded.end(), 0.0);
    std::copy(b.filter.begin(), b.filter.end(), padded.begin());
    rdft(padded.data(), fft_size, re.data(), im.data());
    b.spectrum.resize(static_cast<std::size_t>(bins));
    double peak = 0.0;
    for (Index i = 0; i < bins; ++i) {
      double mag = std::hypot(re[static_cast<std::size_t>(i)], im[static_cast<std::size_t>(i)]);
      b.spectrum[static_cast<std::size_t>(i)] = mag;
      if (mag > peak) {
        peak = mag;
        b.dominant_bin = i;
      }
    }
    if (peak > 0.0)
      for (auto& v : b.spectrum) v /= peak;
  }
  std::stable_sort(out.begin(), out.end(), [](const BasisSpectrum& a, const BasisSpectrum& b) {
    if (a.dominant_bin != b.dominant_bin) return a.dominant_bin < b.dominant_bin;
    return a.filter_index < b.filter_index;
  });
  return out;
}

}  // namespace aetsep
