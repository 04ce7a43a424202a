#include "aetsep/separator.hpp"

#include <cmath>
#include <stdexcept>

#include "aetsep/rng.hpp"

namespace aetsep {

std::string to_string(FrontendKind kind) {
  switch (kind) {
    case FrontendKind::kStft: return "stft";
    case FrontendKind::kAet: return "aet";
    case FrontendKind::kAetOrthogonal: return "aet_orthogonal";
  }
  return "unknown";
}

FrontendKind frontend_from_string(const std::string& name) {
  if (name == "stft") return FrontendKind::kStft;
  if (name == "aet") return FrontendKind::kAet;
  if (name == "aet_orthogonal") return FrontendKind::kAetOrthogonal;
  throw std::invalid_argument("unknown front-end kind: " + name);
}

SeparatorParams init_separator(Index input_dim, Index hidden, std::uint64_t seed) {
  if (input_dim < 1 || hidden < 1)
    throw std::invalid_argument("separator dimensions must be positive");
  Rng rng(seed);
  SeparatorParams p;
  p.input_dim = input_dim;
  p.hidden = hidden;
  std::vector<std::pair<Index, Index>> dims = {
      {input_dim, hidden}, {hidden, hidden}, {hidden, hidden}, {hidden, input_dim}};
  for (auto [in, out] : dims) {
    Tensor w({in, out});
    double bound = std::sqrt(1.0 / static_cast<double>(in));
    for (auto& v : w.values) v = rng.uniform(-bound, bound);
    p.weights.push_back(std::move(w));
    p.biases.emplace_back(std::vector<Index>{out});
  }
  return p;
}

Index trainable_count(const SeparatorParams& params) {
  Index n = 0;
  for (const auto& w : params.weights) n += w.numel();
  for (const auto& b : params.biases) n += b.numel();
  return n;
}

Index SeparationModel::coeff_dim() const {
  return frontend == FrontendKind::kStft ? geometry.stft.window / 2 + 1
                                         : geometry.aet.num_filters;
}

SeparationModel build_model(FrontendKind kind, const ModelGeometry& geometry, std::uint64_t seed) {
  SeparationModel model;
  model.frontend = kind;
  model.geometry = geometry;
  model.geometry.aet.tied = kind == FrontendKind::kAetOrthogonal;
  if (kind != FrontendKind::kStft) {
    validate(model.geometry.aet);
    model.aet_params = init_params(model.geometry.aet, seed);
  } else if (model.geometry.stft.window % 2 != 0 || model.geometry.stft.hop < 1) {
    throw std::invalid_argument("STFT geometry needs an even window and positive hop");
  }
  model.separator = init_separator(model.coeff_dim(), geometry.hidden, seed ^ 0x5e9a7a115ULL);
  return model;
}

Index trainable_count(const SeparationModel& model) {
  Index n = trainable_count(model.separator);
  if (model.frontend != FrontendKind::kStft) n += trainable_count(model.aet_params);
  return n;
}

namespace {

struct SeparatorNodes {
  std::vector<NodePtr> weights;
  std::vector<NodePtr> biases;
};

SeparatorNodes bind_separator(const SeparatorParams& params,
                              std::vector<std::pair<std::string, NodePtr>>& named) {
  SeparatorNodes nodes;
  for (std::size_t i = 0; i < params.weights.size(); ++i) {
    nodes.weights.push_back(parameter(params.weights[i]));
    nodes.biases.push_back(parameter(params.biases[i]));
    named.emplace_back("sep.w" + std::to_string(i), nodes.weights.back());
    named.emplace_back("sep.b" + std::to_string(i), nodes.biases.back());
  }
  return nodes;
}

NodePtr dropout_mask(const NodePtr& input, double rate, Rng& rng) {
  Tensor mask(input->value.shape);
  double keep = 1.0 - rate;
  for (auto& v : mask.values) v = rng.bernoulli(keep) ? 1.0 / keep : 0.0;
  return mul_elem(input, constant(std::move(mask)));
}

// frames: B x K magnitude rows through three hidden layers plus the output
// projection; softplus everywhere keeps predicted magnitudes nonnegative.
NodePtr apply_separator(NodePtr frames, const SeparatorNodes& nodes, double dropout_rate,
                        bool training, Rng& rng) {
  NodePtr x = std::move(frames);
  for (std::size_t layer = 0; layer + 1 < nodes.weights.size(); ++layer) {
    if (training && dropout_rate > 0.0) x = dropout_mask(x, dropout_rate, rng);
    x = softplus(dense(x, nodes.weights[layer], nodes.biases[layer]));
  }
  return softplus(dense(x, nodes.weights.back(), nodes.biases.back()));
}

}  // namespace

ForwardResult separate_forward(const SeparationModel& model, const std::vector<double>& mixture,
                               double dropout_rate, bool training, std::uint64_t seed) {
  if (mixture.empty()) throw std::invalid_argument("separate_forward: empty mixture");
  if (dropout_rate < 0.0 || dropout_rate >= 1.0)
    throw std::invalid_argument("dropout rate must lie in [0, 1)");
  if (model.separator.input_dim != model.coeff_dim())
    throw std::invalid_argument("separator input size " + std::to_string(model.separator.input_dim) +
                                " does not match front-end coefficient count " +
                                std::to_string(model.coeff_dim()));

  Rng rng(seed);
  ForwardResult result;

  if (model.frontend == FrontendKind::kStft) {
    const StftGeometry& geo = model.geometry.stft;
    StftFrames frames = stft(mixture, geo.window, geo.hop, WindowKind::kHann);
    Index k = frames.re.dim(0), t = frames.re.dim(1);

    // magnitude input and unit-modulus mixture phase are constants: no
    // gradient flows into the analysis side
    Tensor mag({k, t}), phase_re({k, t}), phase_im({k, t});
    for (Index i = 0; i < k * t; ++i) {
      double re = frames.re.values[static_cast<std::size_t>(i)];
      double im = frames.im.values[static_cast<std::size_t>(i)];
      double m = std::hypot(re, im);
      mag.values[static_cast<std::size_t>(i)] = m;
      double denom = std::max(m, 1e-12);
      phase_re.values[static_cast<std::size_t>(i)] = re / denom;
      phase_im.values[static_cast<std::size_t>(i)] = im / denom;
    }

    SeparatorNodes sep = bind_separator(model.separator, result.params);
    NodePtr frames_in = transpose(constant(std::move(mag)));  // T x K
    NodePtr mag_hat = transpose(apply_separator(frames_in, sep, dropout_rate, training, rng));
    NodePtr est_re = mul_elem(mag_hat, constant(std::move(phase_re)));
    NodePtr est_im = mul_elem(mag_hat, constant(std::move(phase_im)));
    result.estimate = istft_node(est_re, est_im, geo.window, geo.hop, WindowKind::kHann,
                                 static_cast<Index>(mixture.size()));
    return result;
  }

  const AetConfig& cfg = model.geometry.aet;
  AetNodes aet = bind_params(model.aet_params, cfg);
  result.params.emplace_back("aet.analysis", aet.analysis);
  result.params.emplace_back("aet.smoothing", aet.smoothing);
  result.params.emplace_back("aet.smoothing_bias", aet.smoothing_bias);
  if (!cfg.tied) result.params.emplace_back("aet.synthesis", aet.synthesis);
  SeparatorNodes sep = bind_separator(model.separator, result.params);

  EncodedSignal enc = encode(mixture, aet, cfg);
  NodePtr frames_in = transpose(enc.mag_pooled);  // pooled frames as rows
  NodePtr mag_hat = transpose(apply_separator(frames_in, sep, dropout_rate, training, rng));
  result.estimate = decode(mag_hat, enc, aet, cfg);
  return result;
}

std::vector<double> separate(const SeparationModel& model, const std::vector<double>& mixture) {
  ForwardResult fwd = separate_forward(model, mixture, 0.0, false, 0);
  return fwd.estimate->value.values;
}

Tensor separator_apply(const SeparatorParams& params, const Tensor& frames) {
  std::vector<std::pair<std::string, NodePtr>> named;
  SeparatorNodes nodes = bind_separator(params, named);
  Rng rng(0);
  return apply_separator(constant(frames), nodes, 0.0, false, rng)->value;
}

std::vector<std::pair<std::string, Tensor*>> named_parameters(SeparationModel& model) {
  std::vector<std::pair<std::string, Tensor*>> out;
  if (model.frontend != FrontendKind::kStft) {
    out.emplace_back("aet.analysis", &model.aet_params.analysis);
    out.emplace_back("aet.smoothing", &model.aet_params.smoothing);
    out.emplace_back("aet.smoothing_bias", &model.aet_params.smoothing_bias);
    if (!model.geometry.aet.tied) out.emplace_back("aet.synthesis", &model.aet_params.synthesis);
  }
  for (std::size_t i = 0; i < model.separator.weights.size(); ++i) {
    out.emplace_back("sep.w" + std::to_string(i), &model.separator.weights[i]);
    out.emplace_back("sep.b" + std::to_string(i), &model.separator.biases[i]);
  }
  return out;
}

}  // namespace aetsep
