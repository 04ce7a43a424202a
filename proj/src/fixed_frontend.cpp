#include "aetsep/fixed_frontend.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace aetsep {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

bool is_pow2(Index n) { return n > 0 && (n & (n - 1)) == 0; }

}  // namespace

std::vector<double> make_window(WindowKind kind, Index length) {
  if (length < 1) throw std::invalid_argument("window length must be >= 1");
  std::vector<double> w(static_cast<std::size_t>(length), 1.0);
  if (kind == WindowKind::kHann) {
    for (Index t = 0; t < length; ++t)
      w[static_cast<std::size_t>(t)] = 0.5 - 0.5 * std::cos(kTwoPi * static_cast<double>(t) /
                                                            static_cast<double>(length));
  }
  return w;
}

BasisMatrix dct2_basis(Index n, Index k) {
  if (k < 1 || k > n) throw std::invalid_argument("dct2_basis requires 1 <= K <= N");
  BasisMatrix b;
  b.kind = TransformKind::kDct2;
  b.basis = Tensor({k, n});
  double c0 = std::sqrt(1.0 / static_cast<double>(n));
  double ck = std::sqrt(2.0 / static_cast<double>(n));
  for (Index row = 0; row < k; ++row) {
    double scale = row == 0 ? c0 : ck;
    for (Index t = 0; t < n; ++t)
      b.basis.at2(row, t) = scale * std::cos(M_PI * static_cast<double>(row) *
                                             (2.0 * static_cast<double>(t) + 1.0) /
                                             (2.0 * static_cast<double>(n)));
  }
  return b;
}

Index frame_count(Index signal_len, Index window_len, Index hop) {
  if (signal_len < window_len)
    throw std::invalid_argument("signal of length " + std::to_string(signal_len) +
                                " is shorter than the window (" + std::to_string(window_len) + ")");
  if (hop < 1) throw std::invalid_argument("hop must be >= 1");
  return (signal_len - window_len + hop - 1) / hop + 1;
}

Tensor short_time_transform(const std::vector<double>& x, const BasisMatrix& basis,
                            WindowKind window, Index hop) {
  if (x.empty()) throw std::invalid_argument("short_time_transform: empty signal");
  Index k = basis.basis.dim(0), n = basis.basis.dim(1);
  Index len = static_cast<Index>(x.size());
  Index frames = frame_count(len, n, hop);
  std::vector<double> w = make_window(window, n);

  Tensor out({k, frames});
  std::vector<double> frame(static_cast<std::size_t>(n));
  for (Index f = 0; f < frames; ++f) {
    Index start = f * hop;
    for (Index t = 0; t < n; ++t) {
      Index src = start + t;
      frame[static_cast<std::size_t>(t)] =
          src < len ? x[static_cast<std::size_t>(src)] * w[static_cast<std::size_t>(t)] : 0.0;
    }
    for (Index row = 0; row < k; ++row) {
      const double* br = basis.basis.data() + row * n;
      double acc = 0.0;
      for (Index t = 0; t < n; ++t) acc += frame[static_cast<std::size_t>(t)] * br[t];
      out.at2(row, f) = acc;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// FFT
// ---------------------------------------------------------------------------

void fft_complex(std::vector<double>& re, std::vector<double>& im, bool inverse) {
  const std::size_t n = re.size();
  if (n != im.size()) throw std::invalid_argument("fft: re/im size mismatch");
  if (n == 0 || (n & (n - 1)) != 0) throw std::invalid_argument("fft length must be a power of two");

  // bit-reversal permutation
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) {
      std::swap(re[i], re[j]);
      std::swap(im[i], im[j]);
    }
  }

  for (std::size_t len = 2; len <= n; len <<= 1) {
    double ang = kTwoPi / static_cast<double>(len) * (inverse ? 1.0 : -1.0);
    double wr = std::cos(ang), wi = std::sin(ang);
    for (std::size_t i = 0; i < n; i += len) {
      double cr = 1.0, ci = 0.0;
      for (std::size_t j = 0; j < len / 2; ++j) {
        std::size_t a = i + j, b = i + j + len / 2;
        double tr = re[b] * cr - im[b] * ci;
        double ti = re[b] * ci + im[b] * cr;
        re[b] = re[a] - tr;
        im[b] = im[a] - ti;
        re[a] += tr;
        im[a] += ti;
        double ncr = cr * wr - ci * wi;
        ci = cr * wi + ci * wr;
        cr = ncr;
      }
    }
  }

  if (inverse) {
    double inv = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      re[i] *= inv;
      im[i] *= inv;
    }
  }
}

void rdft(const double* frame, Index n, double* out_re, double* out_im) {
  Index k = n / 2 + 1;
  if (is_pow2(n)) {
    std::vector<double> re(frame, frame + n), im(static_cast<std::size_t>(n), 0.0);
    fft_complex(re, im, false);
    for (Index i = 0; i < k; ++i) {
      out_re[i] = re[static_cast<std::size_t>(i)];
      out_im[i] = im[static_cast<std::size_t>(i)];
    }
    return;
  }
  for (Index bin = 0; bin < k; ++bin) {
    double sr = 0.0, si = 0.0;
    for (Index t = 0; t < n; ++t) {
      double ang = kTwoPi * static_cast<double>(bin) * static_cast<double>(t) / static_cast<double>(n);
      sr += frame[t] * std::cos(ang);
      si -= frame[t] * std::sin(ang);
    }
    out_re[bin] = sr;
    out_im[bin] = si;
  }
}

void irdft(const double* re, const double* im, Index n, double* out_frame) {
  Index k = n / 2 + 1;
  if (is_pow2(n)) {
    std::vector<double> fr(static_cast<std::size_t>(n)), fi(static_cast<std::size_t>(n));
    fr[0] = re[0];
    fi[0] = 0.0;  // DC and Nyquist imaginary parts are identically zero
    fr[static_cast<std::size_t>(n / 2)] = re[k - 1];
    fi[static_cast<std::size_t>(n / 2)] = 0.0;
    for (Index bin = 1; bin < n / 2; ++bin) {
      fr[static_cast<std::size_t>(bin)] = re[bin];
      fi[static_cast<std::size_t>(bin)] = im[bin];
      fr[static_cast<std::size_t>(n - bin)] = re[bin];
      fi[static_cast<std::size_t>(n - bin)] = -im[bin];
    }
    fft_complex(fr, fi, true);
    for (Index t = 0; t < n; ++t) out_frame[t] = fr[static_cast<std::size_t>(t)];
    return;
  }
  for (Index t = 0; t < n; ++t) {
    double acc = re[0];
    for (Index bin = 1; bin < k; ++bin) {
      double ang = kTwoPi * static_cast<double>(bin) * static_cast<double>(t) / static_cast<double>(n);
      double weight = (bin == n - bin || bin == 0) ? 1.0 : 2.0;
      if (2 * bin == n) weight = 1.0;
      acc += weight * (re[bin] * std::cos(ang) - im[bin] * std::sin(ang));
    }
    out_frame[t] = acc / static_cast<double>(n);
  }
}

// ---------------------------------------------------------------------------
// STFT / ISTFT
// ---------------------------------------------------------------------------

StftFrames stft(const std::vector<double>& x, Index n, Index hop, WindowKind window) {
  if (n % 2 != 0) throw std::invalid_argument("stft window size must be even");
  Index len = static_cast<Index>(x.size());
  Index frames = frame_count(len, n, hop);
  Index k = n / 2 + 1;
  std::vector<double> w = make_window(window, n);

  StftFrames out;
  out.re = Tensor({k, frames});
  out.im = Tensor({k, frames});
  out.window_len = n;
  out.hop = hop;
  out.window = window;

  std::vector<double> frame(static_cast<std::size_t>(n));
  std::vector<double> fre(static_cast<std::size_t>(k)), fim(static_cast<std::size_t>(k));
  for (Index f = 0; f < frames; ++f) {
    Index start = f * hop;
    for (Index t = 0; t < n; ++t) {
      Index src = start + t;
      frame[static_cast<std::size_t>(t)] =
          src < len ? x[static_cast<std::size_t>(src)] * w[static_cast<std::size_t>(t)] : 0.0;
    }
    rdft(frame.data(), n, fre.data(), fim.data());
    for (Index bin = 0; bin < k; ++bin) {
      out.re.at2(bin, f) = fre[static_cast<std::size_t>(bin)];
      out.im.at2(bin, f) = fim[static_cast<std::size_t>(bin)];
    }
  }
  return out;
}

namespace {

// Per-sample sum of squared synthesis windows; the WOLA denominator.
std::vector<double> overlap_norm(Index frames, Index n, Index hop, const std::vector<double>& w) {
  Index natural = (frames - 1) * hop + n;
  std::vector<double> norm(static_cast<std::size_t>(natural), 0.0);
  for (Index f = 0; f < frames; ++f)
    for (Index t = 0; t < n; ++t)
      norm[static_cast<std::size_t>(f * hop + t)] += w[static_cast<std::size_t>(t)] * w[static_cast<std::size_t>(t)];
  return norm;
}

constexpr double kNormFloor = 1e-12;

}  // namespace

std::vector<double> istft(const StftFrames& frames, Index target_len) {
  Index k = frames.re.dim(0), count = frames.re.dim(1);
  if (!frames.re.same_shape(frames.im))
    throw std::invalid_argument("istft: re/im shape mismatch");
  Index n = frames.window_len;
  if (k != n / 2 + 1)
    throw std::invalid_argument("istft: coefficient rows " + std::to_string(k) +
                                " do not match window size " + std::to_string(n));
  std::vector<double> w = make_window(frames.window, n);
  Index natural = (count - 1) * frames.hop + n;
  std::vector<double> acc(static_cast<std::size_t>(natural), 0.0);
  std::vector<double> norm = overlap_norm(count, n, frames.hop, w);

  std::vector<double> fre(static_cast<std::size_t>(k)), fim(static_cast<std::size_t>(k));
  std::vector<double> frame(static_cast<std::size_t>(n));
  for (Index f = 0; f < count; ++f) {
    for (Index bin = 0; bin < k; ++bin) {
      fre[static_cast<std::size_t>(bin)] = frames.re.at2(bin, f);
      fim[static_cast<std::size_t>(bin)] = frames.im.at2(bin, f);
    }
    irdft(fre.data(), fim.data(), n, frame.data());
    for (Index t = 0; t < n; ++t)
      acc[static_cast<std::size_t>(f * frames.hop + t)] += frame[static_cast<std::size_t>(t)] * w[static_cast<std::size_t>(t)];
  }
  for (Index t = 0; t < natural; ++t)
    acc[static_cast<std::size_t>(t)] /= std::max(norm[static_cast<std::size_t>(t)], kNormFloor);

  if (target_len < 0) return acc;
  acc.resize(static_cast<std::size_t>(target_len), 0.0);
  return acc;
}

NodePtr istft_node(const NodePtr& re, const NodePtr& im, Index n, Index hop, WindowKind window,
                   Index target_len) {
  if (!re->value.same_shape(im->value))
    throw std::invalid_argument("istft_node: re/im shape mismatch");

  StftFrames frames;
  frames.re = re->value;
  frames.im = im->value;
  frames.window_len = n;
  frames.hop = hop;
  frames.window = window;
  std::vector<double> wave = istft(frames, target_len);

  Index k = re->value.dim(0), count = re->value.dim(1);
  Tensor value({1, target_len}, std::move(wave));

  NodePtr pre = re, pim = im;
  return make_op(std::move(value), {re, im}, [=](const GraphNode& self) {
    // Adjoint of the linear map coeffs -> waveform: undo the normalization,
    // gather windowed frames, then apply the adjoint of the inverse real DFT
    // (a forward real DFT with the conjugate-symmetry weights folded in).
    std::vector<double> w = make_window(window, n);
    Index natural = (count - 1) * hop + n;
    std::vector<double> norm = overlap_norm(count, n, hop, w);
    std::vector<double> u(static_cast<std::size_t>(natural), 0.0);
    Index copy = std::min(natural, target_len);
    for (Index t = 0; t < copy; ++t)
      u[static_cast<std::size_t>(t)] = self.grad.values[static_cast<std::size_t>(t)] /
                                       std::max(norm[static_cast<std::size_t>(t)], kNormFloor);

    Tensor gre({k, count});
    Tensor gim({k, count});
    std::vector<double> frame(static_cast<std::size_t>(n));
    std::vector<double> fre(static_cast<std::size_t>(k)), fim(static_cast<std::size_t>(k));
    for (Index f = 0; f < count; ++f) {
      for (Index t = 0; t < n; ++t)
        frame[static_cast<std::size_t>(t)] =
            u[static_cast<std::size_t>(f * hop + t)] * w[static_cast<std::size_t>(t)];
      rdft(frame.data(), n, fre.data(), fim.data());
      double invn = 1.0 / static_cast<double>(n);
      for (Index bin = 0; bin < k; ++bin) {
        double cr = (bin == 0 || 2 * bin == n) ? 1.0 : 2.0;
        gre.at2(bin, f) = cr * invn * fre[static_cast<std::size_t>(bin)];
        // DC and Nyquist imaginary parts never reach the output
        gim.at2(bin, f) = (bin == 0 || 2 * bin == n) ? 0.0 : 2.0 * invn * fim[static_cast<std::size_t>(bin)];
      }
    }
    if (pre->requires_grad) accumulate_grad(*pre, gre);
    if (pim->requires_grad) accumulate_grad(*pim, gim);
  });
}

// ---------------------------------------------------------------------------
// Smoothing / demodulation
// ---------------------------------------------------------------------------

MagPhase smooth_demodulate(const Tensor& coeffs, Index smoothing_len, double eps) {
  if (coeffs.rank() != 2) throw std::invalid_argument("smooth_demodulate expects a K x T matrix");
  Index k = coeffs.dim(0), t = coeffs.dim(1);
  if (smoothing_len < 1) throw std::invalid_argument("smoothing length must be >= 1");
  if (smoothing_len > t)
    throw std::invalid_argument("smoothing length " + std::to_string(smoothing_len) +
                                " exceeds frame count " + std::to_string(t));

  Index pad_left = (smoothing_len - 1) / 2;
  double inv = 1.0 / static_cast<double>(smoothing_len);

  MagPhase out;
  out.magnitude = Tensor({k, t});
  out.carrier = Tensor({k, t});
  for (Index row = 0; row < k; ++row) {
    const double* xr = coeffs.data() + row * t;
    double* mr = out.magnitude.data() + row * t;
    double* pr = out.carrier.data() + row * t;
    for (Index i = 0; i < t; ++i) {
      double acc = 0.0;
      for (Index j = 0; j < smoothing_len; ++j) {
        Index src = i - pad_left + j;
        if (src >= 0 && src < t) acc += std::fabs(xr[src]);
      }
      mr[i] = acc * inv;
      pr[i] = xr[i] / std::max(mr[i], eps);
    }
  }
  return out;
}

}  // namespace aetsep
