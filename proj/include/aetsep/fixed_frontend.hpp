#pragma once

#include <vector>

#include "aetsep/graph.hpp"
#include "aetsep/tensor.hpp"

namespace aetsep {

enum class WindowKind { kHann, kRectangular };

// Periodic windows so hops dividing N/2 satisfy constant overlap-add.
std::vector<double> make_window(WindowKind kind, Index length);

enum class TransformKind { kDct2, kDftRealPair };

struct BasisMatrix {
  Tensor basis;  // K x N
  TransformKind kind = TransformKind::kDct2;
};

// Orthonormal type-II DCT rows: b(k,t) = c_k cos(pi k (2t+1) / (2N)).
BasisMatrix dct2_basis(Index n, Index k);

// X[n][k] = sum_t x(n h + t) w(t) b(k,t); the final frame is zero padded.
// Returned tensor is K x frames (component-major, frames along time).
Tensor short_time_transform(const std::vector<double>& x, const BasisMatrix& basis,
                            WindowKind window, Index hop);

Index frame_count(Index signal_len, Index window_len, Index hop);

struct StftFrames {
  Tensor re;  // K x frames, K = N/2 + 1
  Tensor im;  // K x frames
  Index window_len = 0;
  Index hop = 0;
  WindowKind window = WindowKind::kHann;
};

StftFrames stft(const std::vector<double>& x, Index n, Index hop, WindowKind window);

// Weighted overlap-add with per-sample window-power normalization; output is
// trimmed or zero padded to target_len (pass -1 for the natural length).
std::vector<double> istft(const StftFrames& frames, Index target_len = -1);

// Differentiable inverse STFT for the fixed-front-end separation graph.
// re/im are K x frames nodes; the result is a length target_len waveform node.
NodePtr istft_node(const NodePtr& re, const NodePtr& im, Index n, Index hop, WindowKind window,
                   Index target_len);

struct MagPhase {
  Tensor magnitude;  // K x T, nonnegative
  Tensor carrier;    // K x T, X = magnitude .* carrier where magnitude > eps
};

// M = |X| smoothed along time with a length-L moving average per channel;
// P = X / max(M, eps).
MagPhase smooth_demodulate(const Tensor& coeffs, Index smoothing_len, double eps = 1e-8);

// Radix-2 complex FFT helpers (power-of-two length); inverse applies 1/N.
void fft_complex(std::vector<double>& re, std::vector<double>& im, bool inverse);

// Real-input DFT of an arbitrary-length frame (FFT path when N is a power of
// two). Outputs have N/2 + 1 bins.
void rdft(const double* frame, Index n, double* out_re, double* out_im);
void irdft(const double* re, const double* im, Index n, double* out_frame);

}  // namespace aetsep
