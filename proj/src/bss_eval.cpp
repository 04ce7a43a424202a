#include "aetsep/bss_eval.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace aetsep {

namespace {

constexpr double kRidge = 1e-10;
constexpr double kDenFloor = 1e-24;

double capped_db(double num, double den) {
  if (den <= kDenFloor) return 300.0;
  double db = 10.0 * std::log10((num + 1e-300) / den);
  return std::min(300.0, std::max(-300.0, db));
}

// Plain Cholesky; returns false when a pivot falls below the relative floor,
// which is how rank deficiency shows up in a PSD Gram matrix.
bool cholesky_solve(std::vector<double>& a, std::vector<double>& b, std::size_t n) {
  double diag_scale = 0.0;
  for (std::size_t i = 0; i < n; ++i) diag_scale = std::max(diag_scale, a[i * n + i]);
  double min_pivot = std::max(1e-300, 1e-12 * diag_scale);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double sum = a[i * n + j];
      for (std::size_t k = 0; k < j; ++k) sum -= a[i * n + k] * a[j * n + k];
      if (i == j) {
        if (sum <= min_pivot) return false;
        a[i * n + i] = std::sqrt(sum);
      } else {
        a[i * n + j] = sum / a[j * n + j];
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    double sum = b[i];
    for (std::size_t k = 0; k < i; ++k) sum -= a[i * n + k] * b[k];
    b[i] = sum / a[i * n + i];
  }
  for (std::size_t ii = n; ii-- > 0;) {
    double sum = b[ii];
    for (std::size_t k = ii + 1; k < n; ++k) sum -= a[k * n + ii] * b[k];
    b[ii] = sum / a[ii * n + ii];
  }
  return true;
}

double energy(const std::vector<double>& v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return acc;
}

}  // namespace

BssScores bss_eval(const std::vector<double>& estimate,
                   const std::vector<std::vector<double>>& references, std::size_t target_index,
                   Index filter_len) {
  return bss_eval_decompose(estimate, references, target_index, filter_len).scores;
}

BssDecomposition bss_eval_decompose(const std::vector<double>& estimate,
                                    const std::vector<std::vector<double>>& references,
                                    std::size_t target_index, Index filter_len) {
  if (references.empty()) throw std::invalid_argument("bss_eval: no references");
  if (target_index >= references.size())
    throw std::invalid_argument("bss_eval: target index out of range");
  if (filter_len < 1) throw std::invalid_argument("bss_eval: filter length must be >= 1");
  const std::size_t t = estimate.size();
  if (t == 0) throw std::invalid_argument("bss_eval: empty estimate");
  for (const auto& r : references)
    if (r.size() != t) throw std::invalid_argument("bss_eval: reference length mismatch");

  const std::size_t srcs = references.size();
  const std::size_t taps = static_cast<std::size_t>(filter_len);
  const std::size_t padded = t + taps - 1;  // delayed copies keep full support

  // Cross-correlations between references at lags 0..L-1:
  // xc[i][j][d] = sum_u r_i(u) r_j(u + d).
  std::vector<std::vector<std::vector<double>>> xc(
      srcs, std::vector<std::vector<double>>(srcs, std::vector<double>(taps, 0.0)));
  for (std::size_t i = 0; i < srcs; ++i)
    for (std::size_t j = 0; j < srcs; ++j)
      for (std::size_t d = 0; d < taps; ++d) {
        double acc = 0.0;
        for (std::size_t u = 0; u + d < t; ++u) acc += references[i][u] * references[j][u + d];
        xc[i][j][d] = acc;
      }

  // Estimate-to-reference correlations at delays 0..L-1:
  // ec[j][tau] = sum_u r_j(u) est(u + tau).
  std::vector<std::vector<double>> ec(srcs, std::vector<double>(taps, 0.0));
  for (std::size_t j = 0; j < srcs; ++j)
    for (std::size_t d = 0; d < taps; ++d) {
      double acc = 0.0;
      for (std::size_t u = 0; u + d < t; ++u) acc += references[j][u] * estimate[u + d];
      ec[j][d] = acc;
    }

  bool regularized = false;
  // Projection coefficients onto the delayed copies of the given sources.
  auto project = [&](const std::vector<std::size_t>& sources) {
    std::size_t n = sources.size() * taps;
    std::vector<double> gram(n * n);
    std::vector<double> rhs(n);
    for (std::size_t a = 0; a < sources.size(); ++a)
      for (std::size_t ta = 0; ta < taps; ++ta) {
        std::size_t row = a * taps + ta;
        rhs[row] = ec[sources[a]][ta];
        for (std::size_t b = 0; b < sources.size(); ++b)
          for (std::size_t tb = 0; tb < taps; ++tb) {
            std::size_t col = b * taps + tb;
            // Gram of delayed copies is the cross-correlation at the lag
            // difference (full overlap thanks to the zero padding):
            // <r_a shifted ta, r_b shifted tb> = sum_u r_a(u+tb-ta) r_b(u).
            double v = tb >= ta ? xc[sources[b]][sources[a]][tb - ta]
                                : xc[sources[a]][sources[b]][ta - tb];
            gram[row * n + col] = v;
          }
      }

    std::vector<double> chol = gram;
    std::vector<double> beta = rhs;
    if (!cholesky_solve(chol, beta, n)) {
      regularized = true;
      chol = gram;
      for (std::size_t i = 0; i < n; ++i) chol[i * n + i] += kRidge;
      beta = rhs;
      if (!cholesky_solve(chol, beta, n))
        throw std::runtime_error("bss_eval: projection system is numerically singular");
    }

    std::vector<double> proj(padded, 0.0);
    for (std::size_t a = 0; a < sources.size(); ++a) {
      const auto& ref = references[sources[a]];
      for (std::size_t ta = 0; ta < taps; ++ta) {
        double w = beta[a * taps + ta];
        if (w == 0.0) continue;
        for (std::size_t u = 0; u < t; ++u) proj[u + ta] += w * ref[u];
      }
    }
    return proj;
  };

  std::vector<std::size_t> all(srcs);
  for (std::size_t i = 0; i < srcs; ++i) all[i] = i;

  std::vector<double> s_target = project({target_index});
  std::vector<double> p_all = project(all);

  std::vector<double> est_pad(padded, 0.0);
  std::copy(estimate.begin(), estimate.end(), est_pad.begin());

  BssDecomposition out;
  out.s_target = std::move(s_target);
  out.e_interf.resize(padded);
  out.e_artif.resize(padded);
  std::vector<double> distortion(padded), target_plus_interf(padded);
  for (std::size_t u = 0; u < padded; ++u) {
    out.e_interf[u] = p_all[u] - out.s_target[u];
    out.e_artif[u] = est_pad[u] - p_all[u];
    distortion[u] = out.e_interf[u] + out.e_artif[u];
    target_plus_interf[u] = out.s_target[u] + out.e_interf[u];
  }

  out.scores.filter_len = filter_len;
  out.scores.regularized = regularized;
  out.scores.sdr_db = capped_db(energy(out.s_target), energy(distortion));
  out.scores.sir_db = capped_db(energy(out.s_target), energy(out.e_interf));
  out.scores.sar_db = capped_db(energy(target_plus_interf), energy(out.e_artif));
  return out;
}

}  // namespace aetsep
