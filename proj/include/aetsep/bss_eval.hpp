#pragma once

#include <vector>

#include "aetsep/tensor.hpp"

namespace aetsep {

struct BssScores {
  double sdr_db = 0.0;
  double sir_db = 0.0;
  double sar_db = 0.0;
  Index filter_len = 1;
  bool regularized = false;  // Gram system needed the ridge fallback
};

struct BssDecomposition {
  std::vector<double> s_target;  // padded to T + L - 1, like the other parts
  std::vector<double> e_interf;
  std::vector<double> e_artif;
  BssScores scores;
};

// BSS_EVAL-style decomposition: the estimate is split into s_target (its
// least-squares projection onto L delayed copies of the target reference),
// e_interf (the extension of that projection to all references) and e_artif
// (the residual). Ratios are reported in dB, capped at +/-300.
BssScores bss_eval(const std::vector<double>& estimate,
                   const std::vector<std::vector<double>>& references, std::size_t target_index,
                   Index filter_len = 512);

BssDecomposition bss_eval_decompose(const std::vector<double>& estimate,
                                    const std::vector<std::vector<double>>& references,
                                    std::size_t target_index, Index filter_len = 512);

}  // namespace aetsep
