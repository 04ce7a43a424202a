#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "aetsep/tensor.hpp"
#include "aetsep/wav.hpp"

namespace aetsep {

struct MixturePair {
  Waveform mixture;
  Waveform source_a;  // post-scaling
  Waveform source_b;
  std::string pair_id;
  int sentence_id = 0;
};

// Rescales b to the RMS of a over the overlapped region (0 dB source-to-source
// ratio), zero-pads the shorter signal, and sums. If the mixture would clip,
// all three signals are scaled jointly so mixture == source_a + source_b holds
// exactly.
MixturePair mix_at_0db(const Waveform& a, const Waveform& b);

struct MixtureSpec {
  std::string pair_id;
  bool is_test = false;
  std::string path_a;
  std::string path_b;
  int sentence_id = 0;
};

struct SplitManifest {
  std::string corpus_root;
  std::uint64_t seed = 0;
  std::vector<MixtureSpec> mixtures;

  std::size_t train_count() const;
  std::size_t test_count() const;
};

// Pairs up speakers (subdirectories of WAV files under corpus_root), draws
// sentences_per_speaker sentences per speaker and splits them 8/2 per pair
// (proportionally for smaller counts). Deterministic per seed.
SplitManifest build_manifest(const std::string& corpus_root, int num_pairs,
                             int sentences_per_speaker, std::uint64_t seed);

// Line-oriented text format: "pair_id<TAB>role<TAB>sentence_path", two lines
// per mixture (speaker A then speaker B); '#' lines carry root and seed.
void save_manifest(const SplitManifest& manifest, const std::string& path);
SplitManifest load_manifest(const std::string& path);

// Loads both sentences of a spec and mixes them at 0 dB.
MixturePair realize_mixture(const MixtureSpec& spec);

enum class TargetSource { kA, kB };

struct SegmentBatch {
  std::vector<std::vector<double>> mixtures;  // batch x segment_len
  std::vector<std::vector<double>> targets;
};

// Fixed-length segments cut at seeded random offsets, shuffled and grouped
// into batches; short sentences and tail segments are zero padded. One pass
// over the plan per epoch.
class BatchIterator {
 public:
  BatchIterator(const std::vector<MixturePair>& pairs, TargetSource target, Index segment_len,
                Index batch_size, std::uint64_t seed, std::uint64_t epoch);

  bool next(SegmentBatch& out);
  std::size_t batches_total() const;

 private:
  const std::vector<MixturePair>& pairs_;
  TargetSource target_;
  Index segment_len_;
  Index batch_size_;
  std::vector<std::pair<std::size_t, Index>> plan_;  // (pair index, offset)
  std::size_t cursor_ = 0;
};

}  // namespace aetsep
