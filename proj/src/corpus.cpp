#include "aetsep/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "aetsep/rng.hpp"

namespace fs = std::filesystem;

namespace aetsep {

namespace {

double rms(const std::vector<double>& v, std::size_t count) {
  double acc = 0.0;
  for (std::size_t i = 0; i < count; ++i) acc += v[i] * v[i];
  return std::sqrt(acc / static_cast<double>(count));
}

constexpr double kClipGuard = 0.99;

}  // namespace

MixturePair mix_at_0db(const Waveform& a, const Waveform& b) {
  if (a.sample_rate != b.sample_rate)
    throw std::invalid_argument("mix_at_0db: sample rates differ (" +
                                std::to_string(a.sample_rate) + " vs " +
                                std::to_string(b.sample_rate) + ")");
  if (a.samples.empty() || b.samples.empty())
    throw std::invalid_argument("mix_at_0db: empty input");

  std::size_t overlap = std::min(a.samples.size(), b.samples.size());
  double rms_a = rms(a.samples, overlap);
  double rms_b = rms(b.samples, overlap);
  if (rms_a <= 0.0 || rms_b <= 0.0)
    throw std::invalid_argument("mix_at_0db: silent input (zero RMS)");

  std::size_t len = std::max(a.samples.size(), b.samples.size());
  MixturePair out;
  out.source_a.sample_rate = out.source_b.sample_rate = out.mixture.sample_rate = a.sample_rate;
  out.source_a.samples.assign(len, 0.0);
  out.source_b.samples.assign(len, 0.0);
  std::copy(a.samples.begin(), a.samples.end(), out.source_a.samples.begin());
  double scale = rms_a / rms_b;
  for (std::size_t i = 0; i < b.samples.size(); ++i) out.source_b.samples[i] = b.samples[i] * scale;

  out.mixture.samples.resize(len);
  double peak = 0.0;
  for (std::size_t i = 0; i < len; ++i) {
    out.mixture.samples[i] = out.source_a.samples[i] + out.source_b.samples[i];
    peak = std::max(peak, std::fabs(out.mixture.samples[i]));
  }
  if (peak > kClipGuard) {
    double g = kClipGuard / peak;
    for (std::size_t i = 0; i < len; ++i) {
      out.source_a.samples[i] *= g;
      out.source_b.samples[i] *= g;
      out.mixture.samples[i] = out.source_a.samples[i] + out.source_b.samples[i];
    }
  }
  return out;
}

std::size_t SplitManifest::train_count() const {
  std::size_t n = 0;
  for (const auto& m : mixtures)
    if (!m.is_test) ++n;
  return n;
}

std::size_t SplitManifest::test_count() const { return mixtures.size() - train_count(); }

SplitManifest build_manifest(const std::string& corpus_root, int num_pairs,
                             int sentences_per_speaker, std::uint64_t seed) {
  if (num_pairs < 1) throw std::invalid_argument("build_manifest: need at least one pair");
  if (sentences_per_speaker < 2)
    throw std::invalid_argument("build_manifest: need at least two sentences per speaker");
  if (!fs::is_directory(corpus_root))
    throw std::invalid_argument("build_manifest: corpus root is not a directory: " + corpus_root);

  // speakers are subdirectories holding WAV sentences
  std::vector<std::pair<std::string, std::vector<std::string>>> speakers;
  for (const auto& entry : fs::directory_iterator(corpus_root)) {
    if (!entry.is_directory()) continue;
    std::vector<std::string> wavs;
    for (const auto& f : fs::directory_iterator(entry.path())) {
      if (!f.is_regular_file()) continue;
      std::string ext = f.path().extension().string();
      std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
      if (ext == ".wav") wavs.push_back(f.path().string());
    }
    if (static_cast<int>(wavs.size()) >= sentences_per_speaker) {
      std::sort(wavs.begin(), wavs.end());
      speakers.emplace_back(entry.path().filename().string(), std::move(wavs));
    }
  }
  std::sort(speakers.begin(), speakers.end());

  if (static_cast<int>(speakers.size()) < 2 * num_pairs)
    throw std::invalid_argument("build_manifest: need " + std::to_string(2 * num_pairs) +
                                " speakers with >= " + std::to_string(sentences_per_speaker) +
                                " sentences, found " + std::to_string(speakers.size()));

  Rng rng(seed);
  rng.shuffle(speakers);

  SplitManifest manifest;
  manifest.corpus_root = corpus_root;
  manifest.seed = seed;

  // 8/2 split at the standard protocol scale, proportional for smaller
  // corpora (always at least one test sentence per pair)
  int train_per_pair = std::max(1, (sentences_per_speaker * 8) / 10);
  if (train_per_pair >= sentences_per_speaker) train_per_pair = sentences_per_speaker - 1;

  for (int p = 0; p < num_pairs; ++p) {
    auto& spk_a = speakers[static_cast<std::size_t>(2 * p)];
    auto& spk_b = speakers[static_cast<std::size_t>(2 * p + 1)];
    rng.shuffle(spk_a.second);
    rng.shuffle(spk_b.second);
    std::string pair_id = "p" + std::to_string(p) + "_" + spk_a.first + "+" + spk_b.first;
    for (int s = 0; s < sentences_per_speaker; ++s) {
      MixtureSpec spec;
      spec.pair_id = pair_id;
      spec.sentence_id = s;
      spec.is_test = s >= train_per_pair;
      spec.path_a = spk_a.second[static_cast<std::size_t>(s)];
      spec.path_b = spk_b.second[static_cast<std::size_t>(s)];
      manifest.mixtures.push_back(std::move(spec));
    }
  }
  return manifest;
}

void save_manifest(const SplitManifest& manifest, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write manifest: " + path);
  out << "# aetsep manifest v1\n";
  out << "# corpus_root\t" << manifest.corpus_root << "\n";
  out << "# seed\t" << manifest.seed << "\n";
  for (const auto& m : manifest.mixtures) {
    const char* role = m.is_test ? "test" : "train";
    out << m.pair_id << "\t" << role << "\t" << m.path_a << "\n";
    out << m.pair_id << "\t" << role << "\t" << m.path_b << "\n";
  }
  if (!out) throw std::runtime_error("failed writing manifest: " + path);
}

SplitManifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open manifest: " + path);
  SplitManifest manifest;
  std::string line;
  std::vector<std::pair<std::string, std::pair<std::string, std::string>>> rows;  // pair, (role, path)
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream hs(line.substr(1));
      std::string key;
      hs >> key;
      if (key == "corpus_root") {
        std::string rest;
        std::getline(hs, rest);
        if (!rest.empty() && rest[0] == '\t') rest.erase(0, 1);
        while (!rest.empty() && rest.front() == ' ') rest.erase(0, 1);
        manifest.corpus_root = rest;
      } else if (key == "seed") {
        hs >> manifest.seed;
      }
      continue;
    }
    std::istringstream ls(line);
    std::string pair_id, role, file;
    if (!std::getline(ls, pair_id, '\t') || !std::getline(ls, role, '\t') ||
        !std::getline(ls, file))
      throw std::runtime_error("manifest: malformed line: " + line);
    if (role != "train" && role != "test")
      throw std::runtime_error("manifest: unknown role '" + role + "' in line: " + line);
    rows.emplace_back(pair_id, std::make_pair(role, file));
  }
  if (rows.size() % 2 != 0)
    throw std::runtime_error("manifest: odd line count; every mixture needs two sentence lines");
  std::map<std::string, int> sentence_counter;
  for (std::size_t i = 0; i < rows.size(); i += 2) {
    if (rows[i].first != rows[i + 1].first || rows[i].second.first != rows[i + 1].second.first)
      throw std::runtime_error("manifest: mismatched sentence pair at line " + std::to_string(i));
    MixtureSpec spec;
    spec.pair_id = rows[i].first;
    spec.is_test = rows[i].second.first == "test";
    spec.path_a = rows[i].second.second;
    spec.path_b = rows[i + 1].second.second;
    spec.sentence_id = sentence_counter[spec.pair_id]++;
    manifest.mixtures.push_back(std::move(spec));
  }
  return manifest;
}

MixturePair realize_mixture(const MixtureSpec& spec) {
  MixturePair pair = mix_at_0db(read_wav(spec.path_a), read_wav(spec.path_b));
  pair.pair_id = spec.pair_id;
  pair.sentence_id = spec.sentence_id;
  return pair;
}

BatchIterator::BatchIterator(const std::vector<MixturePair>& pairs, TargetSource target,
                             Index segment_len, Index batch_size, std::uint64_t seed,
                             std::uint64_t epoch)
    : pairs_(pairs), target_(target), segment_len_(segment_len), batch_size_(batch_size) {
  if (segment_len < 1) throw std::invalid_argument("segment length must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
  Index longest = 0;
  for (const auto& p : pairs) longest = std::max(longest, static_cast<Index>(p.mixture.samples.size()));
  if (!pairs.empty() && segment_len > longest)
    throw std::invalid_argument("segment length " + std::to_string(segment_len) +
                                " exceeds every sentence (longest " + std::to_string(longest) + ")");

  Rng rng = Rng(seed).fork(epoch);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    Index len = static_cast<Index>(pairs[i].mixture.samples.size());
    Index count = std::max<Index>(1, (len + segment_len - 1) / segment_len);
    Index max_offset = std::max<Index>(0, len - segment_len);
    for (Index s = 0; s < count; ++s)
      plan_.emplace_back(i, static_cast<Index>(rng.uniform_index(static_cast<std::uint64_t>(max_offset + 1))));
  }
  rng.shuffle(plan_);
}

std::size_t BatchIterator::batches_total() const {
  return (plan_.size() + static_cast<std::size_t>(batch_size_) - 1) /
         static_cast<std::size_t>(batch_size_);
}

bool BatchIterator::next(SegmentBatch& out) {
  if (cursor_ >= plan_.size()) return false;
  out.mixtures.clear();
  out.targets.clear();
  std::size_t end = std::min(plan_.size(), cursor_ + static_cast<std::size_t>(batch_size_));
  for (; cursor_ < end; ++cursor_) {
    auto [pair_idx, offset] = plan_[cursor_];
    const MixturePair& pair = pairs_[pair_idx];
    const std::vector<double>& tgt =
        target_ == TargetSource::kA ? pair.source_a.samples : pair.source_b.samples;
    std::vector<double> mix_seg(static_cast<std::size_t>(segment_len_), 0.0);
    std::vector<double> tgt_seg(static_cast<std::size_t>(segment_len_), 0.0);
    for (Index t = 0; t < segment_len_; ++t) {
      std::size_t src = static_cast<std::size_t>(offset + t);
      if (src < pair.mixture.samples.size()) {
        mix_seg[static_cast<std::size_t>(t)] = pair.mixture.samples[src];
        tgt_seg[static_cast<std::size_t>(t)] = tgt[src];
      }
    }
    out.mixtures.push_back(std::move(mix_seg));
    out.targets.push_back(std::move(tgt_seg));
  }
  return true;
}

}  // namespace aetsep
