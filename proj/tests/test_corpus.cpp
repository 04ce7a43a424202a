#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <vector>

#include "aetsep/corpus.hpp"
#include "aetsep/rng.hpp"
#include "aetsep/wav.hpp"

using namespace aetsep;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& tag) {
  static int counter = 0;
  fs::path dir = fs::temp_directory_path() / ("aetsep_" + tag + "_" + std::to_string(counter++));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

Waveform tone(Index len, double freq, double rate = 16000.0, double amp = 0.4) {
  Waveform w;
  w.sample_rate = rate;
  w.samples.resize(static_cast<std::size_t>(len));
  for (Index t = 0; t < len; ++t)
    w.samples[static_cast<std::size_t>(t)] =
        amp * std::sin(2.0 * M_PI * freq * static_cast<double>(t) / rate);
  return w;
}

void put_u32(std::ofstream& out, std::uint32_t v) {
  char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
               static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  out.write(b, 4);
}

void put_u16(std::ofstream& out, std::uint16_t v) {
  char b[2] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff)};
  out.write(b, 2);
}

void write_raw_wav(const fs::path& path, std::uint16_t format, std::uint16_t channels,
                   std::uint16_t bits, const std::vector<unsigned char>& payload,
                   std::uint32_t rate = 16000) {
  std::ofstream out(path, std::ios::binary);
  std::uint32_t data_bytes = static_cast<std::uint32_t>(payload.size());
  out.write("RIFF", 4);
  put_u32(out, 36 + data_bytes);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  put_u32(out, 16);
  put_u16(out, format);
  put_u16(out, channels);
  put_u32(out, rate);
  put_u32(out, rate * channels * bits / 8);
  put_u16(out, static_cast<std::uint16_t>(channels * bits / 8));
  put_u16(out, bits);
  out.write("data", 4);
  put_u32(out, data_bytes);
  out.write(reinterpret_cast<const char*>(payload.data()), payload.size());
}

double rms_of(const std::vector<double>& v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return std::sqrt(acc / static_cast<double>(v.size()));
}

}  // namespace

TEST_CASE("int16 extremes normalize to [-1, 1)") {
  fs::path dir = fresh_dir("wav");
  // two samples: -32768 and 32767
  write_raw_wav(dir / "extremes.wav", 1, 1, 16, {0x00, 0x80, 0xff, 0x7f});
  Waveform w = read_wav((dir / "extremes.wav").string());
  REQUIRE(w.samples.size() == 2);
  CHECK(w.samples[0] == -1.0);
  CHECK(w.samples[1] == doctest::Approx(32767.0 / 32768.0).epsilon(1e-15));
  CHECK(w.sample_rate == 16000.0);
}

TEST_CASE("wav round trip is exact to one LSB") {
  fs::path dir = fresh_dir("wav");
  Rng rng(3);
  Waveform w;
  w.sample_rate = 8000.0;
  w.samples.resize(777);
  for (auto& v : w.samples) v = rng.uniform(-0.95, 0.95);
  write_wav((dir / "rt.wav").string(), w);
  Waveform back = read_wav((dir / "rt.wav").string());
  REQUIRE(back.samples.size() == w.samples.size());
  CHECK(back.sample_rate == 8000.0);
  for (std::size_t i = 0; i < w.samples.size(); ++i)
    CHECK(std::fabs(back.samples[i] - w.samples[i]) <= 1.0 / 32768.0);
}

TEST_CASE("stereo is averaged and float32 read back exactly") {
  fs::path dir = fresh_dir("wav");
  // stereo PCM16 frame: L = 16384 (0.5), R = -16384 (-0.5) -> mono 0.0
  write_raw_wav(dir / "stereo.wav", 1, 2, 16, {0x00, 0x40, 0x00, 0xc0});
  Waveform s = read_wav((dir / "stereo.wav").string());
  REQUIRE(s.samples.size() == 1);
  CHECK(s.samples[0] == 0.0);

  float fv = 0.25f;
  std::uint32_t raw;
  static_assert(sizeof(raw) == sizeof(fv));
  std::memcpy(&raw, &fv, 4);
  write_raw_wav(dir / "f32.wav", 3, 1, 32,
                {static_cast<unsigned char>(raw & 0xff), static_cast<unsigned char>((raw >> 8) & 0xff),
                 static_cast<unsigned char>((raw >> 16) & 0xff),
                 static_cast<unsigned char>((raw >> 24) & 0xff)});
  Waveform f = read_wav((dir / "f32.wav").string());
  REQUIRE(f.samples.size() == 1);
  CHECK(f.samples[0] == 0.25);
}

TEST_CASE("malformed wav files raise structured errors") {
  fs::path dir = fresh_dir("wav");

  {
    std::ofstream out(dir / "truncated.wav", std::ios::binary);
    out.write("RIFF\x10\x00\x00\x00WAVEfmt ", 16);
  }
  CHECK_THROWS_WITH_AS(read_wav((dir / "truncated.wav").string()),
                       doctest::Contains("truncated"), std::runtime_error);

  {
    std::ofstream out(dir / "notriff.wav", std::ios::binary);
    out.write("JUNKJUNKJUNKJUNK", 16);
  }
  CHECK_THROWS_WITH_AS(read_wav((dir / "notriff.wav").string()), doctest::Contains("RIFF"),
                       std::runtime_error);

  write_raw_wav(dir / "empty.wav", 1, 1, 16, {});
  CHECK_THROWS_WITH_AS(read_wav((dir / "empty.wav").string()), doctest::Contains("zero-length"),
                       std::runtime_error);

  write_raw_wav(dir / "alaw.wav", 6, 1, 8, {0x00, 0x00});
  CHECK_THROWS_WITH_AS(read_wav((dir / "alaw.wav").string()), doctest::Contains("unsupported codec"),
                       std::runtime_error);
}

TEST_CASE("mix_at_0db equalizes RMS and keeps additivity exact") {
  Waveform a = tone(4000, 440.0, 16000.0, 0.1 * std::sqrt(2.0));  // RMS 0.1
  Waveform b = tone(4000, 313.0, 16000.0, 0.4 * std::sqrt(2.0));  // RMS 0.4

  double rms_a = rms_of(a.samples), rms_b = rms_of(b.samples);
  MixturePair mix = mix_at_0db(a, b);
  double expected_scale = rms_a / rms_b;
  CHECK(expected_scale == doctest::Approx(0.25).epsilon(1e-3));
  for (std::size_t i = 0; i < b.samples.size(); ++i)
    CHECK(mix.source_b.samples[i] == doctest::Approx(b.samples[i] * expected_scale).epsilon(1e-12));
  CHECK(rms_of(mix.source_b.samples) == doctest::Approx(rms_of(mix.source_a.samples)).epsilon(1e-12));

  double ratio_db = 10.0 * std::log10(std::pow(rms_of(mix.source_a.samples), 2) /
                                      std::pow(rms_of(mix.source_b.samples), 2));
  CHECK(std::fabs(ratio_db) < 1e-9);

  for (std::size_t i = 0; i < mix.mixture.samples.size(); ++i)
    CHECK(mix.mixture.samples[i] == mix.source_a.samples[i] + mix.source_b.samples[i]);
}

TEST_CASE("mixing a signal with itself engages the clip guard") {
  Waveform a = tone(2000, 200.0, 16000.0, 0.8);
  MixturePair mix = mix_at_0db(a, a);
  double peak = 0.0;
  for (double v : mix.mixture.samples) peak = std::max(peak, std::fabs(v));
  CHECK(peak <= 0.99 + 1e-12);
  // mixture is still exactly the sum and the two sources stay identical
  for (std::size_t i = 0; i < mix.mixture.samples.size(); ++i) {
    CHECK(mix.mixture.samples[i] == mix.source_a.samples[i] + mix.source_b.samples[i]);
    CHECK(mix.source_a.samples[i] == doctest::Approx(mix.source_b.samples[i]).epsilon(1e-12));
  }
}

TEST_CASE("mix_at_0db rejects silence, rate mismatch, and pads lengths") {
  Waveform silent;
  silent.samples.assign(100, 0.0);
  Waveform a = tone(100, 100.0);
  CHECK_THROWS_AS(mix_at_0db(a, silent), std::invalid_argument);

  Waveform wrong_rate = tone(100, 100.0, 8000.0);
  CHECK_THROWS_AS(mix_at_0db(a, wrong_rate), std::invalid_argument);

  Waveform shorter = tone(60, 170.0);
  MixturePair mix = mix_at_0db(a, shorter);
  CHECK(mix.mixture.samples.size() == 100);
  for (std::size_t i = 60; i < 100; ++i) CHECK(mix.source_b.samples[i] == 0.0);
}

namespace {

fs::path make_corpus(int speakers, int sentences, Index len = 900) {
  fs::path root = fresh_dir("corpus");
  for (int s = 0; s < speakers; ++s) {
    fs::path spk = root / ("spk" + std::to_string(s));
    fs::create_directories(spk);
    for (int i = 0; i < sentences; ++i) {
      Waveform w = tone(len, 100.0 + 37.0 * s + 11.0 * i);
      write_wav((spk / ("sent" + std::to_string(i) + ".wav")).string(), w);
    }
  }
  return root;
}

}  // namespace

TEST_CASE("manifest yields the 80/20 protocol split") {
  fs::path root = make_corpus(20, 10, 400);
  SplitManifest m = build_manifest(root.string(), 10, 10, 42);
  CHECK(m.mixtures.size() == 100);
  CHECK(m.train_count() == 80);
  CHECK(m.test_count() == 20);

  // train and test sentences never overlap within a pair
  std::set<std::string> train_paths, test_paths;
  for (const auto& spec : m.mixtures) {
    auto& dst = spec.is_test ? test_paths : train_paths;
    dst.insert(spec.path_a);
    dst.insert(spec.path_b);
  }
  for (const auto& p : test_paths) CHECK(train_paths.count(p) == 0);
}

TEST_CASE("manifest is deterministic and proportional for small corpora") {
  fs::path root = make_corpus(4, 5, 300);
  SplitManifest m1 = build_manifest(root.string(), 2, 5, 7);
  SplitManifest m2 = build_manifest(root.string(), 2, 5, 7);
  REQUIRE(m1.mixtures.size() == m2.mixtures.size());
  for (std::size_t i = 0; i < m1.mixtures.size(); ++i) {
    CHECK(m1.mixtures[i].path_a == m2.mixtures[i].path_a);
    CHECK(m1.mixtures[i].path_b == m2.mixtures[i].path_b);
    CHECK(m1.mixtures[i].is_test == m2.mixtures[i].is_test);
  }
  CHECK(m1.mixtures.size() == 10);
  CHECK(m1.train_count() == 8);  // 4/1 per pair
  CHECK(m1.test_count() == 2);

  CHECK_THROWS_AS(build_manifest(root.string(), 3, 5, 7), std::invalid_argument);
}

TEST_CASE("manifest save/load round trip") {
  fs::path root = make_corpus(2, 4, 300);
  SplitManifest m = build_manifest(root.string(), 1, 4, 11);
  fs::path file = root / "manifest.tsv";
  save_manifest(m, file.string());
  SplitManifest back = load_manifest(file.string());
  CHECK(back.corpus_root == m.corpus_root);
  CHECK(back.seed == m.seed);
  REQUIRE(back.mixtures.size() == m.mixtures.size());
  for (std::size_t i = 0; i < m.mixtures.size(); ++i) {
    CHECK(back.mixtures[i].pair_id == m.mixtures[i].pair_id);
    CHECK(back.mixtures[i].is_test == m.mixtures[i].is_test);
    CHECK(back.mixtures[i].path_a == m.mixtures[i].path_a);
    CHECK(back.mixtures[i].path_b == m.mixtures[i].path_b);
  }

  MixturePair pair = realize_mixture(m.mixtures[0]);
  CHECK(pair.mixture.samples.size() == 300);
  CHECK(pair.pair_id == m.mixtures[0].pair_id);
}

TEST_CASE("batch iterator shapes, determinism and bounds") {
  std::vector<MixturePair> pairs;
  for (int i = 0; i < 4; ++i) {
    Waveform a = tone(1000 + 173 * i, 150.0 + i);
    Waveform b = tone(900 + 200 * i, 260.0 + i);
    pairs.push_back(mix_at_0db(a, b));
  }

  BatchIterator it(pairs, TargetSource::kA, 256, 16, 5, 0);
  SegmentBatch batch;
  std::size_t batches = 0, segments = 0;
  bool saw_full_batch = false;
  while (it.next(batch)) {
    ++batches;
    segments += batch.mixtures.size();
    if (batch.mixtures.size() == 16) saw_full_batch = true;
    for (const auto& seg : batch.mixtures) CHECK(seg.size() == 256);
    for (const auto& seg : batch.targets) CHECK(seg.size() == 256);
  }
  CHECK(batches == it.batches_total());
  CHECK(segments >= pairs.size());

  // 4 pairs contribute ceil(len/256) segments each: 4 + 5 + 6 + 6 = 21,
  // enough for one full batch of 16
  CHECK(saw_full_batch);

  // same seed and epoch reproduce the exact same batch stream
  BatchIterator it1(pairs, TargetSource::kB, 256, 4, 9, 2);
  BatchIterator it2(pairs, TargetSource::kB, 256, 4, 9, 2);
  SegmentBatch b1, b2;
  while (true) {
    bool h1 = it1.next(b1), h2 = it2.next(b2);
    CHECK(h1 == h2);
    if (!h1) break;
    CHECK(b1.mixtures == b2.mixtures);
    CHECK(b1.targets == b2.targets);
  }

  CHECK_THROWS_AS(BatchIterator(pairs, TargetSource::kA, 5000, 16, 5, 0), std::invalid_argument);
}

TEST_CASE("segments come from inside their sentences") {
  std::vector<MixturePair> pairs;
  Waveform a = tone(512, 150.0), b = tone(512, 260.0);
  pairs.push_back(mix_at_0db(a, b));
  BatchIterator it(pairs, TargetSource::kA, 128, 2, 3, 1);
  SegmentBatch batch;
  while (it.next(batch)) {
    for (std::size_t i = 0; i < batch.mixtures.size(); ++i) {
      // every segment must be a contiguous slice of the mixture
      const auto& seg = batch.mixtures[i];
      bool found = false;
      for (std::size_t off = 0; off + seg.size() <= pairs[0].mixture.samples.size() && !found; ++off) {
        bool match = true;
        for (std::size_t t = 0; t < seg.size() && match; ++t)
          match = seg[t] == pairs[0].mixture.samples[off + t];
        found = match;
      }
      CHECK(found);
    }
  }
}
