#include "aetsep/wav.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace aetsep {

namespace {

struct Reader {
  std::ifstream in;
  std::string path;

  explicit Reader(const std::string& p) : in(p, std::ios::binary), path(p) {
    if (!in) throw std::runtime_error("cannot open WAV file: " + p);
  }

  void read_exact(void* dst, std::size_t n, const char* what) {
    in.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in.gcount()) != n)
      throw std::runtime_error(path + ": truncated WAV file while reading " + std::string(what));
  }

  std::uint32_t u32(const char* what) {
    unsigned char b[4];
    read_exact(b, 4, what);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
  }

  std::uint16_t u16(const char* what) {
    unsigned char b[2];
    read_exact(b, 2, what);
    return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
  }
};

void put_u32(std::ofstream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff), static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

void put_u16(std::ofstream& out, std::uint16_t v) {
  unsigned char b[2] = {static_cast<unsigned char>(v & 0xff), static_cast<unsigned char>((v >> 8) & 0xff)};
  out.write(reinterpret_cast<const char*>(b), 2);
}

}  // namespace

Waveform read_wav(const std::string& path) {
  Reader r(path);

  char tag[4];
  r.read_exact(tag, 4, "RIFF header");
  if (std::memcmp(tag, "RIFF", 4) != 0)
    throw std::runtime_error(path + ": missing RIFF chunk");
  r.u32("RIFF size");
  r.read_exact(tag, 4, "WAVE tag");
  if (std::memcmp(tag, "WAVE", 4) != 0)
    throw std::runtime_error(path + ": missing WAVE tag");

  bool have_fmt = false;
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  std::vector<unsigned char> data;

  while (r.in.peek() != EOF) {
    char id[4];
    r.read_exact(id, 4, "chunk id");
    std::uint32_t size = r.u32("chunk size");
    if (std::memcmp(id, "fmt ", 4) == 0) {
      if (size < 16) throw std::runtime_error(path + ": fmt chunk too short");
      format = r.u16("format code");
      channels = r.u16("channel count");
      rate = r.u32("sample rate");
      r.u32("byte rate");
      r.u16("block align");
      bits = r.u16("bits per sample");
      if (size > 16) r.in.seekg(size - 16, std::ios::cur);
      have_fmt = true;
    } else if (std::memcmp(id, "data", 4) == 0) {
      if (!have_fmt) throw std::runtime_error(path + ": data chunk before fmt chunk");
      if (size == 0) throw std::runtime_error(path + ": zero-length data chunk");
      data.resize(size);
      r.read_exact(data.data(), size, "data chunk payload");
      if (size % 2) r.in.seekg(1, std::ios::cur);  // chunks are word aligned
      break;
    } else {
      r.in.seekg(size + (size % 2), std::ios::cur);
      if (!r.in) throw std::runtime_error(path + ": truncated WAV file while skipping chunk");
    }
  }
  if (!have_fmt) throw std::runtime_error(path + ": missing fmt chunk");
  if (data.empty()) throw std::runtime_error(path + ": missing data chunk");
  if (channels < 1 || channels > 2)
    throw std::runtime_error(path + ": unsupported channel count " + std::to_string(channels));

  bool pcm16 = format == 1 && bits == 16;
  bool float32 = format == 3 && bits == 32;
  if (!pcm16 && !float32)
    throw std::runtime_error(path + ": unsupported codec (format " + std::to_string(format) + ", " +
                             std::to_string(bits) + " bits); expected PCM16 or float32");

  std::size_t bytes_per_sample = pcm16 ? 2 : 4;
  std::size_t frame_bytes = bytes_per_sample * channels;
  std::size_t frames = data.size() / frame_bytes;
  if (frames == 0) throw std::runtime_error(path + ": data chunk holds no complete frame");

  Waveform wave;
  wave.sample_rate = static_cast<double>(rate);
  wave.samples.resize(frames);
  for (std::size_t f = 0; f < frames; ++f) {
    double acc = 0.0;
    for (std::uint16_t c = 0; c < channels; ++c) {
      const unsigned char* p = data.data() + f * frame_bytes + c * bytes_per_sample;
      if (pcm16) {
        std::int16_t v = static_cast<std::int16_t>(p[0] | (p[1] << 8));
        acc += static_cast<double>(v) / 32768.0;
      } else {
        float v;
        std::uint32_t raw = static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
                            (static_cast<std::uint32_t>(p[2]) << 16) |
                            (static_cast<std::uint32_t>(p[3]) << 24);
        std::memcpy(&v, &raw, 4);
        acc += static_cast<double>(v);
      }
    }
    wave.samples[f] = acc / static_cast<double>(channels);
  }
  return wave;
}

void write_wav(const std::string& path, const Waveform& wave) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot create WAV file: " + path);

  std::uint32_t data_bytes = static_cast<std::uint32_t>(wave.samples.size() * 2);
  out.write("RIFF", 4);
  put_u32(out, 36 + data_bytes);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  put_u32(out, 16);
  put_u16(out, 1);  // PCM
  put_u16(out, 1);  // mono
  std::uint32_t rate = static_cast<std::uint32_t>(wave.sample_rate);
  put_u32(out, rate);
  put_u32(out, rate * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  out.write("data", 4);
  put_u32(out, data_bytes);
  for (double v : wave.samples) {
    double scaled = std::lround(v * 32768.0);
    scaled = std::min(32767.0, std::max(-32768.0, scaled));
    put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(scaled)));
  }
  if (!out) throw std::runtime_error("failed writing WAV file: " + path);
}

}  // namespace aetsep
