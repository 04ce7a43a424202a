#pragma once

#include <string>
#include <vector>

namespace aetsep {

struct Waveform {
  std::vector<double> samples;  // nominally in [-1, 1]
  double sample_rate = 16000.0;
};

// RIFF/WAVE reader for 16-bit PCM and 32-bit float, mono or stereo (stereo is
// averaged down to mono). int16 samples are normalized by 1/32768.
Waveform read_wav(const std::string& path);

// 16-bit PCM mono writer; samples are rounded and clipped to the int16 range.
void write_wav(const std::string& path, const Waveform& wave);

}  // namespace aetsep
