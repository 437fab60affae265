#pragma once

// 16-bit PCM mono WAV files. Reading validates rather than converts: any
// other rate, channel count or encoding is a format error.

#include <filesystem>
#include <vector>

namespace ucodec {

inline constexpr int kWavSampleRate = 16000;

// Samples scaled by 1/32768.
std::vector<double> read_wav(const std::filesystem::path& path, int expected_rate = kWavSampleRate);

// Clamps to [-1, 1] and rounds to the nearest 16-bit step.
void write_wav(const std::filesystem::path& path, const std::vector<double>& samples, int sample_rate = kWavSampleRate);

std::vector<unsigned char> encode_wav(const std::vector<double>& samples, int sample_rate = kWavSampleRate);
std::vector<double> decode_wav(const std::vector<unsigned char>& bytes, int expected_rate = kWavSampleRate);

}  // namespace ucodec
