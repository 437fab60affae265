#pragma once

// The .ucb token stream: a 27-byte little-endian header followed by the
// token payload, ceil(log2 C) bits per token, MSB first, frame-major.

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "ucodec/token_grid.hpp"

namespace ucodec {

inline constexpr std::size_t kStreamHeaderBytes = 27;
inline constexpr std::uint8_t kStreamVersion = 1;

struct StreamHeader {
    std::uint32_t sample_rate = 16000;
    std::uint16_t frame_rate_num = 5;
    std::uint16_t frame_rate_den = 1;
    std::uint16_t n_quantizers = 0;
    std::uint32_t codebook_size = 0;
    std::uint32_t frames = 0;
    std::uint32_t original_length = 0;

    bool operator==(const StreamHeader&) const = default;
};

// ceil(log2 C); C < 2 is a configuration error.
int bits_per_token(std::int64_t codebook_size);

// S * N * log2(C) bits per second.
double bitrate_bps(double frame_rate, int n_quantizers, std::int64_t codebook_size);
double token_rate(double frame_rate, int n_quantizers);

std::size_t payload_bits(const StreamHeader& h);

std::vector<std::uint8_t> pack(const TokenGrid& grid, const StreamHeader& header);

struct Unpacked {
    StreamHeader header;
    TokenGrid grid;
};

// Bad magic or version: format error. Truncated or oversized payload, or an
// id >= C: corrupt-stream error.
Unpacked unpack(std::span<const std::uint8_t> bytes);

void write_stream(const std::filesystem::path& path, const TokenGrid& grid, const StreamHeader& header);
Unpacked read_stream(const std::filesystem::path& path);

}  // namespace ucodec
