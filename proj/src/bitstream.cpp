#include "ucodec/bitstream.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "ucodec/error.hpp"

namespace ucodec {

namespace {

constexpr char kMagic[4] = {'U', 'C', 'B', '1'};

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        out.push_back(static_cast<std::uint8_t>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xFF));
    }
}

template <typename T>
T get_le(std::span<const std::uint8_t> in, std::size_t& pos) {
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        v |= static_cast<std::uint64_t>(in[pos + i]) << (8 * i);
    }
    pos += sizeof(T);
    return static_cast<T>(v);
}

}  // namespace

int bits_per_token(std::int64_t codebook_size) {
    require(codebook_size >= 2, ErrorKind::Configuration,
            "codebook size " + std::to_string(codebook_size) + " must be at least 2");
    int bits = 0;
    while ((std::int64_t{1} << bits) < codebook_size) {
        ++bits;
    }
    return bits;
}

double bitrate_bps(double frame_rate, int n_quantizers, std::int64_t codebook_size) {
    require(codebook_size >= 2, ErrorKind::Configuration, "bitrate: codebook size must be at least 2");
    return frame_rate * n_quantizers * std::log2(static_cast<double>(codebook_size));
}

double token_rate(double frame_rate, int n_quantizers) { return frame_rate * n_quantizers; }

std::size_t payload_bits(const StreamHeader& h) {
    return static_cast<std::size_t>(h.frames) * h.n_quantizers * static_cast<std::size_t>(bits_per_token(h.codebook_size));
}

std::vector<std::uint8_t> pack(const TokenGrid& grid, const StreamHeader& header) {
    require(grid.frames == static_cast<int>(header.frames) && grid.layers == header.n_quantizers &&
                grid.codes.size() == static_cast<std::size_t>(grid.frames) * grid.layers,
            ErrorKind::Configuration, "pack: grid shape does not match header");
    require(header.frame_rate_den != 0, ErrorKind::Configuration, "pack: zero frame-rate denominator");
    const int bits = bits_per_token(header.codebook_size);
    std::vector<std::uint8_t> out;
    out.reserve(kStreamHeaderBytes + (payload_bits(header) + 7) / 8);
    out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
    out.push_back(kStreamVersion);
    put_le<std::uint32_t>(out, header.sample_rate);
    put_le<std::uint16_t>(out, header.frame_rate_num);
    put_le<std::uint16_t>(out, header.frame_rate_den);
    put_le<std::uint16_t>(out, header.n_quantizers);
    put_le<std::uint32_t>(out, header.codebook_size);
    put_le<std::uint32_t>(out, header.frames);
    put_le<std::uint32_t>(out, header.original_length);

    std::uint8_t acc = 0;
    int filled = 0;
    for (int code : grid.codes) {
        require(code >= 0 && static_cast<std::uint32_t>(code) < header.codebook_size, ErrorKind::Index,
                "pack: code " + std::to_string(code) + " outside [0, " + std::to_string(header.codebook_size) + ")");
        for (int b = bits - 1; b >= 0; --b) {
            acc = static_cast<std::uint8_t>((acc << 1) | ((code >> b) & 1));
            if (++filled == 8) {
                out.push_back(acc);
                acc = 0;
                filled = 0;
            }
        }
    }
    if (filled > 0) {
        out.push_back(static_cast<std::uint8_t>(acc << (8 - filled)));
    }
    return out;
}

Unpacked unpack(std::span<const std::uint8_t> bytes) {
    require(bytes.size() >= kStreamHeaderBytes, ErrorKind::Format,
            "stream shorter than the " + std::to_string(kStreamHeaderBytes) + "-byte header");
    require(std::memcmp(bytes.data(), kMagic, 4) == 0, ErrorKind::Format, "bad magic, expected UCB1");
    require(bytes[4] == kStreamVersion, ErrorKind::Format, "unsupported stream version " + std::to_string(bytes[4]));
    std::size_t pos = 5;
    Unpacked u;
    u.header.sample_rate = get_le<std::uint32_t>(bytes, pos);
    u.header.frame_rate_num = get_le<std::uint16_t>(bytes, pos);
    u.header.frame_rate_den = get_le<std::uint16_t>(bytes, pos);
    u.header.n_quantizers = get_le<std::uint16_t>(bytes, pos);
    u.header.codebook_size = get_le<std::uint32_t>(bytes, pos);
    u.header.frames = get_le<std::uint32_t>(bytes, pos);
    u.header.original_length = get_le<std::uint32_t>(bytes, pos);
    require(u.header.codebook_size >= 2 && u.header.n_quantizers >= 1 && u.header.frame_rate_den != 0,
            ErrorKind::Format, "stream header has an invalid codebook size, layer count or frame rate");

    const int bits = bits_per_token(u.header.codebook_size);
    const std::size_t expected = (payload_bits(u.header) + 7) / 8;
    const std::size_t actual = bytes.size() - kStreamHeaderBytes;
    require(actual == expected, ErrorKind::CorruptStream,
            "payload is " + std::to_string(actual) + " bytes, header implies " + std::to_string(expected));

    u.grid = TokenGrid(static_cast<int>(u.header.frames), u.header.n_quantizers);
    std::size_t bit = 0;
    const auto payload = bytes.subspan(kStreamHeaderBytes);
    for (int& code : u.grid.codes) {
        std::uint32_t v = 0;
        for (int b = 0; b < bits; ++b, ++bit) {
            v = (v << 1) | ((payload[bit / 8] >> (7 - bit % 8)) & 1u);
        }
        require(v < u.header.codebook_size, ErrorKind::CorruptStream,
                "decoded id " + std::to_string(v) + " >= codebook size " + std::to_string(u.header.codebook_size));
        code = static_cast<int>(v);
    }
    return u;
}

void write_stream(const std::filesystem::path& path, const TokenGrid& grid, const StreamHeader& header) {
    const auto bytes = pack(grid, header);
    std::ofstream f(path, std::ios::binary);
    require(static_cast<bool>(f), ErrorKind::Io, "cannot open " + path.string() + " for writing");
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    require(static_cast<bool>(f), ErrorKind::Io, "write failed for " + path.string());
}

Unpacked read_stream(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    require(static_cast<bool>(f), ErrorKind::Io, "cannot open " + path.string());
    const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return unpack(bytes);
}

}  // namespace ucodec
