#include "ucodec/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "ucodec/error.hpp"

namespace ucodec {

namespace {

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) {
        out.push_back(static_cast<unsigned char>(v >> (8 * i)));
    }
}

void put_u16(std::vector<unsigned char>& out, std::uint16_t v) {
    out.push_back(static_cast<unsigned char>(v));
    out.push_back(static_cast<unsigned char>(v >> 8));
}

std::uint32_t get_u32(const std::vector<unsigned char>& b, std::size_t at) {
    return static_cast<std::uint32_t>(b[at]) | (static_cast<std::uint32_t>(b[at + 1]) << 8) |
           (static_cast<std::uint32_t>(b[at + 2]) << 16) | (static_cast<std::uint32_t>(b[at + 3]) << 24);
}

std::uint16_t get_u16(const std::vector<unsigned char>& b, std::size_t at) {
    return static_cast<std::uint16_t>(b[at] | (b[at + 1] << 8));
}

}  // namespace

std::vector<unsigned char> encode_wav(const std::vector<double>& samples, int sample_rate) {
    const std::uint32_t data_bytes = static_cast<std::uint32_t>(samples.size() * 2);
    std::vector<unsigned char> out;
    out.reserve(44 + data_bytes);
    out.insert(out.end(), {'R', 'I', 'F', 'F'});
    put_u32(out, 36 + data_bytes);
    out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
    put_u32(out, 16);
    put_u16(out, 1);  // PCM
    put_u16(out, 1);  // mono
    put_u32(out, static_cast<std::uint32_t>(sample_rate));
    put_u32(out, static_cast<std::uint32_t>(sample_rate) * 2);
    put_u16(out, 2);
    put_u16(out, 16);
    out.insert(out.end(), {'d', 'a', 't', 'a'});
    put_u32(out, data_bytes);
    for (double s : samples) {
        const double clamped = std::clamp(s, -1.0, 1.0);
        const long q = std::clamp(std::lround(clamped * 32768.0), -32768L, 32767L);
        put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
    }
    return out;
}

std::vector<double> decode_wav(const std::vector<unsigned char>& b, int expected_rate) {
    require(b.size() >= 12 && std::memcmp(b.data(), "RIFF", 4) == 0 && std::memcmp(b.data() + 8, "WAVE", 4) == 0,
            ErrorKind::Format, "not a RIFF/WAVE file");
    bool have_fmt = false;
    std::size_t pos = 12;
    while (pos + 8 <= b.size()) {
        const std::string id(b.begin() + static_cast<long>(pos), b.begin() + static_cast<long>(pos) + 4);
        const std::uint32_t size = get_u32(b, pos + 4);
        const std::size_t body = pos + 8;
        require(body + size <= b.size(), ErrorKind::Format, "wav chunk '" + id + "' runs past end of file");
        if (id == "fmt ") {
            require(size >= 16, ErrorKind::Format, "wav fmt chunk too short");
            const auto encoding = get_u16(b, body);
            const auto channels = get_u16(b, body + 2);
            const auto rate = get_u32(b, body + 4);
            const auto bits = get_u16(b, body + 14);
            require(encoding == 1, ErrorKind::Format, "wav encoding " + std::to_string(encoding) + " is not PCM (1)");
            require(channels == 1, ErrorKind::Format, "wav channel count " + std::to_string(channels) + ", expected 1");
            require(static_cast<int>(rate) == expected_rate, ErrorKind::Format,
                    "wav sample rate " + std::to_string(rate) + ", expected " + std::to_string(expected_rate));
            require(bits == 16, ErrorKind::Format, "wav bits per sample " + std::to_string(bits) + ", expected 16");
            have_fmt = true;
        } else if (id == "data") {
            require(have_fmt, ErrorKind::Format, "wav data chunk before fmt chunk");
            require(size % 2 == 0, ErrorKind::Format, "wav data size is not a whole number of samples");
            std::vector<double> out(size / 2);
            for (std::size_t i = 0; i < out.size(); ++i) {
                out[i] = static_cast<std::int16_t>(get_u16(b, body + 2 * i)) / 32768.0;
            }
            return out;
        }
        pos = body + size + (size & 1);
    }
    fail(ErrorKind::Format, have_fmt ? "wav has no data chunk" : "wav has no fmt chunk");
}

std::vector<double> read_wav(const std::filesystem::path& path, int expected_rate) {
    std::ifstream f(path, std::ios::binary);
    require(static_cast<bool>(f), ErrorKind::Io, "cannot open " + path.string());
    const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return decode_wav(bytes, expected_rate);
}

void write_wav(const std::filesystem::path& path, const std::vector<double>& samples, int sample_rate) {
    const auto bytes = encode_wav(samples, sample_rate);
    std::ofstream f(path, std::ios::binary);
    require(static_cast<bool>(f), ErrorKind::Io, "cannot open " + path.string() + " for writing");
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    require(static_cast<bool>(f), ErrorKind::Io, "write failed for " + path.string());
}

}  // namespace ucodec
