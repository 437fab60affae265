#include "ucodec/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>

#include "json.hpp"
#include "ucodec/error.hpp"

namespace ucodec {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

constexpr const char* kFormat = "ucodec-checkpoint";
constexpr int kVersion = 1;

struct Blob {
    std::string name;
    Shape shape;
    std::span<const double> values;
};

void append_f32(std::vector<unsigned char>& out, double v) {
    const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
    for (int i = 0; i < 4; ++i) {
        out.push_back(static_cast<unsigned char>(bits >> (8 * i)));
    }
}

float read_f32(const std::vector<unsigned char>& b, std::size_t at) {
    std::uint32_t bits = 0;
    for (int i = 0; i < 4; ++i) {
        bits |= static_cast<std::uint32_t>(b[at + i]) << (8 * i);
    }
    return std::bit_cast<float>(bits);
}

void write_file(const fs::path& path, const void* data, std::size_t size) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary);
        require(static_cast<bool>(f), ErrorKind::Io, "cannot write " + tmp.string());
        f.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
        require(static_cast<bool>(f), ErrorKind::Io, "write failed for " + tmp.string());
    }
    fs::rename(tmp, path);
}

ordered_json read_manifest(const fs::path& dir) {
    std::ifstream f(dir / "manifest.json");
    require(static_cast<bool>(f), ErrorKind::Io, "no checkpoint manifest in " + dir.string());
    ordered_json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Format, "checkpoint manifest: " + std::string(e.what()));
    }
    require(j.value("format", "") == kFormat && j.value("version", 0) == kVersion, ErrorKind::Format,
            "checkpoint manifest has an unknown format or version");
    return j;
}

}  // namespace

void save_checkpoint(const fs::path& dir, const ParameterList& params, const std::vector<NamedOptimizer>& optimizers,
                     const CheckpointInfo& info) {
    fs::create_directories(dir);
    std::vector<Blob> blobs;
    for (const auto& p : params) {
        blobs.push_back({p.name, p.tensor.shape(), p.tensor.data()});
    }
    ordered_json opt_meta = ordered_json::array();
    for (const auto& o : optimizers) {
        const auto& ps = o.adam->params();
        for (std::size_t i = 0; i < ps.size(); ++i) {
            blobs.push_back({o.prefix + "." + ps[i].name + ".m", ps[i].tensor.shape(), o.adam->first_moments()[i]});
            blobs.push_back({o.prefix + "." + ps[i].name + ".v", ps[i].tensor.shape(), o.adam->second_moments()[i]});
        }
        opt_meta.push_back({{"prefix", o.prefix}, {"steps", o.adam->steps()}});
    }

    std::vector<unsigned char> bin;
    ordered_json tensors = ordered_json::array();
    for (const auto& b : blobs) {
        tensors.push_back({{"name", b.name}, {"shape", b.shape}, {"offset", bin.size()}, {"count", b.values.size()}});
        for (double v : b.values) {
            append_f32(bin, v);
        }
    }
    ordered_json j;
    j["format"] = kFormat;
    j["version"] = kVersion;
    j["kind"] = info.kind;
    j["step"] = info.step;
    j["dtype"] = "float32-le";
    j["rng_state"] = info.rng_state;
    j["config"] = info.config_ini;
    j["optimizers"] = opt_meta;
    j["tensors"] = tensors;
    write_file(dir / "weights.bin", bin.data(), bin.size());
    const std::string text = j.dump(1) + "\n";
    write_file(dir / "manifest.json", text.data(), text.size());
}

CheckpointInfo read_checkpoint_info(const fs::path& dir) {
    const ordered_json j = read_manifest(dir);
    CheckpointInfo info;
    info.kind = j.value("kind", "");
    info.step = j.value("step", 0LL);
    info.config_ini = j.value("config", "");
    info.rng_state = j.value("rng_state", "");
    return info;
}

void load_checkpoint(const fs::path& dir, ParameterList& params, const std::vector<NamedOptimizer>& optimizers,
                     const std::vector<std::string>& skip_prefixes) {
    const ordered_json j = read_manifest(dir);
    std::ifstream f(dir / "weights.bin", std::ios::binary);
    require(static_cast<bool>(f), ErrorKind::Io, "no weights.bin in " + dir.string());
    const std::vector<unsigned char> bin((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

    struct Entry {
        Shape shape;
        std::size_t offset;
        std::size_t count;
        bool used = false;
    };
    std::map<std::string, Entry> entries;
    for (const auto& t : j.at("tensors")) {
        Entry e{t.at("shape").get<Shape>(), t.at("offset").get<std::size_t>(), t.at("count").get<std::size_t>()};
        require(e.offset + 4 * e.count <= bin.size(), ErrorKind::Format,
                "checkpoint tensor " + t.at("name").get<std::string>() + " runs past the end of weights.bin");
        entries.emplace(t.at("name").get<std::string>(), e);
    }

    auto fill = [&](const std::string& name, const Shape& shape, std::span<double> dst) {
        auto it = entries.find(name);
        require(it != entries.end(), ErrorKind::Compatibility, "checkpoint has no tensor " + name);
        require(it->second.shape == shape, ErrorKind::Compatibility,
                "checkpoint tensor " + name + " is " + shape_string(it->second.shape) + ", model expects " +
                    shape_string(shape));
        for (std::size_t i = 0; i < dst.size(); ++i) {
            dst[i] = read_f32(bin, it->second.offset + 4 * i);
        }
        it->second.used = true;
    };
    for (auto& p : params) {
        fill(p.name, p.tensor.shape(), p.tensor.mutable_data());
    }
    std::map<std::string, long long> opt_steps;
    for (const auto& o : j.value("optimizers", ordered_json::array())) {
        opt_steps[o.at("prefix").get<std::string>()] = o.at("steps").get<long long>();
    }
    for (const auto& o : optimizers) {
        auto it = opt_steps.find(o.prefix);
        require(it != opt_steps.end(), ErrorKind::Compatibility, "checkpoint has no optimizer state " + o.prefix);
        o.adam->set_steps(it->second);
        const auto& ps = o.adam->params();
        for (std::size_t i = 0; i < ps.size(); ++i) {
            fill(o.prefix + "." + ps[i].name + ".m", ps[i].tensor.shape(), o.adam->first_moments()[i]);
            fill(o.prefix + "." + ps[i].name + ".v", ps[i].tensor.shape(), o.adam->second_moments()[i]);
        }
    }
    for (auto& [name, e] : entries) {
        // Inference loads may leave optimizer state unread but nothing else.
        const bool optimizer_state = std::any_of(opt_steps.begin(), opt_steps.end(), [&](const auto& o) {
            return name.rfind(o.first + ".", 0) == 0;
        });
        const bool skipped = std::any_of(skip_prefixes.begin(), skip_prefixes.end(),
                                         [&](const std::string& p) { return name.rfind(p, 0) == 0; });
        require(e.used || skipped || (optimizer_state && optimizers.empty()), ErrorKind::Compatibility,
                "checkpoint tensor " + name + " has no counterpart in the model");
    }
}

}  // namespace ucodec
