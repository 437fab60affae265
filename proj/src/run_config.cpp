#include "ucodec/run_config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fstream>
#include <functional>
#include <iomanip>
#include <algorithm>
#include <sstream>

#include "ucodec/error.hpp"

namespace ucodec {

namespace pt = boost::property_tree;

namespace {

std::vector<int> parse_int_list(const std::string& key, const std::string& text) {
    std::vector<int> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stoi(item, &used));
            require(item.find_first_not_of(" \t", used) == std::string::npos, ErrorKind::Configuration,
                    key + ": trailing characters in '" + item + "'");
        } catch (const std::logic_error&) {
            fail(ErrorKind::Configuration, key + ": '" + item + "' is not an integer");
        }
    }
    require(!out.empty(), ErrorKind::Configuration, key + ": empty list");
    return out;
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
    std::istringstream ss(text);
    T v{};
    ss >> v;
    require(!ss.fail() && (ss >> std::ws).eof(), ErrorKind::Configuration,
            key + ": '" + text + "' is not a valid number");
    return v;
}

std::string fmt(double v) {
    std::ostringstream ss;
    ss << std::setprecision(17) << v;
    return ss.str();
}

using Setter = std::function<void(RunConfig&, const std::string&)>;
using Getter = std::function<std::string(const RunConfig&)>;

struct Key {
    Setter set;
    Getter get;
};

template <typename T, typename Field>
Key number(Field field) {
    return {[field](RunConfig& c, const std::string& v) { field(c) = parse_number<T>("value", v); },
            [field](const RunConfig& c) {
                RunConfig copy = c;
                if constexpr (std::is_floating_point_v<T>) {
                    return fmt(field(copy));
                } else {
                    return std::to_string(field(copy));
                }
            }};
}

// Section -> key -> accessor, in listing order.
const std::vector<std::pair<std::string, std::vector<std::pair<std::string, Key>>>>& schema() {
    static const auto table = [] {
        std::vector<std::pair<std::string, std::vector<std::pair<std::string, Key>>>> s;
        s.push_back({"codec",
                     {
                         {"sample_rate", number<int>([](RunConfig& c) -> int& { return c.codec.sample_rate; })},
                         {"strides",
                          {[](RunConfig& c, const std::string& v) { c.codec.strides = parse_int_list("codec.strides", v); },
                           [](const RunConfig& c) {
                               std::string out;
                               for (std::size_t i = 0; i < c.codec.strides.size(); ++i) {
                                   out += (i ? "," : "") + std::to_string(c.codec.strides[i]);
                               }
                               return out;
                           }}},
                         {"base_channels", number<int>([](RunConfig& c) -> int& { return c.codec.base_channels; })},
                         {"latent_dim", number<int>([](RunConfig& c) -> int& { return c.codec.latent_dim; })},
                         {"bottleneck_layers", number<int>([](RunConfig& c) -> int& { return c.codec.bottleneck.layers; })},
                         {"bottleneck_heads", number<int>([](RunConfig& c) -> int& { return c.codec.bottleneck.heads; })},
                         {"bottleneck_hidden", number<int>([](RunConfig& c) -> int& { return c.codec.bottleneck.hidden; })},
                         {"bottleneck_mlp", number<int>([](RunConfig& c) -> int& { return c.codec.bottleneck.mlp; })},
                         {"decoder_channels",
                          number<int>([](RunConfig& c) -> int& { return c.codec.decoder_start_channels; })},
                         {"n_quantizers", number<int>([](RunConfig& c) -> int& { return c.codec.n_quantizers; })},
                         {"codebook_size", number<int>([](RunConfig& c) -> int& { return c.codec.codebook_size; })},
                         {"proj_dim", number<int>([](RunConfig& c) -> int& { return c.codec.proj_dim; })},
                     }});
        s.push_back({"train",
                     {
                         {"steps", number<long long>([](RunConfig& c) -> long long& { return c.train.steps; })},
                         {"lr", number<double>([](RunConfig& c) -> double& { return c.train.lr; })},
                         {"warmup_steps", number<int>([](RunConfig& c) -> int& { return c.train.warmup; })},
                         {"batch", number<int>([](RunConfig& c) -> int& { return c.train.batch; })},
                         {"excerpt", number<int>([](RunConfig& c) -> int& { return c.train.excerpt; })},
                         {"max_grad_norm", number<double>([](RunConfig& c) -> double& { return c.train.max_grad_norm; })},
                         {"seed", number<std::uint64_t>([](RunConfig& c) -> std::uint64_t& { return c.train.seed; })},
                         {"checkpoint_every", number<int>([](RunConfig& c) -> int& { return c.train.checkpoint_every; })},
                         {"mel_weight", number<double>([](RunConfig& c) -> double& { return c.train.weights.mel; })},
                         {"adversarial_weight",
                          number<double>([](RunConfig& c) -> double& { return c.train.weights.adversarial; })},
                         {"feature_matching_weight",
                          number<double>([](RunConfig& c) -> double& { return c.train.weights.feature_matching; })},
                         {"codebook_weight", number<double>([](RunConfig& c) -> double& { return c.train.weights.codebook; })},
                         {"commitment_weight",
                          number<double>([](RunConfig& c) -> double& { return c.train.weights.commitment; })},
                     }});
        s.push_back({"lm",
                     {
                         {"global_layers", number<int>([](RunConfig& c) -> int& { return c.lm.global.layers; })},
                         {"global_dim", number<int>([](RunConfig& c) -> int& { return c.lm.global.d_model; })},
                         {"global_heads", number<int>([](RunConfig& c) -> int& { return c.lm.global.heads; })},
                         {"global_ff", number<int>([](RunConfig& c) -> int& { return c.lm.global.ff; })},
                         {"local_layers", number<int>([](RunConfig& c) -> int& { return c.lm.local.layers; })},
                         {"local_dim", number<int>([](RunConfig& c) -> int& { return c.lm.local.d_model; })},
                         {"local_heads", number<int>([](RunConfig& c) -> int& { return c.lm.local.heads; })},
                         {"local_ff", number<int>([](RunConfig& c) -> int& { return c.lm.local.ff; })},
                         {"max_positions", number<int>([](RunConfig& c) -> int& { return c.lm.max_positions; })},
                         {"k_top", number<int>([](RunConfig& c) -> int& { return c.sampler.k_top; })},
                         {"temperature", number<double>([](RunConfig& c) -> double& { return c.sampler.temperature; })},
                         {"max_frames", number<int>([](RunConfig& c) -> int& { return c.max_frames; })},
                         {"steps", number<int>([](RunConfig& c) -> int& { return c.lm_train.steps; })},
                         {"lr", number<double>([](RunConfig& c) -> double& { return c.lm_train.lr; })},
                         {"warmup_steps", number<int>([](RunConfig& c) -> int& { return c.lm_train.warmup_steps; })},
                         {"max_grad_norm", number<double>([](RunConfig& c) -> double& { return c.lm_train.max_grad_norm; })},
                         {"seed", number<std::uint64_t>([](RunConfig& c) -> std::uint64_t& { return c.lm_train.seed; })},
                     }});
        return s;
    }();
    return table;
}

void sync_lm_vocab(RunConfig& c) {
    c.lm.n_quantizers = c.codec.n_quantizers;
    c.lm.codebook_size = c.codec.codebook_size;
}

}  // namespace

void RunConfig::validate() const {
    codec.validate();
    train.validate(codec);
    lm.validate();
    lm_train.validate();
    require(lm.n_quantizers == codec.n_quantizers && lm.codebook_size == codec.codebook_size, ErrorKind::Compatibility,
            "lm and codec disagree on N or C");
    require(max_frames >= 1, ErrorKind::Configuration, "lm.max_frames must be >= 1");
    require(sampler.k_top >= 1, ErrorKind::Configuration, "lm.k_top must be >= 1");
    require(sampler.k_top == 1 || sampler.temperature > 0.0, ErrorKind::Configuration,
            "lm.temperature must be > 0 unless k_top is 1");
}

RunConfig parse_run_config(const std::string& ini_text) {
    pt::ptree tree;
    std::istringstream in(ini_text);
    try {
        pt::ini_parser::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        fail(ErrorKind::Configuration, std::string("config: ") + e.what());
    }
    RunConfig cfg;
    for (const auto& [section, body] : tree) {
        const auto& sections = schema();
        auto sit = std::find_if(sections.begin(), sections.end(), [&](const auto& s) { return s.first == section; });
        require(sit != sections.end(), ErrorKind::Configuration, "config: unknown section [" + section + "]");
        for (const auto& [key, value] : body) {
            auto kit = std::find_if(sit->second.begin(), sit->second.end(), [&](const auto& k) { return k.first == key; });
            require(kit != sit->second.end(), ErrorKind::Configuration,
                    "config: unknown key '" + key + "' in [" + section + "]");
            try {
                kit->second.set(cfg, value.data());
            } catch (const Error& e) {
                fail(ErrorKind::Configuration, "config: " + section + "." + key + ": " + e.what());
            }
        }
    }
    sync_lm_vocab(cfg);
    cfg.validate();
    return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream f(path);
    require(static_cast<bool>(f), ErrorKind::Io, "cannot open config " + path.string());
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_run_config(ss.str());
}

std::string to_ini(const RunConfig& cfg) {
    std::ostringstream out;
    for (const auto& [section, keys] : schema()) {
        out << '[' << section << "]\n";
        for (const auto& [name, key] : keys) {
            out << name << " = " << key.get(cfg) << '\n';
        }
        out << '\n';
    }
    return out.str();
}

std::string codec_section(const CodecConfig& codec) {
    RunConfig c;
    c.codec = codec;
    std::ostringstream out;
    for (const auto& [name, key] : schema().front().second) {
        out << name << " = " << key.get(c) << '\n';
    }
    return out.str();
}

}  // namespace ucodec
