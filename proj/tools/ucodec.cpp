// Command-line driver: codec train/encode/decode/eval, LM train/synth,
// complexity benchmarks and stream inspection.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "json.hpp"
#include "ucodec/error.hpp"
#include "ucodec/kernels.hpp"
#include "ucodec/wav.hpp"
#include "ucodec/workflows.hpp"

namespace fs = std::filesystem;
using namespace ucodec;

namespace {

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
};

void add_common(CLI::App* cmd, Common& c, bool out_required) {
    cmd->add_option("--config", c.config, "INI run configuration")->check(CLI::ExistingFile);
    cmd->add_option("--seed", c.seed, "seed for every random draw of the command");
    auto* out = cmd->add_option("--out", c.out, "output path");
    if (out_required) {
        out->required();
    }
}

RunConfig load_config(const Common& c) {
    RunConfig cfg = c.config.empty() ? RunConfig{} : load_run_config(c.config);
    if (c.seed) {
        cfg.train.seed = *c.seed;
        cfg.lm_train.seed = *c.seed;
    }
    cfg.validate();
    return cfg;
}

// Writes to --out when given, otherwise stdout.
void emit(const std::string& out, const std::string& text) {
    if (out.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream f(out, std::ios::binary);
    require(static_cast<bool>(f), ErrorKind::Io, "cannot write " + out);
    f << text;
    require(static_cast<bool>(f), ErrorKind::Io, "write failed for " + out);
}

std::string header_json(const StreamHeader& h, const Unpacked* u) {
    nlohmann::ordered_json j;
    j["sample_rate"] = h.sample_rate;
    j["frame_rate"] = static_cast<double>(h.frame_rate_num) / h.frame_rate_den;
    j["frame_rate_num"] = h.frame_rate_num;
    j["frame_rate_den"] = h.frame_rate_den;
    j["n_quantizers"] = h.n_quantizers;
    j["codebook_size"] = h.codebook_size;
    j["frames"] = h.frames;
    j["original_length"] = h.original_length;
    j["bits_per_token"] = bits_per_token(h.codebook_size);
    j["bitrate_bps"] = bitrate_bps(static_cast<double>(h.frame_rate_num) / h.frame_rate_den, h.n_quantizers,
                                   h.codebook_size);
    j["payload_bytes"] = (payload_bits(h) + 7) / 8;
    if (u != nullptr) {
        auto ppl = nlohmann::json::array();
        for (int k = 0; k < u->grid.layers; ++k) {
            ppl.push_back(codebook_usage(u->grid, k, static_cast<int>(h.codebook_size)).perplexity);
        }
        j["perplexity"] = ppl;
    }
    return j.dump(2) + "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Low-frame-rate speech codec and token language model"};
    app.require_subcommand(1);

    auto* codec = app.add_subcommand("codec", "train and run the codec");
    codec->require_subcommand(1);
    auto* lm = app.add_subcommand("lm", "train and sample the token language model");
    lm->require_subcommand(1);
    auto* bench = app.add_subcommand("bench", "complexity and speed reports");
    bench->require_subcommand(1);

    Common common;
    std::string data;
    std::string ckpt;
    std::string input;
    std::string codec_dir;
    std::string lm_dir;
    std::string text;
    std::string prompt;
    std::string tokens_out;
    std::string format = "csv";
    std::optional<int> max_frames;
    std::optional<int> k_top;
    std::optional<double> temperature;
    bool resume = false;
    bool no_eos = false;
    double seconds = 10.0;
    int runs = 3;
    int threads = 1;

    auto* c_train = codec->add_subcommand("train", "train a codec on a directory of WAV files");
    add_common(c_train, common, true);
    c_train->add_option("--data", data, "directory of 16 kHz mono PCM16 WAV files")->required();
    c_train->add_flag("--resume", resume, "continue from the checkpoint in --out");

    auto* c_encode = codec->add_subcommand("encode", "WAV to .ucb");
    add_common(c_encode, common, true);
    c_encode->add_option("input", input, "input WAV")->required();
    c_encode->add_option("--ckpt", ckpt, "codec checkpoint directory")->required();

    auto* c_decode = codec->add_subcommand("decode", ".ucb to WAV");
    add_common(c_decode, common, true);
    c_decode->add_option("input", input, "input .ucb")->required();
    c_decode->add_option("--ckpt", ckpt, "codec checkpoint directory")->required();

    auto* c_eval = codec->add_subcommand("eval", "reconstruction quality and bitrate as JSON");
    add_common(c_eval, common, false);
    c_eval->add_option("input", input, "input WAV")->required();
    c_eval->add_option("--ckpt", ckpt, "codec checkpoint directory")->required();

    auto* l_train = lm->add_subcommand("train", "train on pairs of name.ucb / name.txt");
    add_common(l_train, common, true);
    l_train->add_option("--data", data, "corpus directory")->required();
    l_train->add_option("--codec", codec_dir, "codec checkpoint whose N and C the LM adopts");
    l_train->add_flag("--resume", resume, "continue from the checkpoint in --out");

    auto* l_synth = lm->add_subcommand("synth", "text (and optional prompt) to WAV");
    add_common(l_synth, common, true);
    l_synth->add_option("--lm", lm_dir, "LM checkpoint directory")->required();
    l_synth->add_option("--codec", codec_dir, "codec checkpoint directory")->required();
    l_synth->add_option("--text", text, "input text")->required();
    l_synth->add_option("--prompt", prompt, ".ucb whose frames prefix the generation")->check(CLI::ExistingFile);
    l_synth->add_option("--tokens", tokens_out, "also write the generated tokens as .ucb");
    l_synth->add_option("--max-frames", max_frames, "frame limit");
    l_synth->add_option("--k-top", k_top, "top-k sampling width (1 = greedy)");
    l_synth->add_option("--temperature", temperature, "sampling temperature");
    l_synth->add_flag("--no-eos", no_eos, "never stop early; always produce max-frames frames");

    auto* b_macs = bench->add_subcommand("macs", "per-frame MAC table");
    add_common(b_macs, common, false);
    b_macs->add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));

    auto* b_rtf = bench->add_subcommand("rtf", "time desk-scale token generation");
    add_common(b_rtf, common, false);
    b_rtf->add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
    b_rtf->add_option("--seconds", seconds, "audio seconds to generate")->check(CLI::PositiveNumber);
    b_rtf->add_option("--runs", runs, "timed runs; the median is reported")->check(CLI::Range(3, 1000));
    b_rtf->add_option("--threads", threads, "kernel threads during timing")->check(CLI::Range(1, 1024));

    auto* inspect = app.add_subcommand("inspect", "print a .ucb header as JSON");
    inspect->add_option("file", input, ".ucb file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        // --help exits 0; every argument error is a usage error.
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        if (*c_train) {
            const RunConfig cfg = load_config(common);
            const WaveCorpus corpus = load_wave_corpus(data, cfg.codec.sample_rate);
            fs::create_directories(common.out);
            std::ofstream metrics(fs::path(common.out) / "metrics.jsonl", resume ? std::ios::app : std::ios::trunc);
            require(static_cast<bool>(metrics), ErrorKind::Io, "cannot write metrics in " + common.out);
            const StepReport last = train_codec(cfg, corpus, common.out, &metrics, resume);
            std::cout << last.to_json() << "\n";
        } else if (*c_encode) {
            const RunConfig expected = load_config(common);
            const LoadedCodec codec = load_codec(ckpt, common.config.empty() ? nullptr : &expected);
            const auto samples = read_wav(input, codec.config.codec.sample_rate);
            const Unpacked enc = encode_samples(*codec.model, samples);
            write_stream(common.out, enc.grid, enc.header);
        } else if (*c_decode) {
            const Unpacked stream = read_stream(input);
            const RunConfig cfg = read_codec_config(ckpt);
            check_stream_matches(cfg.codec, stream.header);
            const LoadedCodec codec = load_codec(ckpt);
            write_wav(common.out, decode_stream(*codec.model, stream), cfg.codec.sample_rate);
        } else if (*c_eval) {
            const RunConfig expected = load_config(common);
            const LoadedCodec codec = load_codec(ckpt, common.config.empty() ? nullptr : &expected);
            const auto samples = read_wav(input, codec.config.codec.sample_rate);
            const std::string json = evaluate_codec(*codec.model, samples).to_json() + "\n";
            std::cout << json;
            if (!common.out.empty()) {
                emit(common.out, json);
            }
        } else if (*l_train) {
            RunConfig cfg = load_config(common);
            if (!codec_dir.empty()) {
                cfg.codec = read_codec_config(codec_dir).codec;
                cfg.lm.n_quantizers = cfg.codec.n_quantizers;
                cfg.lm.codebook_size = cfg.codec.codebook_size;
                cfg.validate();
            }
            const auto corpus = load_lm_corpus(data, cfg.lm);
            fs::create_directories(common.out);
            std::ofstream metrics(fs::path(common.out) / "metrics.jsonl", resume ? std::ios::app : std::ios::trunc);
            require(static_cast<bool>(metrics), ErrorKind::Io, "cannot write metrics in " + common.out);
            const LmStepReport last = train_lm(cfg, corpus, common.out, &metrics, resume);
            std::cout << last.to_json() << "\n";
        } else if (*l_synth) {
            const RunConfig codec_cfg = read_codec_config(codec_dir);
            std::optional<Unpacked> prompt_stream;
            if (!prompt.empty()) {
                prompt_stream = read_stream(prompt);
                check_stream_matches(codec_cfg.codec, prompt_stream->header);
            }
            const LoadedLm model = load_lm(lm_dir, &codec_cfg.codec);
            const LoadedCodec codec = load_codec(codec_dir);
            const RunConfig run = common.config.empty() ? model.config : load_config(common);
            SamplerConfig sampler = run.sampler;
            if (k_top) {
                sampler.k_top = *k_top;
            }
            if (temperature) {
                sampler.temperature = *temperature;
            }
            sampler.allow_eos = !no_eos;
            const int frames = max_frames.value_or(run.max_frames);
            require(frames >= 1, ErrorKind::Usage, "--max-frames must be positive");
            const Synthesis s = synthesize_speech(*model.model, *codec.model, text,
                                                  prompt_stream ? &prompt_stream->grid : nullptr, frames, sampler,
                                                  common.seed.value_or(0));
            write_wav(common.out, s.wave, codec_cfg.codec.sample_rate);
            if (!tokens_out.empty()) {
                write_stream(tokens_out, s.grid,
                             stream_header(codec_cfg.codec, s.grid, s.wave.size()));
            }
            nlohmann::ordered_json j;
            j["frames"] = s.grid.frames;
            j["seconds"] = static_cast<double>(s.wave.size()) / codec_cfg.codec.sample_rate;
            j["global_positions"] = s.counters.global_positions();
            j["local_positions"] = s.counters.local_positions;
            std::cout << j.dump() << "\n";
        } else if (*b_macs) {
            const auto rows = mac_report(load_config(common));
            emit(common.out, format == "csv" ? mac_csv(rows) : mac_json(rows) + "\n");
        } else if (*b_rtf) {
            const RunConfig cfg = load_config(common);
            kernels::set_max_threads(threads);
            const auto rows = rtf_report(cfg, seconds, runs, common.seed.value_or(0));
            std::vector<MacBreakdown> table;
            for (const auto& r : rows) {
                table.push_back(r.row);
            }
            if (format == "csv") {
                emit(common.out, mac_csv(table));
            } else {
                auto arr = nlohmann::ordered_json::array();
                for (const auto& r : rows) {
                    nlohmann::ordered_json j = nlohmann::ordered_json::parse(mac_json({r.row}))[0];
                    j["wall_seconds"] = r.timing.wall_seconds;
                    j["audio_seconds"] = r.timing.audio_seconds;
                    j["runs"] = r.timing.runs;
                    j["global_positions"] = r.counters.global_positions();
                    j["local_positions"] = r.counters.local_positions;
                    j["note"] = r.timing.note;
                    arr.push_back(j);
                }
                emit(common.out, arr.dump(2) + "\n");
            }
        } else if (*inspect) {
            const Unpacked u = read_stream(input);
            std::cout << header_json(u.header, &u);
        }
    } catch (const Error& e) {
        std::cerr << "ucodec: " << e.what() << "\n";
        return e.kind() == ErrorKind::Usage ? 2 : 1;
    } catch (const std::exception& e) {
        std::cerr << "ucodec: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
