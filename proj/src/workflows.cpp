#include "ucodec/workflows.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "ucodec/checkpoint.hpp"
#include "ucodec/error.hpp"
#include "ucodec/kernels.hpp"
#include "ucodec/wav.hpp"

namespace ucodec {

namespace {

constexpr const char* kGenOptim = "optim.generator";
constexpr const char* kDiscOptim = "optim.discriminator";
constexpr const char* kLmOptim = "optim.lm";

std::vector<fs::path> files_with_extension(const fs::path& dir, const std::string& ext) {
    require(fs::is_directory(dir), ErrorKind::Dataset, dir.string() + " is not a directory");
    std::vector<fs::path> out;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.is_regular_file() && e.path().extension() == ext) {
            out.push_back(e.path());
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::string read_text(const fs::path& path) {
    std::ifstream f(path, std::ios::binary);
    require(static_cast<bool>(f), ErrorKind::Io, "cannot open " + path.string());
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

std::string rng_state(const Rng& rng) {
    std::ostringstream ss;
    ss << rng;
    return ss.str();
}

RunConfig config_from_checkpoint(const CheckpointInfo& info, const fs::path& dir) {
    try {
        return parse_run_config(info.config_ini);
    } catch (const Error& e) {
        fail(ErrorKind::Format, "checkpoint " + dir.string() + " carries an unreadable config: " + e.what());
    }
}

}  // namespace

WaveCorpus load_wave_corpus(const fs::path& dir, int sample_rate) {
    const auto files = files_with_extension(dir, ".wav");
    require(!files.empty(), ErrorKind::Dataset, "no .wav files in " + dir.string());
    std::vector<std::vector<double>> clips;
    for (const auto& f : files) {
        clips.push_back(read_wav(f, sample_rate));
        require(!clips.back().empty(), ErrorKind::Dataset, f.string() + " holds no samples");
    }
    return WaveCorpus(std::move(clips));
}

std::vector<int> text_to_ids(const std::string& text) {
    std::vector<int> ids;
    ids.reserve(text.size());
    for (unsigned char c : text) {
        ids.push_back(c);
    }
    return ids;
}

std::vector<SequenceLayout> load_lm_corpus(const fs::path& dir, const LmConfig& lm) {
    const auto streams = files_with_extension(dir, ".ucb");
    require(!streams.empty(), ErrorKind::Dataset, "no .ucb files in " + dir.string());
    std::vector<SequenceLayout> out;
    for (const auto& s : streams) {
        fs::path text_path = s;
        text_path.replace_extension(".txt");
        require(fs::exists(text_path), ErrorKind::Dataset, "missing transcript " + text_path.string());
        Unpacked u = read_stream(s);
        require(u.header.n_quantizers == lm.n_quantizers && static_cast<int>(u.header.codebook_size) == lm.codebook_size,
                ErrorKind::Compatibility,
                s.string() + " has N=" + std::to_string(u.header.n_quantizers) + ", C=" +
                    std::to_string(u.header.codebook_size) + "; the LM expects N=" + std::to_string(lm.n_quantizers) +
                    ", C=" + std::to_string(lm.codebook_size));
        std::string text = read_text(text_path);
        while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) {
            text.pop_back();
        }
        out.push_back({text_to_ids(text), std::move(u.grid), true});
    }
    return out;
}

void save_codec_checkpoint(const fs::path& dir, CodecTrainer& trainer, const RunConfig& cfg) {
    ParameterList params;
    trainer.model().collect(params);
    trainer.discriminators().collect(params);
    CheckpointInfo info{"codec", trainer.steps_done(), to_ini(cfg), rng_state(trainer.repair_rng())};
    save_checkpoint(dir, params,
                    {{kGenOptim, &trainer.generator_optimizer()}, {kDiscOptim, &trainer.discriminator_optimizer()}},
                    info);
}

void restore_codec_trainer(const fs::path& dir, CodecTrainer& trainer) {
    const CheckpointInfo info = read_checkpoint_info(dir);
    require(info.kind == "codec", ErrorKind::Compatibility, dir.string() + " is not a codec checkpoint");
    ParameterList params;
    trainer.model().collect(params);
    trainer.discriminators().collect(params);
    load_checkpoint(dir, params,
                    {{kGenOptim, &trainer.generator_optimizer()}, {kDiscOptim, &trainer.discriminator_optimizer()}});
    trainer.set_steps_done(info.step);
    if (!info.rng_state.empty()) {
        std::istringstream ss(info.rng_state);
        ss >> trainer.repair_rng();
    }
}

StepReport train_codec(const RunConfig& cfg, const WaveCorpus& corpus, const fs::path& out, std::ostream* metrics,
                       bool resume) {
    cfg.validate();
    CodecTrainer trainer(cfg.codec, DiscriminatorConfig{}, cfg.train);
    if (resume) {
        const RunConfig saved = config_from_checkpoint(read_checkpoint_info(out), out);
        require(codec_section(saved.codec) == codec_section(cfg.codec), ErrorKind::Compatibility,
                "resume: codec settings differ from the checkpoint in " + out.string());
        restore_codec_trainer(out, trainer);
    }
    StepReport last;
    const int hop = cfg.codec.hop();
    while (trainer.steps_done() < cfg.train.steps) {
        const long long s = trainer.steps_done();
        last = trainer.step(corpus.sample(cfg.train.batch, cfg.train.excerpt, hop, cfg.train.seed, s));
        if (metrics != nullptr) {
            *metrics << last.to_json() << '\n';
        }
        if (trainer.steps_done() % cfg.train.checkpoint_every == 0 || trainer.steps_done() == cfg.train.steps) {
            save_codec_checkpoint(out, trainer, cfg);
            if (metrics != nullptr) {
                metrics->flush();
            }
        }
    }
    return last;
}

RunConfig read_codec_config(const fs::path& dir) {
    const CheckpointInfo info = read_checkpoint_info(dir);
    require(info.kind == "codec", ErrorKind::Compatibility, dir.string() + " is not a codec checkpoint");
    return config_from_checkpoint(info, dir);
}

LoadedCodec load_codec(const fs::path& dir, const RunConfig* expected) {
    LoadedCodec out{read_codec_config(dir), nullptr};
    if (expected != nullptr) {
        require(codec_section(expected->codec) == codec_section(out.config.codec), ErrorKind::Compatibility,
                "codec settings in the config differ from checkpoint " + dir.string());
    }
    Rng rng(0);
    out.model = std::make_unique<CodecModel>(out.config.codec, rng);
    ParameterList params;
    out.model->collect(params);
    load_checkpoint(dir, params, {}, {"disc."});
    return out;
}

StreamHeader stream_header(const CodecConfig& codec, const TokenGrid& grid, std::size_t original_length) {
    const Rational rate = codec.frame_rate();
    require(rate.num <= 0xFFFF && rate.den <= 0xFFFF, ErrorKind::Configuration, "frame rate does not fit the header");
    StreamHeader h;
    h.sample_rate = static_cast<std::uint32_t>(codec.sample_rate);
    h.frame_rate_num = static_cast<std::uint16_t>(rate.num);
    h.frame_rate_den = static_cast<std::uint16_t>(rate.den);
    h.n_quantizers = static_cast<std::uint16_t>(codec.n_quantizers);
    h.codebook_size = static_cast<std::uint32_t>(codec.codebook_size);
    h.frames = static_cast<std::uint32_t>(grid.frames);
    h.original_length = static_cast<std::uint32_t>(original_length);
    return h;
}

Unpacked encode_samples(const CodecModel& model, const std::vector<double>& samples) {
    const PaddedWave padded = pad_to_hop(samples, model.config().hop());
    Unpacked out;
    out.grid = model.encode(padded.samples);
    out.header = stream_header(model.config(), out.grid, padded.original_length);
    return out;
}

void check_stream_matches(const CodecConfig& c, const StreamHeader& h) {
    const Rational rate = c.frame_rate();
    require(h.n_quantizers == c.n_quantizers && static_cast<int>(h.codebook_size) == c.codebook_size,
            ErrorKind::Compatibility,
            "stream has N=" + std::to_string(h.n_quantizers) + ", C=" + std::to_string(h.codebook_size) +
                "; codec has N=" + std::to_string(c.n_quantizers) + ", C=" + std::to_string(c.codebook_size));
    require(static_cast<int>(h.sample_rate) == c.sample_rate &&
                static_cast<std::int64_t>(h.frame_rate_num) * rate.den == rate.num * h.frame_rate_den,
            ErrorKind::Compatibility, "stream sample rate or frame rate differs from the codec");
}

std::vector<double> decode_stream(const CodecModel& model, const Unpacked& stream) {
    const CodecConfig& c = model.config();
    const StreamHeader& h = stream.header;
    check_stream_matches(c, h);
    require(static_cast<std::size_t>(h.original_length) <= static_cast<std::size_t>(h.frames) * c.hop(),
            ErrorKind::CorruptStream, "stream original length exceeds its frame count");
    auto wave = model.decode(stream.grid);
    wave.resize(h.original_length);
    return wave;
}

std::string EvalReport::to_json() const {
    nlohmann::ordered_json j;
    j["si_snr"] = si_snr;
    j["mel_l1"] = mel_l1;
    j["kbps"] = kbps;
    j["frames"] = frames;
    j["seconds"] = seconds;
    return j.dump();
}

EvalReport evaluate_codec(const CodecModel& model, const std::vector<double>& samples) {
    const Unpacked enc = encode_samples(model, samples);
    // Through the byte format so the reported rate is what a file costs.
    const Unpacked stream = unpack(pack(enc.grid, enc.header));
    const auto recon = decode_stream(model, stream);
    EvalReport r;
    r.frames = stream.grid.frames;
    r.seconds = static_cast<double>(samples.size()) / model.config().sample_rate;
    r.kbps = static_cast<double>(payload_bits(stream.header)) / r.seconds / 1000.0;
    r.si_snr = si_snr(samples, recon);
    r.mel_l1 = mel_l1(samples, recon, MelConfig{.sample_rate = model.config().sample_rate});
    return r;
}

void save_lm_checkpoint(const fs::path& dir, const HierLm& lm, LmTrainer* trainer, const RunConfig& cfg) {
    ParameterList params;
    lm.collect(params);
    std::vector<NamedOptimizer> opts;
    if (trainer != nullptr) {
        opts.push_back({kLmOptim, &trainer->optimizer()});
    }
    save_checkpoint(dir, params, opts, {"lm", trainer != nullptr ? trainer->steps_done() : 0, to_ini(cfg), ""});
}

LoadedLm load_lm(const fs::path& dir, const CodecConfig* codec) {
    const CheckpointInfo info = read_checkpoint_info(dir);
    require(info.kind == "lm", ErrorKind::Compatibility, dir.string() + " is not an LM checkpoint");
    LoadedLm out{config_from_checkpoint(info, dir), nullptr};
    if (codec != nullptr) {
        require(out.config.lm.n_quantizers == codec->n_quantizers && out.config.lm.codebook_size == codec->codebook_size,
                ErrorKind::Compatibility,
                "LM was trained for N=" + std::to_string(out.config.lm.n_quantizers) +
                    ", C=" + std::to_string(out.config.lm.codebook_size) + "; codec has N=" +
                    std::to_string(codec->n_quantizers) + ", C=" + std::to_string(codec->codebook_size));
    }
    Rng rng(0);
    out.model = std::make_unique<HierLm>(out.config.lm, rng);
    ParameterList params;
    out.model->collect(params);
    load_checkpoint(dir, params);
    return out;
}

LmStepReport train_lm(const RunConfig& cfg, const std::vector<SequenceLayout>& corpus, const fs::path& out,
                      std::ostream* metrics, bool resume) {
    cfg.validate();
    Rng rng(derive_seed(cfg.lm_train.seed, 0x11));
    HierLm lm(cfg.lm, rng);
    LmTrainer trainer(lm, corpus, cfg.lm_train);
    if (resume) {
        const CheckpointInfo info = read_checkpoint_info(out);
        require(info.kind == "lm", ErrorKind::Compatibility, out.string() + " is not an LM checkpoint");
        ParameterList params;
        lm.collect(params);
        load_checkpoint(out, params, {{kLmOptim, &trainer.optimizer()}});
        trainer.set_steps_done(static_cast<int>(info.step));
    }
    LmStepReport last;
    while (trainer.steps_done() < cfg.lm_train.steps) {
        last = trainer.step();
        if (metrics != nullptr) {
            *metrics << last.to_json() << '\n';
        }
        if (trainer.steps_done() % cfg.train.checkpoint_every == 0 || trainer.steps_done() == cfg.lm_train.steps) {
            save_lm_checkpoint(out, lm, &trainer, cfg);
        }
    }
    if (cfg.lm_train.steps == 0) {
        save_lm_checkpoint(out, lm, &trainer, cfg);
    }
    return last;
}

Synthesis synthesize_speech(const HierLm& lm, const CodecModel& codec, const std::string& text, const TokenGrid* prompt,
                            int max_frames, const SamplerConfig& sampler, std::uint64_t seed) {
    Synthesis out;
    Rng rng(derive_seed(seed, 0x5a));
    out.grid = lm.synthesize(text_to_ids(text), prompt, max_frames, sampler, rng, &out.counters);
    if (out.grid.frames > 0) {
        out.wave = codec.decode(out.grid);
    }
    return out;
}

std::vector<MacBreakdown> mac_report(const RunConfig& cfg) {
    std::vector<MacBreakdown> rows;
    for (const auto& p : published_mac_table()) {
        rows.push_back(p.row);
    }
    struct Preset {
        const char* name;
        double rate;
        int n;
    };
    const Preset presets[] = {{"8RVQ-c16384", 5.0, 8},  {"16RVQ-c4096", 5.0, 16}, {"32RVQ-c256", 5.0, 32},
                              {"100RVQ-c4", 5.0, 100}, {"8RVQ-c1024", 12.5, 8}};
    const auto& g = cfg.lm.global;
    const auto& l = cfg.lm.local;
    for (const auto& p : presets) {
        rows.push_back(analytic_macs(std::string("desk:") + p.name, p.rate, p.n, g.layers, g.d_model, g.ff, l.layers,
                                     l.d_model, l.ff, cfg.max_frames));
    }
    return rows;
}

std::vector<RtfRow> rtf_report(const RunConfig& cfg, double seconds, int runs, std::uint64_t seed) {
    require(seconds > 0.0, ErrorKind::Usage, "rtf: seconds must be positive");
    struct Preset {
        const char* name;
        double rate;
        int n;
        int c;
    };
    const Preset presets[] = {{"desk:5Hz-8RVQ", 5.0, 8, 1024}, {"desk:12.5Hz-8RVQ", 12.5, 8, 1024},
                              {"desk:5Hz-32RVQ", 5.0, 32, 256}};
    const int threads = kernels::max_threads();
    const std::string note = "token generation only, " + std::to_string(threads) + (threads == 1 ? " thread" : " threads");
    std::vector<RtfRow> rows;
    for (const auto& p : presets) {
        LmConfig lc = cfg.lm;
        lc.n_quantizers = p.n;
        lc.codebook_size = p.c;
        const int frames = static_cast<int>(std::lround(p.rate * seconds));
        lc.max_positions = std::max(lc.max_positions, frames + 2);
        Rng init(derive_seed(seed, 0x77));
        const HierLm lm(lc, init);
        SamplerConfig sampler = cfg.sampler;
        sampler.allow_eos = false;
        RtfRow row;
        row.timing = measure_rtf(
            [&] {
                Rng rng(derive_seed(seed, 0x5a));
                LmCounters counters;
                const TokenGrid g = lm.synthesize({}, nullptr, frames, sampler, rng, &counters);
                row.counters = counters;
                return static_cast<double>(g.frames) / p.rate;
            },
            runs, note);
        row.row = analytic_macs(p.name, p.rate, p.n, lc.global.layers, lc.global.d_model, lc.global.ff, lc.local.layers,
                                lc.local.d_model, lc.local.ff, frames);
        row.row.rtf = row.timing.rtf;
        rows.push_back(row);
    }
    return rows;
}

}  // namespace ucodec
