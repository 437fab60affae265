#include "ucodec/hier_lm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "json.hpp"
#include "ucodec/error.hpp"

namespace ucodec {

void LmConfig::validate() const {
    require(n_quantizers >= 1, ErrorKind::Configuration, "lm: n_quantizers must be >= 1");
    require(codebook_size >= 2, ErrorKind::Configuration, "lm: codebook_size must be >= 2");
    require(text_vocab >= 1, ErrorKind::Configuration, "lm: text_vocab must be >= 1");
    require(global.causal && local.causal, ErrorKind::Configuration, "lm: both transformers must be causal");
    require(max_positions >= 2, ErrorKind::Configuration, "lm: max_positions must be >= 2");
}

LmConfig LmConfig::desk(int n_quantizers, int codebook_size) {
    LmConfig c;
    c.n_quantizers = n_quantizers;
    c.codebook_size = codebook_size;
    return c;
}

std::vector<double> top_k_distribution(std::span<const double> logits, const SamplerConfig& cfg) {
    const int vocab = static_cast<int>(logits.size());
    require(vocab >= 1, ErrorKind::Usage, "sampler: empty logits");
    require(cfg.k_top >= 1, ErrorKind::Usage, "sampler: k_top must be >= 1");
    std::vector<double> probs(static_cast<std::size_t>(vocab), 0.0);
    if (cfg.k_top == 1) {
        probs[std::max_element(logits.begin(), logits.end()) - logits.begin()] = 1.0;
        return probs;
    }
    require(cfg.temperature > 0.0, ErrorKind::Usage, "sampler: temperature must be > 0 when k_top > 1");
    std::vector<int> order(static_cast<std::size_t>(vocab));
    std::iota(order.begin(), order.end(), 0);
    const int keep = std::min(cfg.k_top, vocab);
    std::partial_sort(order.begin(), order.begin() + keep, order.end(),
                      [&](int a, int b) { return logits[a] > logits[b] || (logits[a] == logits[b] && a < b); });
    const double top = logits[order[0]] / cfg.temperature;
    double z = 0.0;
    for (int i = 0; i < keep; ++i) {
        const double w = std::exp(logits[order[i]] / cfg.temperature - top);
        probs[order[i]] = w;
        z += w;
    }
    for (double& p : probs) {
        p /= z;
    }
    return probs;
}

int sample_top_k(std::span<const double> logits, const SamplerConfig& cfg, Rng& rng) {
    const auto probs = top_k_distribution(logits, cfg);
    if (cfg.k_top == 1) {
        return static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin());
    }
    const double u = uniform01(rng);
    double acc = 0.0;
    int last = 0;
    for (int i = 0; i < static_cast<int>(probs.size()); ++i) {
        if (probs[i] > 0.0) {
            acc += probs[i];
            last = i;
            if (u < acc) {
                return i;
            }
        }
    }
    return last;  // u landed in rounding slack above the final partial sum
}

HierLm::HierLm(const LmConfig& cfg, Rng& rng) : cfg_(cfg) {
    cfg_.validate();
    const int n = cfg_.n_quantizers;
    const int dg = cfg_.global.d_model;
    const int dl = cfg_.local.d_model;
    text_table_ = Tensor::parameter({cfg_.text_vocab, dg},
                                    normal_values(rng, static_cast<std::size_t>(cfg_.text_vocab) * dg, 1.0),
                                    "lm.global.text_embedding");
    bos_ = Tensor::parameter({1, dg}, normal_values(rng, static_cast<std::size_t>(dg), 1.0), "lm.global.bos");
    for (int k = 0; k < n; ++k) {
        patch_tables_.push_back(Tensor::parameter(
            {cfg_.vocab(k), dg}, normal_values(rng, static_cast<std::size_t>(cfg_.vocab(k)) * dg, 1.0 / std::sqrt(n)),
            "lm.global.code_embedding." + std::to_string(k)));
    }
    global_ = Transformer(cfg_.global, rng, "lm.global.transformer");
    condition_ = Linear(dg, dl, rng, "lm.local.condition");
    for (int k = 0; k + 1 < n; ++k) {
        local_tables_.push_back(Tensor::parameter({cfg_.vocab(k), dl},
                                                  normal_values(rng, static_cast<std::size_t>(cfg_.vocab(k)) * dl, 1.0),
                                                  "lm.local.code_embedding." + std::to_string(k)));
    }
    local_ = Transformer(cfg_.local, rng, "lm.local.transformer");
    for (int k = 0; k < n; ++k) {
        heads_.emplace_back(dl, cfg_.vocab(k), rng, "lm.local.heads." + std::to_string(k));
    }
}

void HierLm::check_text(const std::vector<int>& text) const {
    for (int id : text) {
        require(id >= 0 && id < cfg_.text_vocab, ErrorKind::Index,
                "text id " + std::to_string(id) + " outside vocabulary of " + std::to_string(cfg_.text_vocab));
    }
}

void HierLm::check_grid(const TokenGrid& grid) const {
    require(grid.layers == cfg_.n_quantizers, ErrorKind::Compatibility,
            "token grid has " + std::to_string(grid.layers) + " layers, model expects " +
                std::to_string(cfg_.n_quantizers));
    for (int c : grid.codes) {
        require(c >= 0 && c < cfg_.codebook_size, ErrorKind::Index,
                "code " + std::to_string(c) + " outside codebook of " + std::to_string(cfg_.codebook_size));
    }
}

Tensor HierLm::embed_patch(std::span<const int> codes) const {
    require(static_cast<int>(codes.size()) == cfg_.n_quantizers, ErrorKind::Usage, "embed_patch: need one code per layer");
    std::vector<Tensor> terms;
    for (int k = 0; k < cfg_.n_quantizers; ++k) {
        terms.push_back(ops::embedding(patch_tables_[k], {codes[k]}));
    }
    return terms.size() == 1 ? terms[0] : ops::add_n(terms);
}

std::vector<double> HierLm::embed_patch_values(std::span<const int> codes) const {
    NoGradScope no_grad;
    return embed_patch(codes).to_vector();
}

Tensor HierLm::global_inputs(const std::vector<int>& text, const TokenGrid& grid) const {
    std::vector<Tensor> parts;
    if (!text.empty()) {
        parts.push_back(ops::embedding(text_table_, text));
    }
    parts.push_back(bos_);
    if (grid.frames > 0) {
        std::vector<Tensor> terms;
        for (int k = 0; k < cfg_.n_quantizers; ++k) {
            std::vector<int> ids(static_cast<std::size_t>(grid.frames));
            for (int t = 0; t < grid.frames; ++t) {
                ids[t] = grid.at(t, k);
            }
            terms.push_back(ops::embedding(patch_tables_[k], ids));
        }
        parts.push_back(terms.size() == 1 ? terms[0] : ops::add_n(terms));
    }
    return parts.size() == 1 ? parts[0] : ops::concat_rows(parts);
}

Tensor HierLm::global_forward(const std::vector<int>& text, const TokenGrid& grid) const {
    check_text(text);
    check_grid(grid);
    const int len = static_cast<int>(text.size()) + grid.frames + 1;
    require(len <= cfg_.max_positions, ErrorKind::SequenceLength,
            "global sequence of " + std::to_string(len) + " positions exceeds " + std::to_string(cfg_.max_positions));
    return global_.forward(global_inputs(text, grid), 1, len);
}

Tensor HierLm::local_logits(const Tensor& h, std::span<const int> prefix) const {
    const int k = static_cast<int>(prefix.size());
    require(k < cfg_.n_quantizers, ErrorKind::Usage,
            "local_logits: layer " + std::to_string(k + 1) + " outside 1.." + std::to_string(cfg_.n_quantizers));
    require(static_cast<int>(h.numel()) == cfg_.global.d_model, ErrorKind::Configuration,
            "local_logits: conditioning state must have d_global values");
    std::vector<Tensor> rows{condition_.forward(ops::reshape(h, {1, cfg_.global.d_model}))};
    for (int j = 0; j < k; ++j) {
        rows.push_back(ops::embedding(local_tables_[j], {prefix[j]}));
    }
    const Tensor x = rows.size() == 1 ? rows[0] : ops::concat_rows(rows);
    const Tensor out = local_.forward(x, 1, k + 1);
    return heads_[k].forward(ops::slice_rows(out, k, k + 1));
}

Tensor HierLm::sequence_nll(const SequenceLayout& layout) const {
    const TokenGrid& grid = layout.grid;
    const int n = cfg_.n_quantizers;
    const int frames = grid.frames;
    const int targets = frames + (layout.with_eos ? 1 : 0);
    require(targets >= 1, ErrorKind::Usage, "sequence_nll: nothing to predict");
    const int prefix = static_cast<int>(layout.text.size());

    const Tensor hidden = global_forward(layout.text, grid);
    // Row prefix + b conditions frame b (the BOS row conditions frame 0).
    const Tensor cond = condition_.forward(ops::slice_rows(hidden, prefix, prefix + targets));

    Tensor local_in = cond;
    if (n > 1) {
        // Position-major stack, then gathered into batch-major order.
        std::vector<Tensor> parts{cond};
        for (int j = 0; j + 1 < n; ++j) {
            std::vector<int> ids(static_cast<std::size_t>(targets), 0);
            for (int b = 0; b < frames; ++b) {
                ids[b] = grid.at(b, j);
            }
            parts.push_back(ops::embedding(local_tables_[j], ids));
        }
        std::vector<int> order(static_cast<std::size_t>(targets) * n);
        for (int b = 0; b < targets; ++b) {
            for (int pos = 0; pos < n; ++pos) {
                order[static_cast<std::size_t>(b) * n + pos] = pos * targets + b;
            }
        }
        local_in = ops::embedding(ops::concat_rows(parts), order);
    }
    const Tensor out = local_.forward(local_in, targets, n);

    std::vector<Tensor> sums;
    int count = 0;
    for (int k = 0; k < n; ++k) {
        std::vector<int> rows(static_cast<std::size_t>(targets));
        std::vector<int> labels(static_cast<std::size_t>(targets));
        for (int b = 0; b < targets; ++b) {
            rows[b] = b * n + k;
            if (b < frames) {
                labels[b] = grid.at(b, k);
            } else {
                // EOS frame: only layer 1 carries a target.
                labels[b] = k == 0 ? cfg_.eos_id() : -1;
            }
            count += labels[b] >= 0 ? 1 : 0;
        }
        const Tensor logits = heads_[k].forward(ops::embedding(out, rows));
        sums.push_back(ops::sum(ops::cross_entropy_rows(logits, labels)));
    }
    const Tensor total = sums.size() == 1 ? sums[0] : ops::add_n(sums);
    return ops::scale(total, 1.0 / count);
}

std::vector<double> HierLm::local_input_values(int layer, int code) const {
    const int dl = cfg_.local.d_model;
    const auto row = local_tables_[layer].data().subspan(static_cast<std::size_t>(code) * dl, dl);
    return {row.begin(), row.end()};
}

std::vector<double> HierLm::head_logits(int layer, std::span<const double> hidden) const {
    NoGradScope no_grad;
    const Tensor x = Tensor::from({1, cfg_.local.d_model}, {hidden.begin(), hidden.end()});
    return heads_[layer].forward(x).to_vector();
}

std::vector<int> HierLm::sample_patch(std::span<const double> h, const SamplerConfig& cfg, Rng& rng,
                                      LmCounters* counters) const {
    require(static_cast<int>(h.size()) == cfg_.global.d_model, ErrorKind::Configuration,
            "sample_patch: conditioning state must have d_global values");
    std::vector<double> input;
    {
        NoGradScope no_grad;
        input = condition_.forward(Tensor::from({1, cfg_.global.d_model}, {h.begin(), h.end()})).to_vector();
    }
    KvCache cache;
    std::vector<int> codes;
    for (int k = 0; k < cfg_.n_quantizers; ++k) {
        const auto hidden = local_.step(input, cache);
        if (counters != nullptr) {
            ++counters->local_positions;
        }
        auto logits = head_logits(k, hidden);
        if (k == 0 && !cfg.allow_eos) {
            logits[cfg_.eos_id()] = -std::numeric_limits<double>::infinity();
        }
        const int code = sample_top_k(logits, cfg, rng);
        codes.push_back(code);
        if (k == 0 && code == cfg_.eos_id()) {
            return codes;
        }
        if (k + 1 < cfg_.n_quantizers) {
            input = local_input_values(k, code);
        }
    }
    return codes;
}

TokenGrid HierLm::synthesize(const std::vector<int>& text, const TokenGrid* prompt, int max_frames,
                             const SamplerConfig& cfg, Rng& rng, LmCounters* counters) const {
    require(max_frames >= 1, ErrorKind::Usage, "synthesize: max_frames must be >= 1");
    check_text(text);
    const int prompt_frames = prompt != nullptr ? prompt->frames : 0;
    if (prompt != nullptr) {
        check_grid(*prompt);
    }
    const long long worst = static_cast<long long>(text.size()) + 1 + prompt_frames + max_frames;
    require(worst <= cfg_.max_positions, ErrorKind::SequenceLength,
            "synthesis could reach " + std::to_string(worst) + " global positions, limit " +
                std::to_string(cfg_.max_positions));

    const int dg = cfg_.global.d_model;
    KvCache cache;
    std::vector<double> h;
    for (int id : text) {
        const auto row = text_table_.data().subspan(static_cast<std::size_t>(id) * dg, dg);
        h = global_.step(row, cache);
        if (counters != nullptr) {
            ++counters->text_positions;
        }
    }
    h = global_.step(bos_.data(), cache);
    if (counters != nullptr) {
        ++counters->bos_positions;
    }
    for (int t = 0; t < prompt_frames; ++t) {
        const std::span<const int> codes(prompt->codes.data() + static_cast<std::size_t>(t) * prompt->layers,
                                         static_cast<std::size_t>(prompt->layers));
        h = global_.step(embed_patch_values(codes), cache);
        if (counters != nullptr) {
            ++counters->frame_positions;
        }
    }

    TokenGrid out(0, cfg_.n_quantizers);
    while (out.frames < max_frames) {
        const auto patch = sample_patch(h, cfg, rng, counters);
        if (patch.front() == cfg_.eos_id()) {
            break;
        }
        out.codes.insert(out.codes.end(), patch.begin(), patch.end());
        ++out.frames;
        h = global_.step(embed_patch_values(patch), cache);
        if (counters != nullptr) {
            ++counters->frame_positions;
        }
    }
    return out;
}

void HierLm::collect(ParameterList& out) const {
    out.push_back({text_table_.name(), text_table_});
    out.push_back({bos_.name(), bos_});
    for (const auto& t : patch_tables_) {
        out.push_back({t.name(), t});
    }
    global_.collect(out);
    condition_.collect(out);
    for (const auto& t : local_tables_) {
        out.push_back({t.name(), t});
    }
    local_.collect(out);
    for (const auto& h : heads_) {
        h.collect(out);
    }
}

void LmTrainConfig::validate() const {
    require(steps >= 0, ErrorKind::Configuration, "lm train: steps must be >= 0");
    require(lr > 0.0, ErrorKind::Configuration, "lm train: lr must be > 0");
    require(warmup_steps >= 1, ErrorKind::Configuration, "lm train: warmup_steps must be >= 1");
    require(max_grad_norm >= 0.0, ErrorKind::Configuration, "lm train: max_grad_norm must be >= 0");
}

std::string LmStepReport::to_json() const {
    nlohmann::ordered_json j;
    j["step"] = step;
    j["nll"] = nll;
    j["lr"] = lr;
    return j.dump();
}

LmTrainer::LmTrainer(HierLm& model, std::vector<SequenceLayout> corpus, const LmTrainConfig& cfg)
    : model_(model), corpus_(std::move(corpus)), cfg_(cfg) {
    cfg_.validate();
    require(!corpus_.empty(), ErrorKind::Dataset, "lm train: empty corpus");
    model_.collect(params_);
    set_precision(params_, Precision::F32);
    AdamConfig acfg;
    acfg.max_grad_norm = cfg_.max_grad_norm;
    adam_ = Adam(params_, acfg);
}

void LmTrainer::set_steps_done(int s) { steps_done_ = s; }

LmStepReport LmTrainer::step() {
    PrecisionScope f32(Precision::F32);
    const int n = static_cast<int>(corpus_.size());
    const int epoch = steps_done_ / n;
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(cfg_.seed, static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), rng);
    const SequenceLayout& layout = corpus_[order[steps_done_ % n]];

    LmStepReport report;
    report.step = steps_done_;
    report.lr = warmup_lr(cfg_.lr, cfg_.warmup_steps, steps_done_);
    zero_grads(params_);
    {
        Tape tape;
        TapeScope scope(tape);
        const Tensor loss = model_.sequence_nll(layout);
        report.nll = loss.item();
        require(std::isfinite(report.nll), ErrorKind::TrainingDivergence,
                "lm nll is not finite at step " + std::to_string(steps_done_));
        tape.backward(loss);
    }
    adam_.step(report.lr);
    ++steps_done_;
    return report;
}

}  // namespace ucodec
