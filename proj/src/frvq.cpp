#include "ucodec/frvq.hpp"

#include <cmath>
#include <string>

#include "ucodec/error.hpp"

namespace ucodec {

namespace {

constexpr double kTinyNorm = 1e-8;

double norm(std::span<const double> v) {
    double ss = 0.0;
    for (double x : v) {
        ss += x * x;
    }
    return std::sqrt(ss);
}

std::vector<double> unit_rows(Rng& rng, int rows, int dim) {
    std::vector<double> v = normal_values(rng, static_cast<std::size_t>(rows) * dim, 1.0);
    for (int r = 0; r < rows; ++r) {
        auto row = std::span<double>(v).subspan(static_cast<std::size_t>(r) * dim, dim);
        double n = norm(row);
        while (n < kTinyNorm) {
            const auto fresh = normal_values(rng, dim, 1.0);
            std::copy(fresh.begin(), fresh.end(), row.begin());
            n = norm(row);
        }
        for (double& x : row) {
            x /= n;
        }
    }
    return v;
}

std::vector<int> lookup_rows(const Tensor& p, const Tensor& codebook) {
    const int rows = p.dim(0);
    const int d = p.dim(1);
    std::vector<int> idx(static_cast<std::size_t>(rows));
    for (int r = 0; r < rows; ++r) {
        idx[r] = cosine_lookup(p.data().subspan(static_cast<std::size_t>(r) * d, d), codebook.data(), d);
    }
    return idx;
}

}  // namespace

int cosine_lookup(std::span<const double> p, std::span<const double> codebook, int dim) {
    const double pn = norm(p);
    if (pn < kTinyNorm) {
        return 0;
    }
    const int rows = static_cast<int>(codebook.size() / static_cast<std::size_t>(dim));
    int best = 0;
    double best_score = -2.0;
    for (int j = 0; j < rows; ++j) {
        const auto c = codebook.subspan(static_cast<std::size_t>(j) * dim, dim);
        const double cn = norm(c);
        if (cn < kTinyNorm) {
            continue;
        }
        double dot = 0.0;
        for (int i = 0; i < dim; ++i) {
            dot += p[i] * c[i];
        }
        const double score = dot / (pn * cn);
        if (score > best_score) {
            best_score = score;
            best = j;
        }
    }
    return best;
}

Frvq::Frvq(int n_layers, int latent_dim, int proj_dim, int codebook_size, Rng& rng)
    : latent_dim_(latent_dim), proj_dim_(proj_dim), codebook_size_(codebook_size) {
    require(n_layers >= 1 && latent_dim >= 1 && proj_dim >= 1 && codebook_size >= 1, ErrorKind::Configuration,
            "quantizer dimensions must be positive");
    for (int i = 0; i < n_layers; ++i) {
        const std::string p = "quantizer.layers." + std::to_string(i);
        QuantizerLayer l;
        l.in_proj = Tensor::parameter({proj_dim, latent_dim},
                                      normal_values(rng, static_cast<std::size_t>(proj_dim) * latent_dim,
                                                    1.0 / std::sqrt(latent_dim)),
                                      p + ".in_proj");
        l.codebook = Tensor::parameter({codebook_size, proj_dim}, unit_rows(rng, codebook_size, proj_dim), p + ".codebook");
        l.out_proj = Tensor::parameter({latent_dim, proj_dim},
                                       normal_values(rng, static_cast<std::size_t>(latent_dim) * proj_dim,
                                                     1.0 / std::sqrt(proj_dim)),
                                       p + ".out_proj");
        layers_.push_back(std::move(l));
    }
}

Frvq::Frvq(std::vector<QuantizerLayer> layers) : layers_(std::move(layers)) {
    require(!layers_.empty(), ErrorKind::Configuration, "quantizer needs at least one layer");
    proj_dim_ = layers_[0].codebook.dim(1);
    latent_dim_ = layers_[0].in_proj.dim(1);
    codebook_size_ = layers_[0].codebook.dim(0);
    for (const auto& l : layers_) {
        require(l.in_proj.shape() == Shape{proj_dim_, latent_dim_} && l.codebook.dim(1) == proj_dim_ &&
                    l.codebook.dim(0) == codebook_size_ && l.out_proj.shape() == Shape{latent_dim_, proj_dim_},
                ErrorKind::Configuration, "quantizer layers have inconsistent shapes");
    }
}

QuantizationResult Frvq::quantize(const Tensor& latents, bool training) const {
    require(latents.rank() == 2 && latents.dim(1) == latent_dim_, ErrorKind::Configuration,
            "quantize: latents " + shape_string(latents.shape()) + " vs latent dim " + std::to_string(latent_dim_));
    const int rows = latents.dim(0);
    QuantizationResult r;
    r.codes = TokenGrid(rows, layers());
    Tensor residual = latents;
    for (int i = 0; i < layers(); ++i) {
        const auto& l = layers_[static_cast<std::size_t>(i)];
        const Tensor p = ops::linear(residual, l.in_proj, Tensor());
        const auto idx = lookup_rows(p, l.codebook);
        for (int t = 0; t < rows; ++t) {
            r.codes.at(t, i) = idx[t];
        }
        const Tensor c = ops::embedding(l.codebook, idx);
        const Tensor low = training ? ops::straight_through(p, c) : c;
        const Tensor contribution = ops::linear(low, l.out_proj, Tensor());
        r.quantized = i == 0 ? contribution : ops::add(r.quantized, contribution);
        if (i + 1 < layers()) {
            residual = ops::sub(residual, contribution);
        }
        r.projected.push_back(p);
        r.selected.push_back(c);
        r.contributions.push_back(contribution);
    }
    return r;
}

Tensor Frvq::dequantize(const TokenGrid& codes) const {
    require(codes.layers == layers(), ErrorKind::CorruptStream,
            "dequantize: grid has " + std::to_string(codes.layers) + " layers, quantizer has " + std::to_string(layers()));
    Tensor out;
    std::vector<int> idx(static_cast<std::size_t>(codes.frames));
    for (int i = 0; i < layers(); ++i) {
        const auto& l = layers_[static_cast<std::size_t>(i)];
        for (int t = 0; t < codes.frames; ++t) {
            const int c = codes.at(t, i);
            require(c >= 0 && c < l.codebook_size(), ErrorKind::CorruptStream,
                    "dequantize: code " + std::to_string(c) + " out of range at frame " + std::to_string(t) + " layer " +
                        std::to_string(i));
            idx[t] = c;
        }
        const Tensor contribution = ops::linear(ops::embedding(l.codebook, idx), l.out_proj, Tensor());
        out = i == 0 ? contribution : ops::add(out, contribution);
    }
    return out;
}

FrozenPath Frvq::capture(const Tensor& latents) const {
    NoGradScope no_grad;
    const auto r = quantize(latents, false);
    FrozenPath path;
    path.codes = r.codes;
    for (int i = 0; i < layers(); ++i) {
        path.offsets.push_back(ops::sub(r.selected[i], r.projected[i]).detach());
    }
    return path;
}

QuantizationResult Frvq::quantize_frozen(const Tensor& latents, const FrozenPath& path) const {
    require(path.codes.frames == latents.dim(0) && path.codes.layers == layers(), ErrorKind::Configuration,
            "quantize_frozen: path does not match input");
    const int rows = latents.dim(0);
    QuantizationResult r;
    r.codes = path.codes;
    Tensor residual = latents;
    std::vector<int> idx(static_cast<std::size_t>(rows));
    for (int i = 0; i < layers(); ++i) {
        const auto& l = layers_[static_cast<std::size_t>(i)];
        const Tensor p = ops::linear(residual, l.in_proj, Tensor());
        for (int t = 0; t < rows; ++t) {
            idx[t] = path.codes.at(t, i);
        }
        const Tensor c = ops::embedding(l.codebook, idx);
        const Tensor contribution = ops::linear(ops::add(p, path.offsets[static_cast<std::size_t>(i)]), l.out_proj, Tensor());
        r.quantized = i == 0 ? contribution : ops::add(r.quantized, contribution);
        residual = ops::sub(residual, contribution);
        r.projected.push_back(p);
        r.selected.push_back(c);
        r.contributions.push_back(contribution);
    }
    return r;
}

int Frvq::repair_codebooks(Rng& rng) {
    int repaired = 0;
    for (auto& l : layers_) {
        auto data = l.codebook.mutable_data();
        for (int j = 0; j < codebook_size_; ++j) {
            auto row = data.subspan(static_cast<std::size_t>(j) * proj_dim_, proj_dim_);
            if (norm(row) < kTinyNorm) {
                const auto fresh = unit_rows(rng, 1, proj_dim_);
                std::copy(fresh.begin(), fresh.end(), row.begin());
                ++repaired;
            }
        }
    }
    return repaired;
}

void Frvq::collect(ParameterList& out) const {
    for (const auto& l : layers_) {
        out.push_back({l.in_proj.name(), l.in_proj});
        out.push_back({l.codebook.name(), l.codebook});
        out.push_back({l.out_proj.name(), l.out_proj});
    }
}

VqLosses vq_losses(const std::vector<Tensor>& projected, const std::vector<Tensor>& selected) {
    require(!projected.empty() && projected.size() == selected.size(), ErrorKind::Usage,
            "vq_losses: mismatched per-layer lists");
    std::vector<Tensor> cb;
    std::vector<Tensor> commit;
    for (std::size_t i = 0; i < projected.size(); ++i) {
        cb.push_back(ops::l1_loss(ops::stop_gradient(projected[i]), selected[i]));
        commit.push_back(ops::l1_loss(projected[i], ops::stop_gradient(selected[i])));
    }
    const double inv = 1.0 / static_cast<double>(projected.size());
    return {ops::scale(ops::add_n(cb), inv), ops::scale(ops::add_n(commit), inv)};
}

CodebookUsage codebook_usage(const TokenGrid& codes, int layer, int codebook_size) {
    require(layer >= 0 && layer < codes.layers, ErrorKind::Index, "codebook_usage: layer out of range");
    CodebookUsage u;
    u.histogram.assign(static_cast<std::size_t>(codebook_size), 0);
    for (int t = 0; t < codes.frames; ++t) {
        const int c = codes.at(t, layer);
        require(c >= 0 && c < codebook_size, ErrorKind::Index, "codebook_usage: code out of range");
        ++u.histogram[static_cast<std::size_t>(c)];
    }
    double entropy = 0.0;
    for (long long n : u.histogram) {
        if (n > 0) {
            const double p = static_cast<double>(n) / codes.frames;
            entropy -= p * std::log(p);
        }
    }
    u.perplexity = codes.frames > 0 ? std::exp(entropy) : 0.0;
    return u;
}

}  // namespace ucodec
