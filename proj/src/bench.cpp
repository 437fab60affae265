#include "ucodec/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include "json.hpp"
#include "ucodec/error.hpp"
#include "ucodec/tensor.hpp"

namespace ucodec {

namespace {

void require_positive(std::initializer_list<std::int64_t> dims, const char* what) {
    for (auto d : dims) {
        require(d > 0, ErrorKind::Configuration, std::string(what) + ": dimensions must be positive");
    }
}

}  // namespace

std::int64_t mac_linear(std::int64_t in_dim, std::int64_t out_dim, std::int64_t positions) {
    require_positive({in_dim, out_dim, positions}, "mac_linear");
    return in_dim * out_dim * positions;
}

std::int64_t mac_conv1d(std::int64_t c_in, std::int64_t c_out, std::int64_t kernel, std::int64_t l_out) {
    require_positive({c_in, c_out, kernel, l_out}, "mac_conv1d");
    return c_in * c_out * kernel * l_out;
}

double mac_transformer(std::int64_t layers, std::int64_t d_model, std::int64_t ff_dim, std::int64_t seq_len) {
    require_positive({layers, d_model, ff_dim, seq_len}, "mac_transformer");
    const double l = static_cast<double>(layers);
    const double d = static_cast<double>(d_model);
    const double s = static_cast<double>(seq_len);
    return l * (4.0 * d * d + 2.0 * d * static_cast<double>(ff_dim)) * s + l * 2.0 * s * s * d;
}

double mac_transformer_step(std::int64_t layers, std::int64_t d_model, std::int64_t ff_dim, std::int64_t context) {
    require_positive({layers, d_model, ff_dim, context}, "mac_transformer_step");
    const double l = static_cast<double>(layers);
    const double d = static_cast<double>(d_model);
    return l * (4.0 * d * d + 2.0 * d * static_cast<double>(ff_dim)) + l * 2.0 * static_cast<double>(context) * d;
}

double mac_total_per_second(double frame_rate, double mac_g, double mac_l) { return frame_rate * (mac_g + mac_l); }

std::vector<PublishedMacRow> published_mac_table() {
    return {
        {{"UniAudio", 50.0, 0.906, 0.006}, 45.6, 1.40},
        {{"8RVQ-c1024", 12.5, 0.578, 0.014}, 7.4, 1.33},
        {{"8RVQ-c16384", 5.0, 0.189, 0.203}, 1.96, 0.52},
        {{"16RVQ-c4096", 5.0, 0.201, 0.102}, 1.52, 0.85},
        {{"32RVQ-c256", 5.0, 0.163, 0.014}, 0.89, 1.60},
        {{"100RVQ-c4", 5.0, 0.277, 0.012}, 1.45, 4.68},
    };
}

MacBreakdown analytic_macs(const std::string& model, double frame_rate, int n_quantizers, int global_layers,
                           int global_dim, int global_ff, int local_layers, int local_dim, int local_ff, int context) {
    MacBreakdown b;
    b.model = model;
    b.frame_rate = frame_rate;
    b.mac_g = mac_transformer_step(global_layers, global_dim, global_ff, context) * 1e-9;
    double local = 0.0;
    for (int k = 1; k <= n_quantizers; ++k) {
        local += mac_transformer_step(local_layers, local_dim, local_ff, k);
    }
    b.mac_l = local * 1e-9;
    return b;
}

std::string mac_csv(const std::vector<MacBreakdown>& rows) {
    std::ostringstream out;
    out << kMacCsvHeader << '\n';
    for (const auto& r : rows) {
        out << r.model << ',' << r.frame_rate << ',';
        if (r.rtf >= 0.0) {
            out << r.rtf;
        }
        out << ',' << r.mac_g << ',' << r.mac_l << ',' << r.mac_total() << '\n';
    }
    return out.str();
}

std::string mac_json(const std::vector<MacBreakdown>& rows) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& r : rows) {
        nlohmann::ordered_json j;
        j["model"] = r.model;
        j["frame_rate"] = r.frame_rate;
        j["rtf"] = r.rtf >= 0.0 ? nlohmann::ordered_json(r.rtf) : nlohmann::ordered_json(nullptr);
        j["mac_g"] = r.mac_g;
        j["mac_l"] = r.mac_l;
        j["mac_total"] = r.mac_total();
        arr.push_back(j);
    }
    return arr.dump(2);
}

RtfReport measure_rtf(const std::function<double()>& workload, int runs, std::string note) {
    runs = std::max(runs, 3);
    std::vector<double> walls;
    double audio = 0.0;
    for (int r = 0; r < runs; ++r) {
        const auto start = std::chrono::steady_clock::now();
        const double produced = workload();
        const auto stop = std::chrono::steady_clock::now();
        require(produced > 0.0, ErrorKind::Usage, "measure_rtf: workload produced no audio");
        audio = produced;
        walls.push_back(std::chrono::duration<double>(stop - start).count());
    }
    std::sort(walls.begin(), walls.end());
    RtfReport rep;
    rep.wall_seconds = walls[walls.size() / 2];
    rep.audio_seconds = audio;
    rep.rtf = rep.wall_seconds / audio;
    rep.runs = runs;
    rep.note = std::move(note);
    return rep;
}

double si_snr(std::span<const double> reference, std::span<const double> estimate) {
    require(reference.size() == estimate.size(), ErrorKind::Usage, "si_snr: signals differ in length");
    require(!reference.empty(), ErrorKind::UndefinedMetric, "si_snr: empty signals");
    const double n = static_cast<double>(reference.size());
    double mr = 0.0;
    double me = 0.0;
    for (std::size_t i = 0; i < reference.size(); ++i) {
        mr += reference[i];
        me += estimate[i];
    }
    mr /= n;
    me /= n;
    double dot = 0.0;
    double rr = 0.0;
    for (std::size_t i = 0; i < reference.size(); ++i) {
        dot += (reference[i] - mr) * (estimate[i] - me);
        rr += (reference[i] - mr) * (reference[i] - mr);
    }
    require(rr > 1e-20, ErrorKind::UndefinedMetric, "si_snr: reference is silent");
    const double alpha = dot / rr;
    double target = 0.0;
    double noise = 0.0;
    for (std::size_t i = 0; i < reference.size(); ++i) {
        const double s = alpha * (reference[i] - mr);
        const double e = (estimate[i] - me) - s;
        target += s * s;
        noise += e * e;
    }
    if (noise <= 0.0) {
        return 100.0;
    }
    if (target <= 0.0) {
        return -100.0;
    }
    return std::clamp(10.0 * std::log10(target / noise), -100.0, 100.0);
}

double mel_l1(std::span<const double> reference, std::span<const double> estimate, const MelConfig& cfg) {
    NoGradScope no_grad;
    const int n = static_cast<int>(reference.size());
    const Tensor x = Tensor::from({1, n}, {reference.begin(), reference.end()});
    const Tensor y = Tensor::from({1, static_cast<int>(estimate.size())}, {estimate.begin(), estimate.end()});
    return multiscale_mel_loss(x, y, cfg).item();
}

}  // namespace ucodec
