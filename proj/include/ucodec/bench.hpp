#pragma once

// MAC accounting, real-time-factor timing and signal-quality metrics.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ucodec/spectral.hpp"

namespace ucodec {

std::int64_t mac_linear(std::int64_t in_dim, std::int64_t out_dim, std::int64_t positions);
std::int64_t mac_conv1d(std::int64_t c_in, std::int64_t c_out, std::int64_t kernel, std::int64_t l_out);

// Full causal forward over seq_len positions: projections + QK^T and AV.
double mac_transformer(std::int64_t layers, std::int64_t d_model, std::int64_t ff_dim, std::int64_t seq_len);
// One cached incremental step attending over `context` positions.
double mac_transformer_step(std::int64_t layers, std::int64_t d_model, std::int64_t ff_dim, std::int64_t context);

// Giga-MACs per second of audio from per-frame giga-MACs.
double mac_total_per_second(double frame_rate, double mac_g, double mac_l);

struct MacBreakdown {
    std::string model;
    double frame_rate = 0.0;
    double mac_g = 0.0;  // giga-MACs per frame, global model
    double mac_l = 0.0;  // giga-MACs per frame, all N local steps
    double rtf = -1.0;   // negative when not measured

    double mac_total() const { return mac_total_per_second(frame_rate, mac_g, mac_l); }
};

struct PublishedMacRow {
    MacBreakdown row;
    double published_total = 0.0;
    double published_rtf = 0.0;
};

// Per-frame MAC figures published for the reference TTS systems.
std::vector<PublishedMacRow> published_mac_table();

// Analytic per-frame MACs for a global/local stack: the global model takes
// one cached step over `context` positions, the local model runs N cached
// steps over 1..N positions.
MacBreakdown analytic_macs(const std::string& model, double frame_rate, int n_quantizers, int global_layers,
                           int global_dim, int global_ff, int local_layers, int local_dim, int local_ff, int context);

inline constexpr const char* kMacCsvHeader = "model,frame_rate,rtf,mac_g,mac_l,mac_total";
std::string mac_csv(const std::vector<MacBreakdown>& rows);
std::string mac_json(const std::vector<MacBreakdown>& rows);

struct RtfReport {
    double wall_seconds = 0.0;  // median over runs
    double audio_seconds = 0.0;
    double rtf = 0.0;
    int runs = 0;
    std::string note;
};

// Times `workload`, which returns the seconds of audio it produced, and
// reports median wall time over `runs` (at least 3) divided by audio time.
RtfReport measure_rtf(const std::function<double()>& workload, int runs = 3, std::string note = {});

// Scale-invariant SNR in dB on zero-mean signals, clamped to [-100, 100].
double si_snr(std::span<const double> reference, std::span<const double> estimate);
// Multi-scale log-mel L1 distance.
double mel_l1(std::span<const double> reference, std::span<const double> estimate, const MelConfig& cfg = {});

}  // namespace ucodec
