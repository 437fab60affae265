#pragma once

// INI run configuration with [codec], [train] and [lm] sections. Every key
// is optional; unknown sections or keys are rejected.

#include <filesystem>
#include <string>

#include "ucodec/codec_net.hpp"
#include "ucodec/hier_lm.hpp"
#include "ucodec/trainer.hpp"

namespace ucodec {

struct RunConfig {
    CodecConfig codec = CodecConfig::miniature();
    TrainConfig train = TrainConfig::desk();
    LmConfig lm = LmConfig::desk(4, 64);
    LmTrainConfig lm_train;
    SamplerConfig sampler;
    int max_frames = 250;

    // Checks every section and the codec/LM agreement on N and C.
    void validate() const;
};

RunConfig parse_run_config(const std::string& ini_text);
RunConfig load_run_config(const std::filesystem::path& path);
// Full INI listing of every key; parse_run_config(to_ini(c)) == c.
std::string to_ini(const RunConfig& cfg);
// Just the [codec] section, used to match checkpoints and streams.
std::string codec_section(const CodecConfig& codec);

}  // namespace ucodec
