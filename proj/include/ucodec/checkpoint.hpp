#pragma once

// Checkpoint directories: manifest.json (names, shapes, byte offsets, step,
// config snapshot) plus weights.bin holding little-endian float32 values.
// Parameters trained at 32-bit precision round-trip bit-exactly.

#include <filesystem>
#include <string>
#include <vector>

#include "ucodec/nn.hpp"
#include "ucodec/optim.hpp"

namespace ucodec {

struct CheckpointInfo {
    std::string kind;        // "codec" or "lm"
    long long step = 0;
    std::string config_ini;  // full run configuration at save time
    std::string rng_state;   // textual engine state, may be empty
};

// Optimizer whose moments are stored as "<prefix>.<param>.m" / ".v".
struct NamedOptimizer {
    std::string prefix;
    Adam* adam = nullptr;
};

void save_checkpoint(const std::filesystem::path& dir, const ParameterList& params,
                     const std::vector<NamedOptimizer>& optimizers, const CheckpointInfo& info);

// Reads only the manifest, so callers can validate before building models.
CheckpointInfo read_checkpoint_info(const std::filesystem::path& dir);

// Fills `params` (and optimizer state) by name. A missing, surplus or
// differently shaped tensor is a compatibility error; stored tensors whose
// names start with one of `skip_prefixes` (and optimizer state, when no
// optimizers are given) may stay unread.
void load_checkpoint(const std::filesystem::path& dir, ParameterList& params,
                     const std::vector<NamedOptimizer>& optimizers = {},
                     const std::vector<std::string>& skip_prefixes = {});

}  // namespace ucodec
