#pragma once

#include <vector>

namespace ucodec {

// T x N matrix of codebook indices, frame-major: codes[t * layers + k].
struct TokenGrid {
    int frames = 0;
    int layers = 0;
    std::vector<int> codes;

    TokenGrid() = default;
    TokenGrid(int t, int n) : frames(t), layers(n), codes(static_cast<std::size_t>(t) * n, 0) {}

    int& at(int t, int k) { return codes[static_cast<std::size_t>(t) * layers + k]; }
    int at(int t, int k) const { return codes[static_cast<std::size_t>(t) * layers + k]; }

    bool operator==(const TokenGrid&) const = default;
};

}  // namespace ucodec
