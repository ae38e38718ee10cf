#pragma once

#include <cstdint>

#include "gsnlab/matrix.hpp"

namespace gsn {

// Counter-based deterministic random source. Every draw is a pure function
// of (seed, counter), so a stream can be checkpointed by storing two u64s
// and child streams are independent of the parent's position.
struct RandomSource {
    uint64_t seed = 0;
    uint64_t counter = 0;

    RandomSource() = default;
    explicit RandomSource(uint64_t s) : seed(s) {}

    uint64_t next_u64();
    double uniform();  // [0, 1)
    // Box-Muller; always consumes exactly two counter values.
    double normal(double mean, double sigma);

    RandomSource split(uint64_t stream) const;
};

Matrix uniform_matrix(int rows, int cols, double lo, double hi, RandomSource& rng);

}  // namespace gsn
