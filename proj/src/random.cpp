#include "gsnlab/random.hpp"

#include <cmath>

namespace gsn {

// SplitMix64 output function applied to seed + counter*odd-constant.
static uint64_t mix64(uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ULL;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBULL;
    z ^= z >> 31;
    return z;
}

uint64_t RandomSource::next_u64() {
    uint64_t z = seed + (counter++) * 0x9E3779B97F4A7C15ULL;
    return mix64(z + 0x9E3779B97F4A7C15ULL);
}

double RandomSource::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RandomSource::normal(double mean, double sigma) {
    double u1 = uniform();
    double u2 = uniform();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    return mean + sigma * r * std::cos(theta);
}

RandomSource RandomSource::split(uint64_t stream) const {
    RandomSource child;
    child.seed = mix64(seed ^ mix64(stream + 0xD6E8FEB86659FD93ULL));
    child.counter = 0;
    return child;
}

Matrix uniform_matrix(int rows, int cols, double lo, double hi, RandomSource& rng) {
    Matrix m(rows, cols);
    for (double& v : m.data) v = lo + (hi - lo) * rng.uniform();
    return m;
}

}  // namespace gsn
