#include "gsnlab/noise.hpp"

#include <stdexcept>

namespace gsn {

void NoiseConfig::validate() const {
    if (salt_pepper_p < 0.0 || salt_pepper_p > 1.0) {
        throw std::invalid_argument("salt_pepper_p must be in [0,1], got " + std::to_string(salt_pepper_p));
    }
    if (gauss_sigma < 0.0) {
        throw std::invalid_argument("gauss_sigma must be >= 0, got " + std::to_string(gauss_sigma));
    }
}

CorruptResult salt_pepper(const Matrix& m, double p, RandomSource& rng) {
    if (p < 0.0 || p > 1.0) {
        throw std::invalid_argument("salt_pepper: p must be in [0,1], got " + std::to_string(p));
    }
    CorruptResult res;
    res.corrupted = m;
    res.keep_mask = Matrix(m.rows, m.cols, 1.0);
    for (int i = 0; i < m.size(); ++i) {
        const double u = rng.uniform();
        const double coin = rng.uniform();
        if (u < p) {
            res.corrupted.data[i] = coin < 0.5 ? 0.0 : 1.0;
            res.keep_mask.data[i] = 0.0;
        }
    }
    return res;
}

Matrix add_gaussian(const Matrix& m, double mean, double sigma, RandomSource& rng) {
    if (sigma < 0.0) {
        throw std::invalid_argument("add_gaussian: sigma must be >= 0, got " + std::to_string(sigma));
    }
    Matrix out = m;
    for (double& v : out.data) v += rng.normal(mean, sigma);
    return out;
}

}  // namespace gsn
