#pragma once

#include "gsnlab/matrix.hpp"
#include "gsnlab/random.hpp"

namespace gsn {

struct NoiseConfig {
    double salt_pepper_p = 0.0;   // input corruption probability
    double gauss_mean = 0.0;      // hidden-layer additive noise
    double gauss_sigma = 0.0;
    bool apply_pre_activation = false;
    bool apply_post_activation = false;

    void validate() const;
    bool hidden_noise_on() const {
        return gauss_sigma > 0.0 && (apply_pre_activation || apply_post_activation);
    }
};

struct CorruptResult {
    Matrix corrupted;
    Matrix keep_mask;  // 1 where untouched, 0 where replaced
};

// Each element is replaced, with probability p, by a fair coin flip to 0 or 1.
// Always consumes exactly two counter values per element.
CorruptResult salt_pepper(const Matrix& m, double p, RandomSource& rng);

Matrix add_gaussian(const Matrix& m, double mean, double sigma, RandomSource& rng);

}  // namespace gsn
