#pragma once

#include <string>
#include <vector>

#include "gsnlab/gradcheck.hpp"

namespace gsn {

// Finite-difference check of a named model's training gradient on a tiny
// randomly initialized instance, with stochastic terms frozen per call.
// Models: dense | lstm | dae | gsn | tgsn | rnn_gsn | sen.
// widths: {visible, hidden...} (dense: {in, out}; lstm: {in, hidden}).
// Returns the max relative error across all parameter elements.
double gradcheck_model(const std::string& model, const std::vector<int>& widths, uint64_t seed);

}  // namespace gsn
