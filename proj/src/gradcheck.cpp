#include "gsnlab/gradcheck.hpp"

#include <cmath>

namespace gsn {

double gradcheck_max_rel_err(const std::function<double()>& loss_fn, ParamSet& params,
                             const GradSet& analytic, double h) {
    double worst = 0.0;
    for (size_t i = 0; i < params.size(); ++i) {
        Matrix& p = *params.tensors[i];
        const Matrix& g = analytic.tensors[i];
        for (int j = 0; j < p.size(); ++j) {
            const double saved = p.data[j];
            p.data[j] = saved + h;
            const double lp = loss_fn();
            p.data[j] = saved - h;
            const double lm = loss_fn();
            p.data[j] = saved;
            const double fd = (lp - lm) / (2.0 * h);
            const double an = g.data[j];
            const double denom = std::max(1e-6, std::fabs(fd) + std::fabs(an));
            worst = std::max(worst, std::fabs(fd - an) / denom);
        }
    }
    return worst;
}

}  // namespace gsn
