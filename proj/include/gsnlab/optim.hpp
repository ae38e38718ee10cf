#pragma once

#include <vector>

#include "gsnlab/matrix.hpp"

namespace gsn {

// Mutable views of a model's parameter tensors, in a fixed order that the
// matching GradSet must follow.
struct ParamSet {
    std::vector<Matrix*> tensors;
    void add(Matrix& m) { tensors.push_back(&m); }
    size_t size() const { return tensors.size(); }
};

struct GradSet {
    std::vector<Matrix> tensors;

    static GradSet zeros_like(const ParamSet& params);
    void accumulate(const GradSet& other, double factor = 1.0);
    void scale_all(double factor);
    double global_l2_norm() const;
};

struct GradClipConfig {
    double max_l2_norm = 0.25;
};

// Scales all gradients by max/norm when the global L2 norm exceeds max.
// Returns the pre-clip norm.
double clip_global_norm(GradSet& grads, const GradClipConfig& cfg);

enum class OptimizerKind { SgdMomentum, Adam };

struct OptimizerState {
    OptimizerKind kind = OptimizerKind::SgdMomentum;
    double learning_rate = 0.25;
    double momentum = 0.5;
    double anneal_rate = 1.0;  // applied at epoch boundaries (sgd only)
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    long step_count = 0;
    std::vector<Matrix> m_acc;  // velocity / first moment
    std::vector<Matrix> v_acc;  // second moment (adam)

    static OptimizerState sgd(double lr, double momentum, double anneal);
    static OptimizerState adam(double lr, double beta1 = 0.9, double beta2 = 0.999);

    void apply(ParamSet& params, const GradSet& grads);
    void epoch_end();  // lr *= anneal_rate
};

}  // namespace gsn
