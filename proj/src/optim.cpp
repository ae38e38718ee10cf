#include "gsnlab/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace gsn {

GradSet GradSet::zeros_like(const ParamSet& params) {
    GradSet g;
    g.tensors.reserve(params.size());
    for (const Matrix* p : params.tensors) {
        g.tensors.emplace_back(p->rows, p->cols, 0.0);
    }
    return g;
}

void GradSet::accumulate(const GradSet& other, double factor) {
    if (tensors.size() != other.tensors.size()) {
        throw std::invalid_argument("GradSet::accumulate: tensor count mismatch");
    }
    for (size_t i = 0; i < tensors.size(); ++i) {
        axpy_in_place(tensors[i], factor, other.tensors[i]);
    }
}

void GradSet::scale_all(double factor) {
    for (Matrix& t : tensors) {
        for (double& v : t.data) v *= factor;
    }
}

double GradSet::global_l2_norm() const {
    double s = 0.0;
    for (const Matrix& t : tensors) {
        for (double v : t.data) s += v * v;
    }
    return std::sqrt(s);
}

double clip_global_norm(GradSet& grads, const GradClipConfig& cfg) {
    if (cfg.max_l2_norm <= 0.0) {
        throw std::invalid_argument("clip_global_norm: max_l2_norm must be > 0");
    }
    const double norm = grads.global_l2_norm();
    if (norm > cfg.max_l2_norm) {
        grads.scale_all(cfg.max_l2_norm / norm);
    }
    return norm;
}

OptimizerState OptimizerState::sgd(double lr, double momentum, double anneal) {
    OptimizerState o;
    o.kind = OptimizerKind::SgdMomentum;
    o.learning_rate = lr;
    o.momentum = momentum;
    o.anneal_rate = anneal;
    return o;
}

OptimizerState OptimizerState::adam(double lr, double beta1, double beta2) {
    OptimizerState o;
    o.kind = OptimizerKind::Adam;
    o.learning_rate = lr;
    o.beta1 = beta1;
    o.beta2 = beta2;
    return o;
}

void OptimizerState::apply(ParamSet& params, const GradSet& grads) {
    // zero freezes the parameters (useful for holding one model part fixed)
    if (learning_rate < 0.0) {
        throw std::invalid_argument("optimizer: learning rate must be >= 0");
    }
    if (params.size() != grads.tensors.size()) {
        throw std::invalid_argument("optimizer: param/grad count mismatch");
    }
    if (m_acc.empty()) {
        for (const Matrix* p : params.tensors) m_acc.emplace_back(p->rows, p->cols, 0.0);
        if (kind == OptimizerKind::Adam) {
            for (const Matrix* p : params.tensors) v_acc.emplace_back(p->rows, p->cols, 0.0);
        }
    }
    for (size_t i = 0; i < params.size(); ++i) {
        if (!params.tensors[i]->same_shape(grads.tensors[i])) {
            throw ShapeError("optimizer: grad shape " + grads.tensors[i].shape_str() + " vs param " +
                             params.tensors[i]->shape_str());
        }
    }

    if (kind == OptimizerKind::SgdMomentum) {
        for (size_t i = 0; i < params.size(); ++i) {
            Matrix& vel = m_acc[i];
            Matrix& p = *params.tensors[i];
            const Matrix& g = grads.tensors[i];
            for (int j = 0; j < p.size(); ++j) {
                vel.data[j] = momentum * vel.data[j] - learning_rate * g.data[j];
                p.data[j] += vel.data[j];
            }
        }
        ++step_count;
        return;
    }

    ++step_count;
    const double t = static_cast<double>(step_count);
    const double bc1 = 1.0 - std::pow(beta1, t);
    const double bc2 = 1.0 - std::pow(beta2, t);
    for (size_t i = 0; i < params.size(); ++i) {
        Matrix& m = m_acc[i];
        Matrix& v = v_acc[i];
        Matrix& p = *params.tensors[i];
        const Matrix& g = grads.tensors[i];
        for (int j = 0; j < p.size(); ++j) {
            m.data[j] = beta1 * m.data[j] + (1.0 - beta1) * g.data[j];
            v.data[j] = beta2 * v.data[j] + (1.0 - beta2) * g.data[j] * g.data[j];
            const double mhat = m.data[j] / bc1;
            const double vhat = v.data[j] / bc2;
            p.data[j] -= learning_rate * mhat / (std::sqrt(vhat) + epsilon);
        }
    }
}

void OptimizerState::epoch_end() {
    if (kind == OptimizerKind::SgdMomentum) {
        learning_rate *= anneal_rate;
    }
}

}  // namespace gsn
