#pragma once

#include "gsnlab/matrix.hpp"
#include "gsnlab/random.hpp"

namespace gsn {

Matrix glorot_uniform(int in, int out, RandomSource& rng);

struct DenseLayer {
    Matrix weights;  // in x out
    Matrix bias;     // 1 x out
    Act act = Act::Identity;

    int in() const { return weights.rows; }
    int out() const { return weights.cols; }
    static DenseLayer init(int in, int out, Act act, RandomSource& rng);
};

struct DenseCache {
    Matrix x;  // input
    Matrix y;  // activation output
};

struct DenseGrads {
    Matrix d_weights;
    Matrix d_bias;
};

Matrix dense_forward(const DenseLayer& layer, const Matrix& x, DenseCache* cache = nullptr);
// Returns input gradient; accumulates parameter gradients into `grads`.
Matrix dense_backward(const DenseLayer& layer, const DenseCache& cache, const Matrix& upstream, DenseGrads& grads);

// Single-layer LSTM cell, no peepholes. Gate blocks ordered i, f, o, g
// within the 4h-wide weight matrices.
struct LstmCell {
    Matrix wx;    // in x 4h
    Matrix wh;    // h x 4h
    Matrix bias;  // 1 x 4h, forget block initialized to 1
    int in_size = 0;
    int hidden_size = 0;

    static LstmCell init(int in, int hidden, RandomSource& rng);
};

struct LstmState {
    Matrix h;  // batch x hidden
    Matrix c;
    static LstmState zero(int batch, int hidden) {
        return {Matrix(batch, hidden, 0.0), Matrix(batch, hidden, 0.0)};
    }
};

struct LstmCache {
    Matrix x, h_prev, c_prev;
    Matrix gi, gf, go, gg;  // post-nonlinearity gate values
    Matrix c_new, tanh_c;
};

struct LstmGrads {
    Matrix d_wx, d_wh, d_bias;
};

LstmState lstm_step(const LstmCell& cell, const Matrix& x, const LstmState& state, LstmCache* cache = nullptr);
// Accumulates parameter gradients; writes input and prior-state gradients.
void lstm_backward(const LstmCell& cell, const LstmCache& cache, const Matrix& dh, const Matrix& dc,
                   Matrix& dx, Matrix& dh_prev, Matrix& dc_prev, LstmGrads& grads);

struct LossResult {
    double value = 0.0;
    Matrix grad;  // d loss / d pred
};

// Mean over elements of -[t log p + (1-t) log(1-p)], predictions clamped
// to [1e-7, 1-1e-7].
LossResult bce_loss(const Matrix& pred, const Matrix& target);
LossResult mse_loss(const Matrix& pred, const Matrix& target);
LossResult reconstruction_loss(const Matrix& pred, const Matrix& target, Act visible_act);

}  // namespace gsn
