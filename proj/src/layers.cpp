#include "gsnlab/layers.hpp"

#include <cmath>

namespace gsn {

Matrix glorot_uniform(int in, int out, RandomSource& rng) {
    const double limit = std::sqrt(6.0 / (in + out));
    return uniform_matrix(in, out, -limit, limit, rng);
}

DenseLayer DenseLayer::init(int in, int out, Act act, RandomSource& rng) {
    DenseLayer l;
    l.weights = glorot_uniform(in, out, rng);
    l.bias = Matrix(1, out, 0.0);
    l.act = act;
    return l;
}

Matrix dense_forward(const DenseLayer& layer, const Matrix& x, DenseCache* cache) {
    if (x.cols != layer.in()) {
        throw ShapeError("dense_forward: input " + x.shape_str() + " vs weights " + layer.weights.shape_str());
    }
    Matrix y = activate(add_row_bias(matmul(x, layer.weights), layer.bias), layer.act);
    if (cache) {
        cache->x = x;
        cache->y = y;
    }
    return y;
}

Matrix dense_backward(const DenseLayer& layer, const DenseCache& cache, const Matrix& upstream, DenseGrads& grads) {
    if (!upstream.same_shape(cache.y)) {
        throw ShapeError("dense_backward: upstream " + upstream.shape_str() + " vs cached output " + cache.y.shape_str());
    }
    Matrix dpre = hadamard(upstream, activate_grad_from_output(cache.y, layer.act));
    add_in_place(grads.d_weights, matmul(transpose(cache.x), dpre));
    add_in_place(grads.d_bias, col_sums(dpre));
    return matmul(dpre, transpose(layer.weights));
}

LstmCell LstmCell::init(int in, int hidden, RandomSource& rng) {
    LstmCell c;
    c.in_size = in;
    c.hidden_size = hidden;
    c.wx = glorot_uniform(in, 4 * hidden, rng);
    c.wh = glorot_uniform(hidden, 4 * hidden, rng);
    c.bias = Matrix(1, 4 * hidden, 0.0);
    // forget-gate bias starts at 1
    for (int j = hidden; j < 2 * hidden; ++j) c.bias.data[j] = 1.0;
    return c;
}

LstmState lstm_step(const LstmCell& cell, const Matrix& x, const LstmState& state, LstmCache* cache) {
    if (x.cols != cell.in_size) {
        throw ShapeError("lstm_step: input " + x.shape_str() + " vs wx " + cell.wx.shape_str());
    }
    if (state.h.cols != cell.hidden_size || state.h.rows != x.rows) {
        throw ShapeError("lstm_step: state " + state.h.shape_str() + " vs input " + x.shape_str());
    }
    const int h = cell.hidden_size;
    Matrix pre = add_row_bias(add(matmul(x, cell.wx), matmul(state.h, cell.wh)), cell.bias);
    Matrix gi = activate(hslice(pre, 0, h), Act::Sigmoid);
    Matrix gf = activate(hslice(pre, h, 2 * h), Act::Sigmoid);
    Matrix go = activate(hslice(pre, 2 * h, 3 * h), Act::Sigmoid);
    Matrix gg = activate(hslice(pre, 3 * h, 4 * h), Act::Tanh);

    LstmState next;
    next.c = add(hadamard(gf, state.c), hadamard(gi, gg));
    Matrix tanh_c = activate(next.c, Act::Tanh);
    next.h = hadamard(go, tanh_c);
    if (cache) {
        cache->x = x;
        cache->h_prev = state.h;
        cache->c_prev = state.c;
        cache->gi = gi;
        cache->gf = gf;
        cache->go = go;
        cache->gg = gg;
        cache->c_new = next.c;
        cache->tanh_c = tanh_c;
    }
    return next;
}

void lstm_backward(const LstmCell& cell, const LstmCache& cache, const Matrix& dh, const Matrix& dc,
                   Matrix& dx, Matrix& dh_prev, Matrix& dc_prev, LstmGrads& grads) {
    const int h = cell.hidden_size;
    // h = o * tanh(c)
    Matrix d_go = hadamard(dh, cache.tanh_c);
    Matrix d_c = add(dc, hadamard(hadamard(dh, cache.go), activate_grad_from_output(cache.tanh_c, Act::Tanh)));
    // c = f*c_prev + i*g
    Matrix d_gf = hadamard(d_c, cache.c_prev);
    Matrix d_gi = hadamard(d_c, cache.gg);
    Matrix d_gg = hadamard(d_c, cache.gi);
    dc_prev = hadamard(d_c, cache.gf);

    Matrix dpre_i = hadamard(d_gi, activate_grad_from_output(cache.gi, Act::Sigmoid));
    Matrix dpre_f = hadamard(d_gf, activate_grad_from_output(cache.gf, Act::Sigmoid));
    Matrix dpre_o = hadamard(d_go, activate_grad_from_output(cache.go, Act::Sigmoid));
    Matrix dpre_g = hadamard(d_gg, activate_grad_from_output(cache.gg, Act::Tanh));

    Matrix dpre(dh.rows, 4 * h);
    for (int i = 0; i < dh.rows; ++i) {
        for (int j = 0; j < h; ++j) {
            dpre(i, j) = dpre_i(i, j);
            dpre(i, h + j) = dpre_f(i, j);
            dpre(i, 2 * h + j) = dpre_o(i, j);
            dpre(i, 3 * h + j) = dpre_g(i, j);
        }
    }
    add_in_place(grads.d_wx, matmul(transpose(cache.x), dpre));
    add_in_place(grads.d_wh, matmul(transpose(cache.h_prev), dpre));
    add_in_place(grads.d_bias, col_sums(dpre));
    dx = matmul(dpre, transpose(cell.wx));
    dh_prev = matmul(dpre, transpose(cell.wh));
}

static constexpr double kBceEps = 1e-7;

LossResult bce_loss(const Matrix& pred, const Matrix& target) {
    if (!pred.same_shape(target)) {
        throw ShapeError("bce_loss: shape mismatch " + shape_pair(pred, target));
    }
    LossResult res;
    res.grad = Matrix(pred.rows, pred.cols, 0.0);
    const double n = pred.size();
    double total = 0.0;
    for (int i = 0; i < pred.size(); ++i) {
        double p = pred.data[i];
        const double t = target.data[i];
        const bool clamped = p < kBceEps || p > 1.0 - kBceEps;
        if (p < kBceEps) p = kBceEps;
        if (p > 1.0 - kBceEps) p = 1.0 - kBceEps;
        total += -(t * std::log(p) + (1.0 - t) * std::log(1.0 - p));
        res.grad.data[i] = clamped ? 0.0 : (p - t) / (p * (1.0 - p)) / n;
    }
    res.value = total / n;
    return res;
}

LossResult mse_loss(const Matrix& pred, const Matrix& target) {
    if (!pred.same_shape(target)) {
        throw ShapeError("mse_loss: shape mismatch " + shape_pair(pred, target));
    }
    LossResult res;
    res.grad = Matrix(pred.rows, pred.cols, 0.0);
    const double n = pred.size();
    double total = 0.0;
    for (int i = 0; i < pred.size(); ++i) {
        const double d = pred.data[i] - target.data[i];
        total += d * d;
        res.grad.data[i] = 2.0 * d / n;
    }
    res.value = total / n;
    return res;
}

LossResult reconstruction_loss(const Matrix& pred, const Matrix& target, Act visible_act) {
    return visible_act == Act::Sigmoid ? bce_loss(pred, target) : mse_loss(pred, target);
}

}  // namespace gsn
