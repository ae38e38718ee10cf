#include "gsnlab/modelcheck.hpp"

#include <algorithm>
#include <stdexcept>

#include "gsnlab/sequence.hpp"

namespace gsn {

namespace {

Matrix random_unit(int rows, int cols, RandomSource& rng) {
    Matrix m(rows, cols);
    for (double& v : m.data) v = 0.05 + 0.9 * rng.uniform();
    return m;
}

Matrix random_signed(int rows, int cols, RandomSource& rng) {
    Matrix m(rows, cols);
    for (double& v : m.data) v = 2.0 * rng.uniform() - 1.0;
    return m;
}

double check_dense(const std::vector<int>& widths, uint64_t seed) {
    if (widths.size() != 2) throw std::invalid_argument("dense check needs {in, out}");
    RandomSource rng(seed);
    DenseLayer layer = DenseLayer::init(widths[0], widths[1], Act::Tanh, rng);
    Matrix x = random_signed(2, widths[0], rng);
    Matrix target = random_signed(2, widths[1], rng);

    DenseCache cache;
    Matrix y = dense_forward(layer, x, &cache);
    LossResult lr = mse_loss(y, target);
    DenseGrads dg{Matrix(layer.weights.rows, layer.weights.cols, 0.0), Matrix(1, layer.bias.cols, 0.0)};
    dense_backward(layer, cache, lr.grad, dg);

    ParamSet params;
    params.add(layer.weights);
    params.add(layer.bias);
    GradSet analytic;
    analytic.tensors = {dg.d_weights, dg.d_bias};
    auto loss_fn = [&] { return mse_loss(dense_forward(layer, x), target).value; };
    return gradcheck_max_rel_err(loss_fn, params, analytic);
}

double check_lstm(const std::vector<int>& widths, uint64_t seed) {
    if (widths.size() != 2) throw std::invalid_argument("lstm check needs {in, hidden}");
    RandomSource rng(seed);
    LstmCell cell = LstmCell::init(widths[0], widths[1], rng);
    Matrix x = random_signed(2, widths[0], rng);
    Matrix target = random_signed(2, widths[1], rng);
    LstmState init = LstmState::zero(2, widths[1]);

    LstmCache cache;
    LstmState out = lstm_step(cell, x, init, &cache);
    LossResult lr = mse_loss(out.h, target);
    LstmGrads lg{Matrix(cell.wx.rows, cell.wx.cols, 0.0), Matrix(cell.wh.rows, cell.wh.cols, 0.0),
                 Matrix(1, cell.bias.cols, 0.0)};
    Matrix dx, dh_prev, dc_prev;
    Matrix dc0(2, widths[1], 0.0);
    lstm_backward(cell, cache, lr.grad, dc0, dx, dh_prev, dc_prev, lg);

    ParamSet params;
    params.add(cell.wx);
    params.add(cell.wh);
    params.add(cell.bias);
    GradSet analytic;
    analytic.tensors = {lg.d_wx, lg.d_wh, lg.d_bias};
    auto loss_fn = [&] { return mse_loss(lstm_step(cell, x, init).h, target).value; };
    return gradcheck_max_rel_err(loss_fn, params, analytic);
}

GsnParams small_gsn(const std::vector<int>& widths, bool tied, RandomSource& rng) {
    NoiseConfig noise;
    noise.salt_pepper_p = 0.25;
    noise.gauss_sigma = 0.3;
    noise.apply_pre_activation = true;
    noise.apply_post_activation = true;
    return GsnParams::init(widths, tied, noise, Act::Tanh, Act::Sigmoid, rng);
}

double check_dae(const std::vector<int>& widths, uint64_t seed) {
    if (widths.size() != 2) throw std::invalid_argument("dae check needs {visible, hidden}");
    RandomSource rng(seed);
    NoiseConfig noise;
    noise.salt_pepper_p = 0.3;  // input corruption only
    GsnParams p = GsnParams::init(widths, true, noise, Act::Tanh, Act::Sigmoid, rng);
    Matrix x = random_unit(2, widths[0], rng);
    const uint64_t noise_seed = rng.next_u64();

    RandomSource frozen(noise_seed);
    DaeStepResult step = dae_train_step(p, x, frozen, true);
    ParamSet params = p.param_refs();
    GradSet analytic = step.grads.to_grad_set(p);
    auto loss_fn = [&] {
        RandomSource r(noise_seed);
        return dae_train_step(p, x, r, false).loss;
    };
    return gradcheck_max_rel_err(loss_fn, params, analytic);
}

double check_gsn(const std::vector<int>& widths, uint64_t seed) {
    if (widths.size() < 2) throw std::invalid_argument("gsn check needs {visible, hidden...}");
    RandomSource rng(seed);
    GsnParams p = small_gsn(widths, true, rng);
    Matrix x = random_unit(2, widths[0], rng);
    WalkbackConfig wb;
    wb.k = 2;
    const uint64_t noise_seed = rng.next_u64();

    RandomSource frozen(noise_seed);
    WalkbackTrainResult step = walkback_train(p, x, wb, frozen, true);
    ParamSet params = p.param_refs();
    GradSet analytic = step.grads.to_grad_set(p);
    auto loss_fn = [&] {
        RandomSource r(noise_seed);
        return walkback_train(p, x, wb, r, false).loss;
    };
    return gradcheck_max_rel_err(loss_fn, params, analytic);
}

double check_tgsn(const std::vector<int>& widths, uint64_t seed) {
    if (widths.size() < 2) throw std::invalid_argument("tgsn check needs {visible, hidden...}");
    RandomSource rng(seed);
    NoiseConfig noise;
    WalkbackConfig wb;
    wb.k = 2;
    TgsnModel model = TgsnModel::init(widths, true, noise, Act::Tanh, Act::Sigmoid, 2, wb, rng);
    const int h_total = model.gsn.hidden_total();
    std::vector<Matrix> history = {random_signed(2, h_total, rng), random_signed(2, h_total, rng)};
    Matrix target = random_unit(2, widths[0], rng);
    const int h1_width = widths[1];

    auto loss_fn = [&] {
        Matrix pred = transition_predict(model.transition, history);
        Matrix h1 = hslice(pred, 0, h1_width);
        Matrix x_pred = gsn_decode_from_hidden1(model.gsn, h1);
        return reconstruction_loss(x_pred, target, model.gsn.visible_act).value;
    };
    Matrix pred = transition_predict(model.transition, history);
    Matrix h1 = hslice(pred, 0, h1_width);
    Matrix x_pred = gsn_decode_from_hidden1(model.gsn, h1);
    LossResult lr = reconstruction_loss(x_pred, target, model.gsn.visible_act);
    Matrix d_h1 = gsn_decode_backward(model.gsn, h1, x_pred, lr.grad, nullptr);
    Matrix d_pred(pred.rows, pred.cols, 0.0);
    for (int r = 0; r < d_h1.rows; ++r) {
        for (int c = 0; c < d_h1.cols; ++c) d_pred(r, c) = d_h1(r, c);
    }
    ParamSet params = model.transition.param_refs();
    GradSet analytic = GradSet::zeros_like(params);
    transition_backward(model.transition, history, d_pred, analytic);
    return gradcheck_max_rel_err(loss_fn, params, analytic);
}

double check_rnngsn(const std::vector<int>& widths, uint64_t seed) {
    if (widths.size() < 2) throw std::invalid_argument("rnn_gsn check needs {visible, hidden...}");
    RandomSource rng(seed);
    NoiseConfig noise;
    WalkbackConfig wb;
    wb.k = 2;
    RnnGsnModel model = RnnGsnModel::init(widths, true, noise, Act::Tanh, Act::Sigmoid, 5, wb, rng);
    Matrix tap = random_signed(2, model.tap_width(), rng);
    Matrix target = random_unit(2, widths[0], rng);
    LstmState init = LstmState::zero(2, 5);
    const int h1_width = widths[1];

    auto forward = [&](LstmCache* lc, DenseCache* pc, Matrix* pred_out, Matrix* h1_out,
                       Matrix* x_pred_out) {
        LstmState s = lstm_step(model.lstm, tap, init, lc);
        Matrix pred = dense_forward(model.projection, s.h, pc);
        Matrix h1 = hslice(pred, 0, h1_width);
        Matrix x_pred = gsn_decode_from_hidden1(model.gsn, h1);
        if (pred_out) *pred_out = pred;
        if (h1_out) *h1_out = h1;
        if (x_pred_out) *x_pred_out = x_pred;
        return reconstruction_loss(x_pred, target, model.gsn.visible_act).value;
    };
    auto loss_fn = [&] { return forward(nullptr, nullptr, nullptr, nullptr, nullptr); };

    LstmCache lc;
    DenseCache pc;
    Matrix pred, h1, x_pred;
    forward(&lc, &pc, &pred, &h1, &x_pred);
    LossResult lr = reconstruction_loss(x_pred, target, model.gsn.visible_act);
    Matrix d_h1 = gsn_decode_backward(model.gsn, h1, x_pred, lr.grad, nullptr);
    Matrix d_pred(pred.rows, pred.cols, 0.0);
    for (int r = 0; r < d_h1.rows; ++r) {
        for (int c = 0; c < d_h1.cols; ++c) d_pred(r, c) = d_h1(r, c);
    }
    DenseGrads proj_grads{Matrix(model.projection.weights.rows, model.projection.weights.cols, 0.0),
                          Matrix(1, model.projection.bias.cols, 0.0)};
    Matrix d_lstm_h = dense_backward(model.projection, pc, d_pred, proj_grads);
    LstmGrads lstm_grads{Matrix(model.lstm.wx.rows, model.lstm.wx.cols, 0.0),
                         Matrix(model.lstm.wh.rows, model.lstm.wh.cols, 0.0),
                         Matrix(1, model.lstm.bias.cols, 0.0)};
    Matrix dx, dh_prev, dc_prev;
    Matrix dc0(2, 5, 0.0);
    lstm_backward(model.lstm, lc, d_lstm_h, dc0, dx, dh_prev, dc_prev, lstm_grads);

    ParamSet params = model.rnn_param_refs();
    GradSet analytic;
    analytic.tensors = {lstm_grads.d_wx, lstm_grads.d_wh, lstm_grads.d_bias, proj_grads.d_weights,
                        proj_grads.d_bias};
    return gradcheck_max_rel_err(loss_fn, params, analytic);
}

double check_sen(const std::vector<int>& widths, uint64_t seed) {
    if (widths.size() < 2) throw std::invalid_argument("sen check needs {visible, hidden...}");
    RandomSource rng(seed);
    NoiseConfig noise;
    noise.salt_pepper_p = 0.2;
    WalkbackConfig wb;
    wb.k = 1;
    std::vector<int> hidden(widths.begin() + 1, widths.end());
    SenStack stack = SenStack::init(1, widths[0], hidden, 4, true, noise, Act::Sigmoid, wb, rng);
    Matrix x = random_unit(1, widths[0], rng);
    Matrix x_next = random_unit(1, widths[0], rng);
    const uint64_t noise_seed = rng.next_u64();

    SenTrainOptions opts;
    opts.wb = wb;
    opts.clip = false;

    ParamSet params = stack.param_refs();
    const size_t n_gsn = stack.levels[0].gsn.param_refs().size();

    // The recurrent path consumes the chain's ending hiddens as training
    // constants, so the chain parameters' gradient is defined against the
    // reconstruction term only. Check the two terms separately: the
    // reconstruction loss against every parameter, then the full loss
    // against the recurrent-path parameters it flows through exactly.
    double worst = 0.0;
    {
        GradSet analytic;
        {
            RandomSource r(noise_seed);
            SenRunState state = sen_init_state(stack, 1);
            sen_train_step(stack, x, nullptr, state, nullptr, opts, r, &analytic);
        }
        auto loss_fn = [&] {
            RandomSource r(noise_seed);
            SenRunState state = sen_init_state(stack, 1);
            return sen_train_step(stack, x, nullptr, state, nullptr, opts, r).total;
        };
        worst = std::max(worst, gradcheck_max_rel_err(loss_fn, params, analytic));
    }
    {
        GradSet full;
        {
            RandomSource r(noise_seed);
            SenRunState state = sen_init_state(stack, 1);
            sen_train_step(stack, x, &x_next, state, nullptr, opts, r, &full);
        }
        ParamSet rnn_params;
        GradSet analytic;
        for (size_t i = n_gsn; i < n_gsn + 5; ++i) {
            rnn_params.tensors.push_back(params.tensors[i]);
            analytic.tensors.push_back(full.tensors[i]);
        }
        auto loss_fn = [&] {
            RandomSource r(noise_seed);
            SenRunState state = sen_init_state(stack, 1);
            return sen_train_step(stack, x, &x_next, state, nullptr, opts, r).total;
        };
        worst = std::max(worst, gradcheck_max_rel_err(loss_fn, rnn_params, analytic));
    }
    return worst;
}

}  // namespace

double gradcheck_model(const std::string& model, const std::vector<int>& widths, uint64_t seed) {
    if (model == "dense") return check_dense(widths, seed);
    if (model == "lstm") return check_lstm(widths, seed);
    if (model == "dae") return check_dae(widths, seed);
    if (model == "gsn") return check_gsn(widths, seed);
    if (model == "tgsn") return check_tgsn(widths, seed);
    if (model == "rnn_gsn") return check_rnngsn(widths, seed);
    if (model == "sen") return check_sen(widths, seed);
    throw std::invalid_argument("unknown gradcheck model: " + model);
}

}  // namespace gsn
