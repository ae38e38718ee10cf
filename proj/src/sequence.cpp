#include "gsnlab/sequence.hpp"

#include <cmath>
#include <stdexcept>

namespace gsn {

namespace {

void embed_cols(Matrix& dst, const Matrix& src, int col_off) {
    for (int i = 0; i < src.rows; ++i) {
        for (int j = 0; j < src.cols; ++j) {
            dst(i, col_off + j) += src(i, j);
        }
    }
}

}  // namespace

// ---- LinearTransition ----------------------------------------------------

LinearTransition LinearTransition::init(int window, int h_total, RandomSource& rng) {
    if (window < 1) throw std::invalid_argument("transition window must be >= 1");
    LinearTransition t;
    t.window = window;
    t.weights = glorot_uniform(window * h_total, h_total, rng);
    t.bias = Matrix(1, h_total, 0.0);
    return t;
}

ParamSet LinearTransition::param_refs() {
    ParamSet ps;
    ps.add(weights);
    ps.add(bias);
    return ps;
}

void HiddenHistory::push(const Matrix& stack) {
    stacks.push_back(stack);
    while (static_cast<int>(stacks.size()) > window) stacks.pop_front();
}

std::vector<Matrix> HiddenHistory::recent() const {
    std::vector<Matrix> out;
    const int missing = window - static_cast<int>(stacks.size());
    for (int i = 0; i < missing; ++i) out.emplace_back(batch, h_total, 0.0);
    for (const Matrix& m : stacks) out.push_back(m);
    return out;
}

Matrix transition_predict(const LinearTransition& t, const std::vector<Matrix>& history) {
    if (static_cast<int>(history.size()) != t.window) {
        throw std::invalid_argument("transition_predict: history length " +
                                    std::to_string(history.size()) + " != window " +
                                    std::to_string(t.window));
    }
    std::vector<const Matrix*> parts;
    for (const Matrix& m : history) parts.push_back(&m);
    return add_row_bias(matmul(hcat(parts), t.weights), t.bias);
}

void transition_backward(const LinearTransition& t, const std::vector<Matrix>& history,
                         const Matrix& d_pred, GradSet& grads) {
    std::vector<const Matrix*> parts;
    for (const Matrix& m : history) parts.push_back(&m);
    Matrix concat = hcat(parts);
    add_in_place(grads.tensors[0], matmul(transpose(concat), d_pred));
    add_in_place(grads.tensors[1], col_sums(d_pred));
}

// ---- TGSN ----------------------------------------------------------------

TgsnModel TgsnModel::init(const std::vector<int>& layer_sizes, bool tied, const NoiseConfig& noise,
                          Act hidden_act, Act visible_act, int window, const WalkbackConfig& wb,
                          RandomSource& rng) {
    TgsnModel m;
    m.gsn = GsnParams::init(layer_sizes, tied, noise, hidden_act, visible_act, rng);
    m.transition = LinearTransition::init(window, m.gsn.hidden_total(), rng);
    m.wb = wb;
    return m;
}

Matrix TgsnModel::predict_next(HiddenHistory& history, const Matrix& x_t, RandomSource& rng) const {
    WalkbackTrainResult wr = walkback_train(gsn, x_t, wb, rng, false);
    history.push(wr.ending.flatten_hidden());
    Matrix pred_stack = transition_predict(transition, history.recent());
    Matrix h1 = hslice(pred_stack, 0, gsn.layer_sizes[1]);
    return gsn_decode_from_hidden1(gsn, h1);
}

TgsnEpochLosses tgsn_em_epoch(TgsnModel& model, const std::vector<Matrix>& frames,
                              OptimizerState& opt_gsn, OptimizerState& opt_trans, RandomSource& rng,
                              bool gate_open) {
    if (frames.size() < 2) {
        throw std::invalid_argument("tgsn_em_epoch: need at least 2 inputs, got " +
                                    std::to_string(frames.size()));
    }
    const size_t T = frames.size();
    const int h1_width = model.gsn.layer_sizes[1];
    TgsnEpochLosses losses;

    // Pass 1: GSN phase (transition frozen).
    {
        HiddenHistory history{model.transition.window, model.gsn.hidden_total(), frames[0].rows, {}};
        ParamSet gsn_params = model.gsn.param_refs();
        for (size_t t = 0; t < T; ++t) {
            WalkbackTrainResult wr = walkback_train(model.gsn, frames[t], model.wb, rng, true);
            losses.recon += wr.loss / T;
            history.push(wr.ending.flatten_hidden());
            if (gate_open && t + 1 < T) {
                Matrix pred_stack = transition_predict(model.transition, history.recent());
                Matrix h1 = hslice(pred_stack, 0, h1_width);
                Matrix x_pred = gsn_decode_from_hidden1(model.gsn, h1);
                LossResult lr = reconstruction_loss(x_pred, frames[t + 1], model.gsn.visible_act);
                gsn_decode_backward(model.gsn, h1, x_pred, lr.grad, &wr.grads);
            }
            GradSet gs = wr.grads.to_grad_set(model.gsn);
            opt_gsn.apply(gsn_params, gs);
        }
    }

    // Pass 2: transition phase (GSN frozen).
    {
        HiddenHistory history{model.transition.window, model.gsn.hidden_total(), frames[0].rows, {}};
        ParamSet trans_params = model.transition.param_refs();
        for (size_t t = 0; t + 1 < T; ++t) {
            WalkbackTrainResult wr = walkback_train(model.gsn, frames[t], model.wb, rng, false);
            history.push(wr.ending.flatten_hidden());
            std::vector<Matrix> recent = history.recent();
            Matrix pred_stack = transition_predict(model.transition, recent);
            Matrix h1 = hslice(pred_stack, 0, h1_width);
            Matrix x_pred = gsn_decode_from_hidden1(model.gsn, h1);
            LossResult lr = reconstruction_loss(x_pred, frames[t + 1], model.gsn.visible_act);
            losses.pred += lr.value / (T - 1);
            Matrix d_h1 = gsn_decode_backward(model.gsn, h1, x_pred, lr.grad, nullptr);
            Matrix d_pred(pred_stack.rows, pred_stack.cols, 0.0);
            embed_cols(d_pred, d_h1, 0);
            GradSet grads = GradSet::zeros_like(trans_params);
            transition_backward(model.transition, recent, d_pred, grads);
            opt_trans.apply(trans_params, grads);
        }
    }
    return losses;
}

bool tgsn_warmup_gate(const std::vector<double>& recon_history, double threshold) {
    if (recon_history.size() < 2) return false;
    const double prev = recon_history[recon_history.size() - 2];
    const double cur = recon_history.back();
    const double rel = (prev - cur) / std::max(std::fabs(prev), 1e-12);
    return rel < threshold;
}

// ---- Untied GSN as an RNN ------------------------------------------------

UntiedGsnModel UntiedGsnModel::init(const std::vector<int>& layer_sizes, const NoiseConfig& noise,
                                    Act hidden_act, Act visible_act, int k, RandomSource& rng) {
    UntiedGsnModel m;
    m.gsn = GsnParams::init(layer_sizes, /*tied=*/false, noise, hidden_act, visible_act, rng);
    if (k < 2 * m.gsn.n_hidden()) {
        throw std::invalid_argument("untied GSN: k must be >= 2*N (" +
                                    std::to_string(2 * m.gsn.n_hidden()) + "), got " + std::to_string(k));
    }
    m.k = k;
    return m;
}

void UntiedGsnModel::reset_state() {
    has_carry = false;
    carry = GsnState{};
}

UntiedStepResult untied_gsn_online_step(UntiedGsnModel& model, const Matrix& x_t, long t,
                                        PredictionBuffer& buf, OptimizerState& opt, RandomSource& rng) {
    UntiedStepResult res;
    GsnGrads grads = GsnGrads::zeros_like(model.gsn);

    // Score every buffered prediction for this timestep.
    std::vector<std::pair<const ChainTape*, int>> matches;
    for (const auto& chain : buf.chains) {
        const long j = t - chain.start_t - 1;
        if (j >= 0 && j < static_cast<long>(chain.tape.emitted.size())) {
            matches.emplace_back(&chain.tape, static_cast<int>(j));
        }
    }
    if (!matches.empty()) {
        const double w = 1.0 / matches.size();
        for (auto& [tape, j] : matches) {
            LossResult lr = reconstruction_loss(tape->emitted[j], x_t, model.gsn.visible_act);
            res.loss += w * lr.value;
            std::vector<Matrix> loss_grads(tape->emitted.size());
            loss_grads[j] = scale(lr.grad, w);
            chain_backward(model.gsn, *tape, loss_grads, grads);
        }
        res.n_pairs = static_cast<int>(matches.size());
        ParamSet params = model.gsn.param_refs();
        GradSet gs = grads.to_grad_set(model.gsn);
        opt.apply(params, gs);
    }

    // Drop chains with no unmatured predictions left.
    while (!buf.chains.empty() && buf.chains.front().start_t + buf.k <= t) {
        buf.chains.pop_front();
    }

    // Run the free chain from x_t and buffer its k predictions.
    GsnState start = model.has_carry ? model.carry : GsnState::zero(model.gsn, x_t.rows);
    start.a[0] = x_t;
    ChainTape tape = gsn_free_chain(model.gsn, start, model.k, rng);
    model.carry = tape.states_after_step[0];
    model.has_carry = true;
    buf.chains.push_back({t, std::move(tape)});
    return res;
}

Matrix untied_predict_next(UntiedGsnModel& model, const Matrix& x_t, RandomSource& rng) {
    GsnState start = model.has_carry ? model.carry : GsnState::zero(model.gsn, x_t.rows);
    start.a[0] = x_t;
    ChainTape tape = gsn_free_chain(model.gsn, start, 1, rng);
    model.carry = tape.states_after_step[0];
    model.has_carry = true;
    return tape.emitted[0];
}

std::vector<Matrix> untied_predict_horizons(const UntiedGsnModel& model, const Matrix& x_t,
                                            RandomSource& rng) {
    GsnState start = model.has_carry ? model.carry : GsnState::zero(model.gsn, x_t.rows);
    start.a[0] = x_t;
    ChainTape tape = gsn_free_chain(model.gsn, start, model.k, rng);
    return tape.emitted;
}

// ---- RNN-GSN -------------------------------------------------------------

std::vector<int> RnnGsnModel::default_taps(int n_hidden) {
    if (n_hidden >= 3) return {1, 3};
    std::vector<int> taps;
    for (int i = 1; i <= n_hidden; i += 2) taps.push_back(i);
    return taps;
}

RnnGsnModel RnnGsnModel::init(const std::vector<int>& layer_sizes, bool tied, const NoiseConfig& noise,
                              Act hidden_act, Act visible_act, int lstm_hidden, const WalkbackConfig& wb,
                              RandomSource& rng) {
    RnnGsnModel m;
    m.gsn = GsnParams::init(layer_sizes, tied, noise, hidden_act, visible_act, rng);
    m.taps = default_taps(m.gsn.n_hidden());
    m.wb = wb;
    m.lstm = LstmCell::init(m.tap_width(), lstm_hidden, rng);
    m.projection = DenseLayer::init(lstm_hidden, m.gsn.hidden_total(), Act::Tanh, rng);
    return m;
}

int RnnGsnModel::tap_width() const {
    int w = 0;
    for (int t : taps) w += gsn.layer_sizes[t];
    return w;
}

Matrix RnnGsnModel::tapped(const GsnState& ending) const {
    std::vector<const Matrix*> parts;
    for (int t : taps) parts.push_back(&ending.a[t]);
    return hcat(parts);
}

ParamSet RnnGsnModel::rnn_param_refs() {
    ParamSet ps;
    ps.add(lstm.wx);
    ps.add(lstm.wh);
    ps.add(lstm.bias);
    ps.add(projection.weights);
    ps.add(projection.bias);
    return ps;
}

Matrix RnnGsnModel::predict_next(const Matrix& x_t, LstmState& state, RandomSource& rng) const {
    WalkbackTrainResult wr = walkback_train(gsn, x_t, wb, rng, false);
    Matrix tap = tapped(wr.ending);
    state = lstm_step(lstm, tap, state, nullptr);
    Matrix pred_stack = dense_forward(projection, state.h, nullptr);
    Matrix h1 = hslice(pred_stack, 0, gsn.layer_sizes[1]);
    return gsn_decode_from_hidden1(gsn, h1);
}

RnnGsnStepResult rnngsn_train_step(RnnGsnModel& model, const Matrix& x_t, const Matrix* x_next,
                                   LstmState& state, OptimizerState* opt_gsn, OptimizerState* opt_rnn,
                                   RandomSource& rng) {
    RnnGsnStepResult res;

    // Reconstruction term: GSN parameters only.
    WalkbackTrainResult wr = walkback_train(model.gsn, x_t, model.wb, rng, opt_gsn != nullptr);
    res.recon_loss = wr.loss;
    if (opt_gsn) {
        ParamSet gsn_params = model.gsn.param_refs();
        GradSet gs = wr.grads.to_grad_set(model.gsn);
        opt_gsn->apply(gsn_params, gs);
    }

    // Prediction term: LSTM + projection only, decoder frozen.
    Matrix tap = model.tapped(wr.ending);
    LstmCache lstm_cache;
    state = lstm_step(model.lstm, tap, state, &lstm_cache);
    DenseCache proj_cache;
    Matrix pred_stack = dense_forward(model.projection, state.h, &proj_cache);
    if (x_next) {
        const int h1_width = model.gsn.layer_sizes[1];
        Matrix h1 = hslice(pred_stack, 0, h1_width);
        Matrix x_pred = gsn_decode_from_hidden1(model.gsn, h1);
        LossResult lr = reconstruction_loss(x_pred, *x_next, model.gsn.visible_act);
        res.pred_loss = lr.value;
        res.pred_present = true;
        if (opt_rnn) {
            Matrix d_h1 = gsn_decode_backward(model.gsn, h1, x_pred, lr.grad, nullptr);
            Matrix d_pred(pred_stack.rows, pred_stack.cols, 0.0);
            embed_cols(d_pred, d_h1, 0);
            DenseGrads proj_grads{Matrix(model.projection.weights.rows, model.projection.weights.cols, 0.0),
                                  Matrix(1, model.projection.bias.cols, 0.0)};
            Matrix d_lstm_h = dense_backward(model.projection, proj_cache, d_pred, proj_grads);
            LstmGrads lstm_grads{Matrix(model.lstm.wx.rows, model.lstm.wx.cols, 0.0),
                                 Matrix(model.lstm.wh.rows, model.lstm.wh.cols, 0.0),
                                 Matrix(1, model.lstm.bias.cols, 0.0)};
            Matrix dx, dh_prev, dc_prev;
            Matrix dc_zero(d_lstm_h.rows, d_lstm_h.cols, 0.0);
            lstm_backward(model.lstm, lstm_cache, d_lstm_h, dc_zero, dx, dh_prev, dc_prev, lstm_grads);
            GradSet grads;
            grads.tensors = {lstm_grads.d_wx, lstm_grads.d_wh, lstm_grads.d_bias,
                             proj_grads.d_weights, proj_grads.d_bias};
            ParamSet rnn_params = model.rnn_param_refs();
            opt_rnn->apply(rnn_params, grads);
        }
    }
    return res;
}

// ---- SEN -----------------------------------------------------------------

SenStack SenStack::init(int n_levels, int input_width, const std::vector<int>& gsn_hidden,
                        int lstm_hidden, bool tied, const NoiseConfig& noise, Act level0_visible,
                        const WalkbackConfig& wb0, RandomSource& rng) {
    (void)wb0;
    SenStack stack;
    int in_width = input_width;
    for (int lvl = 0; lvl < n_levels; ++lvl) {
        SenLevel level;
        std::vector<int> sizes;
        sizes.push_back(in_width);
        for (int h : gsn_hidden) sizes.push_back(h);
        NoiseConfig lvl_noise = noise;
        Act visible = lvl == 0 ? level0_visible : Act::Tanh;
        if (lvl > 0) lvl_noise.salt_pepper_p = 0.0;  // salt-and-pepper assumes [0,1] inputs
        level.gsn = GsnParams::init(sizes, tied, lvl_noise, Act::Tanh, visible, rng);
        level.taps = RnnGsnModel::default_taps(level.gsn.n_hidden());
        int tap_w = 0;
        for (int t : level.taps) tap_w += level.gsn.layer_sizes[t];
        level.lstm = LstmCell::init(tap_w, lstm_hidden, rng);
        level.projection = DenseLayer::init(lstm_hidden, level.gsn.hidden_total(), Act::Tanh, rng);
        stack.levels.push_back(std::move(level));
        in_width = lstm_hidden;
    }
    return stack;
}

ParamSet SenStack::param_refs() {
    ParamSet ps;
    for (SenLevel& level : levels) {
        ParamSet gp = level.gsn.param_refs();
        for (Matrix* m : gp.tensors) ps.tensors.push_back(m);
        ps.add(level.lstm.wx);
        ps.add(level.lstm.wh);
        ps.add(level.lstm.bias);
        ps.add(level.projection.weights);
        ps.add(level.projection.bias);
    }
    return ps;
}

SenRunState sen_init_state(const SenStack& stack, int batch) {
    SenRunState s;
    for (const SenLevel& level : stack.levels) {
        s.lstm_states.push_back(LstmState::zero(batch, level.lstm.hidden_size));
        s.pending.emplace_back();
    }
    return s;
}

namespace {

Matrix sen_tapped(const SenLevel& level, const GsnState& ending) {
    std::vector<const Matrix*> parts;
    for (int t : level.taps) parts.push_back(&ending.a[t]);
    return hcat(parts);
}

}  // namespace

SenForwardResult sen_forward(SenStack& stack, const Matrix& x_t, SenRunState& state, RandomSource& rng) {
    SenForwardResult res;
    WalkbackConfig wb;
    wb.k = 1;
    Matrix input = x_t;
    for (size_t lvl = 0; lvl < stack.levels.size(); ++lvl) {
        SenLevel& level = stack.levels[lvl];
        WalkbackTrainResult wr = walkback_train(level.gsn, input, wb, rng, false);
        res.hiddens.push_back(wr.ending);
        res.reconstructions.push_back(wr.final_recon);
        Matrix tap = sen_tapped(level, wr.ending);
        state.lstm_states[lvl] = lstm_step(level.lstm, tap, state.lstm_states[lvl], nullptr);
        res.predicted_next.push_back(dense_forward(level.projection, state.lstm_states[lvl].h, nullptr));
        input = state.lstm_states[lvl].h;
    }
    return res;
}

SenStepLosses sen_train_step(SenStack& stack, const Matrix& x_t, const Matrix* x_next,
                             SenRunState& state, OptimizerState* opt, const SenTrainOptions& opts,
                             RandomSource& rng, GradSet* out_grads) {
    const size_t L = stack.levels.size();
    SenStepLosses losses;
    losses.recon.assign(L, 0.0);
    losses.pred.assign(L, 0.0);

    ParamSet params = stack.param_refs();
    GradSet grads = GradSet::zeros_like(params);
    const bool training = opt != nullptr || out_grads != nullptr;

    // Per-level gradient slot offsets inside the combined GradSet.
    std::vector<size_t> offsets;
    {
        size_t off = 0;
        for (SenLevel& level : stack.levels) {
            offsets.push_back(off);
            off += level.gsn.param_refs().size() + 5;
        }
    }

    Matrix input = x_t;
    std::vector<SenRunState::Pending> new_pending(L);
    for (size_t lvl = 0; lvl < L; ++lvl) {
        SenLevel& level = stack.levels[lvl];
        const size_t off = offsets[lvl];
        const size_t n_gsn = level.gsn.param_refs().size();

        // Reconstruction term for this level's GSN.
        WalkbackTrainResult wr = walkback_train(level.gsn, input, opts.wb, rng, training);
        losses.recon[lvl] = wr.loss;
        if (training) {
            GradSet gs = wr.grads.to_grad_set(level.gsn);
            for (size_t i = 0; i < n_gsn; ++i) add_in_place(grads.tensors[off + i], gs.tensors[i]);
        }

        // Score the prediction made for this timestep.
        const Matrix* target = nullptr;
        Matrix immediate_target;
        SenRunState::Pending* pend = nullptr;
        Matrix pred_hidden_scored;
        if (lvl == 0) {
            // level 0 is scored against x_next below, after its new
            // prediction is formed
        } else if (state.pending[lvl].valid) {
            pend = &state.pending[lvl];
            target = &input;  // current level input = previous level's V at time t
            pred_hidden_scored = pend->pred_hidden;
        }
        if (pend && target) {
            const int h1_width = level.gsn.layer_sizes[1];
            Matrix h1 = hslice(pred_hidden_scored, 0, h1_width);
            Matrix x_pred = gsn_decode_from_hidden1(level.gsn, h1);
            LossResult lr = reconstruction_loss(x_pred, *target, level.gsn.visible_act);
            losses.pred[lvl] = lr.value;
            if (training) {
                GsnGrads dec_grads = GsnGrads::zeros_like(level.gsn);
                Matrix d_h1 = gsn_decode_backward(level.gsn, h1, x_pred, lr.grad, &dec_grads);
                GradSet dec_gs = dec_grads.to_grad_set(level.gsn);
                for (size_t i = 0; i < n_gsn; ++i) add_in_place(grads.tensors[off + i], dec_gs.tensors[i]);
                Matrix d_pred(pred_hidden_scored.rows, pred_hidden_scored.cols, 0.0);
                embed_cols(d_pred, d_h1, 0);
                DenseGrads proj_grads{Matrix(level.projection.weights.rows, level.projection.weights.cols, 0.0),
                                      Matrix(1, level.projection.bias.cols, 0.0)};
                Matrix d_lstm_h = dense_backward(level.projection, pend->proj_cache, d_pred, proj_grads);
                LstmGrads lstm_grads{Matrix(level.lstm.wx.rows, level.lstm.wx.cols, 0.0),
                                     Matrix(level.lstm.wh.rows, level.lstm.wh.cols, 0.0),
                                     Matrix(1, level.lstm.bias.cols, 0.0)};
                Matrix dx, dh_prev, dc_prev;
                Matrix dc_zero(d_lstm_h.rows, d_lstm_h.cols, 0.0);
                lstm_backward(level.lstm, pend->lstm_cache, d_lstm_h, dc_zero, dx, dh_prev, dc_prev,
                              lstm_grads);
                add_in_place(grads.tensors[off + n_gsn + 0], lstm_grads.d_wx);
                add_in_place(grads.tensors[off + n_gsn + 1], lstm_grads.d_wh);
                add_in_place(grads.tensors[off + n_gsn + 2], lstm_grads.d_bias);
                add_in_place(grads.tensors[off + n_gsn + 3], proj_grads.d_weights);
                add_in_place(grads.tensors[off + n_gsn + 4], proj_grads.d_bias);
            }
        }

        // Advance the recurrent path and form this level's new prediction.
        Matrix tap = sen_tapped(level, wr.ending);
        LstmCache lstm_cache;
        state.lstm_states[lvl] = lstm_step(level.lstm, tap, state.lstm_states[lvl], &lstm_cache);
        DenseCache proj_cache;
        Matrix pred_hidden = dense_forward(level.projection, state.lstm_states[lvl].h, &proj_cache);

        if (lvl == 0 && x_next) {
            const int h1_width = level.gsn.layer_sizes[1];
            Matrix h1 = hslice(pred_hidden, 0, h1_width);
            Matrix x_pred = gsn_decode_from_hidden1(level.gsn, h1);
            LossResult lr = reconstruction_loss(x_pred, *x_next, level.gsn.visible_act);
            losses.pred[0] = lr.value;
            if (training) {
                GsnGrads dec_grads = GsnGrads::zeros_like(level.gsn);
                Matrix d_h1 = gsn_decode_backward(level.gsn, h1, x_pred, lr.grad, &dec_grads);
                GradSet dec_gs = dec_grads.to_grad_set(level.gsn);
                for (size_t i = 0; i < n_gsn; ++i) add_in_place(grads.tensors[off + i], dec_gs.tensors[i]);
                Matrix d_pred(pred_hidden.rows, pred_hidden.cols, 0.0);
                embed_cols(d_pred, d_h1, 0);
                DenseGrads proj_grads{Matrix(level.projection.weights.rows, level.projection.weights.cols, 0.0),
                                      Matrix(1, level.projection.bias.cols, 0.0)};
                Matrix d_lstm_h = dense_backward(level.projection, proj_cache, d_pred, proj_grads);
                LstmGrads lstm_grads{Matrix(level.lstm.wx.rows, level.lstm.wx.cols, 0.0),
                                     Matrix(level.lstm.wh.rows, level.lstm.wh.cols, 0.0),
                                     Matrix(1, level.lstm.bias.cols, 0.0)};
                Matrix dx, dh_prev, dc_prev;
                Matrix dc_zero(d_lstm_h.rows, d_lstm_h.cols, 0.0);
                lstm_backward(level.lstm, lstm_cache, d_lstm_h, dc_zero, dx, dh_prev, dc_prev, lstm_grads);
                add_in_place(grads.tensors[off + n_gsn + 0], lstm_grads.d_wx);
                add_in_place(grads.tensors[off + n_gsn + 1], lstm_grads.d_wh);
                add_in_place(grads.tensors[off + n_gsn + 2], lstm_grads.d_bias);
                add_in_place(grads.tensors[off + n_gsn + 3], proj_grads.d_weights);
                add_in_place(grads.tensors[off + n_gsn + 4], proj_grads.d_bias);
            }
        } else if (lvl > 0) {
            new_pending[lvl].pred_hidden = pred_hidden;
            new_pending[lvl].tapped = tap;
            new_pending[lvl].lstm_cache = lstm_cache;
            new_pending[lvl].proj_cache = proj_cache;
            new_pending[lvl].valid = true;
        }

        input = state.lstm_states[lvl].h;
    }
    state.pending = std::move(new_pending);

    for (double v : losses.recon) losses.total += v;
    for (double v : losses.pred) losses.total += v;

    if (training) {
        if (opts.clip) clip_global_norm(grads, opts.clip_cfg);
        if (out_grads) *out_grads = grads;
        if (opt) opt->apply(params, grads);
    }
    return losses;
}

// ---- LSTM baseline -------------------------------------------------------

LstmPredictor LstmPredictor::init(int input_width, const std::vector<int>& hidden_sizes, Act output_act,
                                  RandomSource& rng) {
    LstmPredictor m;
    int in = input_width;
    for (int h : hidden_sizes) {
        m.cells.push_back(LstmCell::init(in, h, rng));
        in = h;
    }
    m.head = DenseLayer::init(in, input_width, output_act, rng);
    return m;
}

ParamSet LstmPredictor::param_refs() {
    ParamSet ps;
    for (LstmCell& c : cells) {
        ps.add(c.wx);
        ps.add(c.wh);
        ps.add(c.bias);
    }
    ps.add(head.weights);
    ps.add(head.bias);
    return ps;
}

Matrix lstm_baseline_step(const LstmPredictor& model, const Matrix& x_t, std::vector<LstmState>& states) {
    Matrix input = x_t;
    for (size_t l = 0; l < model.cells.size(); ++l) {
        states[l] = lstm_step(model.cells[l], input, states[l], nullptr);
        input = states[l].h;
    }
    return dense_forward(model.head, input, nullptr);
}

double lstm_train_subsequence(LstmPredictor& model, const std::vector<Matrix>& frames,
                              OptimizerState& opt, const GradClipConfig& clip, int bptt_chunk,
                              Act loss_kind_visible) {
    const int T = static_cast<int>(frames.size());
    if (T < 2) return 0.0;
    const int batch = frames[0].rows;
    const size_t L = model.cells.size();
    std::vector<LstmState> states;
    for (const LstmCell& c : model.cells) states.push_back(LstmState::zero(batch, c.hidden_size));
    ParamSet params = model.param_refs();

    double total_loss = 0.0;
    int total_steps = 0;
    int pos = 0;
    while (pos + 1 < T) {
        const int chunk = std::min(bptt_chunk, T - 1 - pos);
        std::vector<std::vector<LstmCache>> caches(chunk, std::vector<LstmCache>(L));
        std::vector<DenseCache> head_caches(chunk);
        std::vector<Matrix> loss_grads(chunk);
        for (int t = 0; t < chunk; ++t) {
            Matrix input = frames[pos + t];
            for (size_t l = 0; l < L; ++l) {
                states[l] = lstm_step(model.cells[l], input, states[l], &caches[t][l]);
                input = states[l].h;
            }
            Matrix pred = dense_forward(model.head, input, &head_caches[t]);
            LossResult lr = reconstruction_loss(pred, frames[pos + t + 1], loss_kind_visible);
            total_loss += lr.value;
            ++total_steps;
            loss_grads[t] = scale(lr.grad, 1.0 / chunk);
        }

        GradSet grads = GradSet::zeros_like(params);
        std::vector<Matrix> dh(L), dc(L);
        for (size_t l = 0; l < L; ++l) {
            dh[l] = Matrix(batch, model.cells[l].hidden_size, 0.0);
            dc[l] = Matrix(batch, model.cells[l].hidden_size, 0.0);
        }
        DenseGrads head_grads{Matrix(model.head.weights.rows, model.head.weights.cols, 0.0),
                              Matrix(1, model.head.bias.cols, 0.0)};
        std::vector<LstmGrads> cell_grads;
        for (const LstmCell& c : model.cells) {
            cell_grads.push_back({Matrix(c.wx.rows, c.wx.cols, 0.0), Matrix(c.wh.rows, c.wh.cols, 0.0),
                                  Matrix(1, c.bias.cols, 0.0)});
        }
        for (int t = chunk - 1; t >= 0; --t) {
            Matrix d_top = dense_backward(model.head, head_caches[t], loss_grads[t], head_grads);
            add_in_place(dh[L - 1], d_top);
            for (int l = static_cast<int>(L) - 1; l >= 0; --l) {
                Matrix dx, dh_prev, dc_prev;
                lstm_backward(model.cells[l], caches[t][l], dh[l], dc[l], dx, dh_prev, dc_prev,
                              cell_grads[l]);
                dh[l] = dh_prev;
                dc[l] = dc_prev;
                if (l > 0) add_in_place(dh[l - 1], dx);
            }
        }
        for (size_t l = 0; l < L; ++l) {
            grads.tensors[3 * l + 0] = cell_grads[l].d_wx;
            grads.tensors[3 * l + 1] = cell_grads[l].d_wh;
            grads.tensors[3 * l + 2] = cell_grads[l].d_bias;
        }
        grads.tensors[3 * L + 0] = head_grads.d_weights;
        grads.tensors[3 * L + 1] = head_grads.d_bias;
        clip_global_norm(grads, clip);
        opt.apply(params, grads);
        pos += chunk;
    }
    return total_steps > 0 ? total_loss / total_steps : 0.0;
}

}  // namespace gsn
