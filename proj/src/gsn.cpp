#include "gsnlab/gsn.hpp"

#include <stdexcept>

namespace gsn {

void WalkbackConfig::validate() const {
    if (k < 1) throw std::invalid_argument("walkback k must be >= 1, got " + std::to_string(k));
    if (continue_p < 0.0 || continue_p >= 1.0) {
        throw std::invalid_argument("walkback continue_p must be in [0,1), got " + std::to_string(continue_p));
    }
}

int GsnParams::hidden_total() const {
    int total = 0;
    for (size_t i = 1; i < layer_sizes.size(); ++i) total += layer_sizes[i];
    return total;
}

GsnParams GsnParams::init(const std::vector<int>& layer_sizes, bool tied, const NoiseConfig& noise,
                          Act hidden_act, Act visible_act, RandomSource& rng) {
    if (layer_sizes.size() < 2) {
        throw std::invalid_argument("GsnParams: need at least one hidden layer");
    }
    noise.validate();
    GsnParams p;
    p.layer_sizes = layer_sizes;
    p.tied = tied;
    p.noise = noise;
    p.hidden_act = hidden_act;
    p.visible_act = visible_act;
    for (size_t i = 0; i + 1 < layer_sizes.size(); ++i) {
        p.up.push_back(glorot_uniform(layer_sizes[i], layer_sizes[i + 1], rng));
    }
    if (!tied) {
        // start at the transpose, then let the directions diverge
        for (const Matrix& w : p.up) p.down.push_back(transpose(w));
    }
    for (int s : layer_sizes) p.bias.emplace_back(1, s, 0.0);
    return p;
}

ParamSet GsnParams::param_refs() {
    ParamSet ps;
    for (Matrix& w : up) ps.add(w);
    if (!tied) {
        for (Matrix& w : down) ps.add(w);
    }
    for (Matrix& b : bias) ps.add(b);
    return ps;
}

GsnState GsnState::zero(const GsnParams& p, int batch) {
    GsnState s;
    for (int sz : p.layer_sizes) s.a.emplace_back(batch, sz, 0.0);
    return s;
}

Matrix GsnState::flatten_hidden() const {
    std::vector<const Matrix*> parts;
    for (size_t i = 1; i < a.size(); ++i) parts.push_back(&a[i]);
    return hcat(parts);
}

GsnState GsnState::from_flat_hidden(const GsnParams& p, const Matrix& flat, const Matrix& visible) {
    if (flat.cols != p.hidden_total()) {
        throw ShapeError("from_flat_hidden: width " + flat.shape_str() + " vs hidden total " +
                         std::to_string(p.hidden_total()));
    }
    GsnState s;
    s.a.push_back(visible);
    int off = 0;
    for (int i = 1; i <= p.n_hidden(); ++i) {
        s.a.push_back(hslice(flat, off, off + p.layer_sizes[i]));
        off += p.layer_sizes[i];
    }
    return s;
}

GsnGrads GsnGrads::zeros_like(const GsnParams& p) {
    GsnGrads g;
    for (const Matrix& w : p.up) g.d_up.emplace_back(w.rows, w.cols, 0.0);
    for (size_t i = 0; i + 1 < p.layer_sizes.size(); ++i) {
        g.d_down.emplace_back(p.layer_sizes[i + 1], p.layer_sizes[i], 0.0);
    }
    for (const Matrix& b : p.bias) g.d_bias.emplace_back(b.rows, b.cols, 0.0);
    return g;
}

GradSet GsnGrads::to_grad_set(const GsnParams& p) const {
    GradSet gs;
    for (size_t i = 0; i < d_up.size(); ++i) {
        if (p.tied) {
            gs.tensors.push_back(add(d_up[i], transpose(d_down[i])));
        } else {
            gs.tensors.push_back(d_up[i]);
        }
    }
    if (!p.tied) {
        for (const Matrix& m : d_down) gs.tensors.push_back(m);
    }
    for (const Matrix& m : d_bias) gs.tensors.push_back(m);
    return gs;
}

// ---- forward machinery ---------------------------------------------------

static void update_hidden_layer(const GsnParams& p, GsnState& state, int layer, RandomSource& rng,
                                ChainTape* tape) {
    const int n = p.n_hidden();
    Matrix pre = matmul(state.a[layer - 1], p.up[layer - 1]);
    Matrix above;
    if (layer < n) {
        above = state.a[layer + 1];
        add_in_place(pre, matmul(above, p.down_weight(layer)));
    }
    pre = add_row_bias(pre, p.bias[layer]);
    if (p.noise.apply_pre_activation && p.noise.gauss_sigma > 0.0) {
        pre = add_gaussian(pre, p.noise.gauss_mean, p.noise.gauss_sigma, rng);
    }
    Matrix act_out = activate(pre, p.hidden_act);
    Matrix out = act_out;
    if (p.noise.apply_post_activation && p.noise.gauss_sigma > 0.0) {
        out = add_gaussian(out, p.noise.gauss_mean, p.noise.gauss_sigma, rng);
    }
    if (tape) {
        ChainOp op;
        op.kind = ChainOpKind::HiddenUpdate;
        op.layer = layer;
        op.below = state.a[layer - 1];
        op.above = above;
        op.act_out = std::move(act_out);
        tape->ops.push_back(std::move(op));
    }
    state.a[layer] = std::move(out);
}

void gsn_hidden_sweep(const GsnParams& p, GsnState& state, RandomSource& rng, ChainTape* tape) {
    const int n = p.n_hidden();
    for (int i = 1; i <= n; i += 2) update_hidden_layer(p, state, i, rng, tape);
    for (int i = 2; i <= n; i += 2) update_hidden_layer(p, state, i, rng, tape);
}

Matrix gsn_decode_visible(const GsnParams& p, GsnState& state, ChainTape* tape) {
    Matrix pre = add_row_bias(matmul(state.a[1], p.down_weight(0)), p.bias[0]);
    Matrix out = activate(pre, p.visible_act);
    if (tape) {
        ChainOp op;
        op.kind = ChainOpKind::Decode;
        op.hidden_in = state.a[1];
        op.act_out = out;
        op.emit_index = static_cast<int>(tape->emitted.size());
        tape->emitted.push_back(out);
        tape->ops.push_back(std::move(op));
    }
    state.a[0] = out;
    return out;
}

GsnState gsn_update_step(const GsnParams& p, const GsnState& state, RandomSource& rng,
                         const Matrix* clamp_visible) {
    if (state.a.size() != p.layer_sizes.size()) {
        throw ShapeError("gsn_update_step: state layer count mismatch");
    }
    for (size_t i = 0; i < state.a.size(); ++i) {
        if (state.a[i].cols != p.layer_sizes[i]) {
            throw ShapeError("gsn_update_step: layer " + std::to_string(i) + " width " +
                             state.a[i].shape_str() + " vs " + std::to_string(p.layer_sizes[i]));
        }
    }
    GsnState next = state;
    gsn_hidden_sweep(p, next, rng, nullptr);
    if (clamp_visible) {
        if (clamp_visible->cols != p.visible_size()) {
            throw ShapeError("gsn_update_step: clamp width " + clamp_visible->shape_str());
        }
        next.a[0] = *clamp_visible;
    } else {
        gsn_decode_visible(p, next, nullptr);
    }
    return next;
}

ChainTape gsn_clamped_chain(const GsnParams& p, const Matrix& x, int k, RandomSource& rng) {
    if (x.cols != p.visible_size()) {
        throw ShapeError("gsn_clamped_chain: input " + x.shape_str() + " vs visible " +
                         std::to_string(p.visible_size()));
    }
    ChainTape tape;
    GsnState state = GsnState::zero(p, x.rows);
    state.a[0] = x;
    tape.initial = state;
    for (int step = 0; step < k; ++step) {
        CorruptResult cr = salt_pepper(state.a[0], p.noise.salt_pepper_p, rng);
        ChainOp op;
        op.kind = ChainOpKind::Corrupt;
        op.keep_mask = std::move(cr.keep_mask);
        tape.ops.push_back(std::move(op));
        state.a[0] = std::move(cr.corrupted);
        gsn_hidden_sweep(p, state, rng, &tape);
        gsn_decode_visible(p, state, &tape);
    }
    tape.final_state = state;
    return tape;
}

ChainTape gsn_free_chain(const GsnParams& p, const GsnState& start, int k, RandomSource& rng) {
    ChainTape tape;
    tape.initial = start;
    GsnState state = start;
    for (int step = 0; step < k; ++step) {
        gsn_hidden_sweep(p, state, rng, &tape);
        gsn_decode_visible(p, state, &tape);
        tape.states_after_step.push_back(state);
    }
    tape.final_state = state;
    return tape;
}

// ---- backward ------------------------------------------------------------

std::vector<Matrix> chain_backward(const GsnParams& p, const ChainTape& tape,
                                   const std::vector<Matrix>& loss_grads, GsnGrads& grads) {
    const int batch = tape.initial.a[0].rows;
    std::vector<Matrix> d_a;
    for (int sz : p.layer_sizes) d_a.emplace_back(batch, sz, 0.0);

    for (auto it = tape.ops.rbegin(); it != tape.ops.rend(); ++it) {
        const ChainOp& op = *it;
        switch (op.kind) {
            case ChainOpKind::Decode: {
                if (op.emit_index >= 0 && op.emit_index < static_cast<int>(loss_grads.size()) &&
                    !loss_grads[op.emit_index].empty()) {
                    add_in_place(d_a[0], loss_grads[op.emit_index]);
                }
                Matrix dpre = hadamard(d_a[0], activate_grad_from_output(op.act_out, p.visible_act));
                add_in_place(grads.d_bias[0], col_sums(dpre));
                add_in_place(grads.d_down[0], matmul(transpose(op.hidden_in), dpre));
                add_in_place(d_a[1], matmul(dpre, transpose(p.down_weight(0))));
                d_a[0] = Matrix(batch, p.layer_sizes[0], 0.0);
                break;
            }
            case ChainOpKind::HiddenUpdate: {
                const int i = op.layer;
                Matrix dpre = hadamard(d_a[i], activate_grad_from_output(op.act_out, p.hidden_act));
                add_in_place(grads.d_bias[i], col_sums(dpre));
                add_in_place(grads.d_up[i - 1], matmul(transpose(op.below), dpre));
                add_in_place(d_a[i - 1], matmul(dpre, transpose(p.up[i - 1])));
                if (!op.above.empty()) {
                    add_in_place(grads.d_down[i], matmul(transpose(op.above), dpre));
                    add_in_place(d_a[i + 1], matmul(dpre, transpose(p.down_weight(i))));
                }
                d_a[i] = Matrix(batch, p.layer_sizes[i], 0.0);
                break;
            }
            case ChainOpKind::Corrupt: {
                d_a[0] = hadamard(d_a[0], op.keep_mask);
                break;
            }
            case ChainOpKind::ClampVisible: {
                d_a[0] = Matrix(batch, p.layer_sizes[0], 0.0);
                break;
            }
        }
    }
    return d_a;
}

// ---- spec operations -----------------------------------------------------

WalkbackTrainResult walkback_train(const GsnParams& p, const Matrix& x, const WalkbackConfig& wb,
                                   RandomSource& rng, bool compute_grads) {
    wb.validate();
    ChainTape tape = gsn_clamped_chain(p, x, wb.k, rng);
    WalkbackTrainResult res;
    res.grads = GsnGrads::zeros_like(p);
    std::vector<Matrix> loss_grads(tape.emitted.size());
    const double w = 1.0 / static_cast<double>(tape.emitted.size());
    for (size_t e = 0; e < tape.emitted.size(); ++e) {
        LossResult lr = reconstruction_loss(tape.emitted[e], x, p.visible_act);
        res.loss += w * lr.value;
        if (compute_grads) loss_grads[e] = scale(lr.grad, w);
    }
    if (compute_grads) {
        chain_backward(p, tape, loss_grads, res.grads);
    }
    res.ending = tape.final_state;
    res.final_recon = tape.emitted.back();
    res.recons = std::move(tape.emitted);
    return res;
}

std::vector<std::pair<Matrix, Matrix>> walkback_pairs(const GsnParams& p, const Matrix& x,
                                                      const WalkbackConfig& wb, RandomSource& rng) {
    wb.validate();
    std::vector<std::pair<Matrix, Matrix>> pairs;
    GsnState state = GsnState::zero(p, x.rows);
    state.a[0] = x;
    int step = 0;
    while (true) {
        CorruptResult cr = salt_pepper(state.a[0], p.noise.salt_pepper_p, rng);
        state.a[0] = std::move(cr.corrupted);
        gsn_hidden_sweep(p, state, rng, nullptr);
        Matrix recon = gsn_decode_visible(p, state, nullptr);
        pairs.emplace_back(x, recon);
        ++step;
        if (wb.use_geometric) {
            const double u = rng.uniform();
            if (u >= wb.continue_p) break;
        } else if (step >= wb.k) {
            break;
        }
    }
    return pairs;
}

std::vector<Matrix> gsn_sample_chain(const GsnParams& p, const Matrix& x0, int steps, RandomSource& rng) {
    std::vector<Matrix> samples;
    GsnState state = GsnState::zero(p, x0.rows);
    state.a[0] = x0;
    for (int s = 0; s < steps; ++s) {
        state = gsn_update_step(p, state, rng, nullptr);
        samples.push_back(state.a[0]);
    }
    return samples;
}

ReconstructResult gsn_reconstruct(const GsnParams& p, const Matrix& x, const WalkbackConfig& wb,
                                  RandomSource& rng) {
    wb.validate();
    ChainTape tape = gsn_clamped_chain(p, x, wb.k, rng);
    return {tape.emitted.back(), tape.final_state};
}

DaeStepResult dae_train_step(const GsnParams& p, const Matrix& x, RandomSource& rng, bool compute_grads) {
    if (p.n_hidden() != 1 || !p.tied) {
        throw std::invalid_argument("dae_train_step: requires a 1-hidden-layer tied GSN");
    }
    if (p.noise.hidden_noise_on()) {
        throw std::invalid_argument("dae_train_step: hidden noise must be off (input noise only)");
    }
    // Straight-line encode/decode; intentionally does not share the chain
    // machinery so the special-case equivalence is a real cross-check.
    CorruptResult cr = salt_pepper(x, p.noise.salt_pepper_p, rng);
    const Matrix& xt = cr.corrupted;
    Matrix h = activate(add_row_bias(matmul(xt, p.up[0]), p.bias[1]), p.hidden_act);
    Matrix recon = activate(add_row_bias(matmul(h, p.down_weight(0)), p.bias[0]), p.visible_act);
    LossResult lr = reconstruction_loss(recon, x, p.visible_act);

    DaeStepResult res;
    res.loss = lr.value;
    res.recon = recon;
    res.grads = GsnGrads::zeros_like(p);
    if (compute_grads) {
        Matrix dpre0 = hadamard(scale(lr.grad, 1.0), activate_grad_from_output(recon, p.visible_act));
        add_in_place(res.grads.d_bias[0], col_sums(dpre0));
        add_in_place(res.grads.d_down[0], matmul(transpose(h), dpre0));
        Matrix dh = matmul(dpre0, transpose(p.down_weight(0)));
        Matrix dpre1 = hadamard(dh, activate_grad_from_output(h, p.hidden_act));
        add_in_place(res.grads.d_bias[1], col_sums(dpre1));
        add_in_place(res.grads.d_up[0], matmul(transpose(xt), dpre1));
    }
    return res;
}

Matrix gsn_decode_from_hidden1(const GsnParams& p, const Matrix& h1) {
    return activate(add_row_bias(matmul(h1, p.down_weight(0)), p.bias[0]), p.visible_act);
}

Matrix gsn_decode_backward(const GsnParams& p, const Matrix& h1, const Matrix& decoded,
                           const Matrix& upstream, GsnGrads* grads) {
    Matrix dpre = hadamard(upstream, activate_grad_from_output(decoded, p.visible_act));
    if (grads) {
        add_in_place(grads->d_bias[0], col_sums(dpre));
        add_in_place(grads->d_down[0], matmul(transpose(h1), dpre));
    }
    return matmul(dpre, transpose(p.down_weight(0)));
}

std::vector<std::pair<Matrix, Matrix>> sequential_walkback_pairs(const GsnParams& p, const Matrix& x,
                                                                 int k, RandomSource& rng) {
    std::vector<std::pair<Matrix, Matrix>> pairs;
    const int n = p.n_hidden();
    for (int step = 0; step < k; ++step) {
        // backward pass: transposed weights, negated bias
        GsnState state = GsnState::zero(p, x.rows);
        state.a[0] = x;
        for (int i = 1; i <= n; ++i) {
            Matrix t = add_row_bias(state.a[i - 1], scale(p.bias[i - 1], -1.0));
            state.a[i] = activate(matmul(t, transpose(p.down_weight(i - 1))), p.hidden_act);
        }
        // perturb the recalled hiddens
        if (p.noise.gauss_sigma > 0.0) {
            for (int i = 1; i <= n; ++i) {
                state.a[i] = add_gaussian(state.a[i], p.noise.gauss_mean, p.noise.gauss_sigma, rng);
            }
        }
        // forward back down to the visible layer
        for (int i = n; i >= 2; --i) {
            state.a[i - 1] = activate(add_row_bias(matmul(state.a[i], p.down_weight(i - 1)), p.bias[i - 1]),
                                      p.hidden_act);
        }
        Matrix xp = activate(add_row_bias(matmul(state.a[1], p.down_weight(0)), p.bias[0]), p.visible_act);
        pairs.emplace_back(xp, x);
    }
    return pairs;
}

}  // namespace gsn
