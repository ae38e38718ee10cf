#pragma once

#include <vector>

#include "gsnlab/layers.hpp"
#include "gsnlab/noise.hpp"
#include "gsnlab/optim.hpp"

namespace gsn {

struct WalkbackConfig {
    int k = 1;
    double continue_p = 0.0;
    bool use_geometric = false;

    void validate() const;
};

// Layered GSN weights and biases. Layer 0 is the visible layer. up[i] maps
// layer i to layer i+1; the downward direction uses the transpose when tied.
struct GsnParams {
    std::vector<int> layer_sizes;
    std::vector<Matrix> up;    // up[i]: sizes[i] x sizes[i+1]
    std::vector<Matrix> down;  // untied only; down[i]: sizes[i+1] x sizes[i]
    std::vector<Matrix> bias;  // bias[i]: 1 x sizes[i]
    bool tied = true;
    NoiseConfig noise;
    Act hidden_act = Act::Tanh;
    Act visible_act = Act::Sigmoid;

    int n_hidden() const { return static_cast<int>(layer_sizes.size()) - 1; }
    int visible_size() const { return layer_sizes[0]; }
    int hidden_total() const;
    Matrix down_weight(int i) const { return tied ? transpose(up[i]) : down[i]; }

    static GsnParams init(const std::vector<int>& layer_sizes, bool tied, const NoiseConfig& noise,
                          Act hidden_act, Act visible_act, RandomSource& rng);
    ParamSet param_refs();
};

struct GsnState {
    std::vector<Matrix> a;  // one per layer, batch x size

    static GsnState zero(const GsnParams& p, int batch);
    // Flatten hidden layers 1..N into batch x hidden_total, layer order.
    Matrix flatten_hidden() const;
    static GsnState from_flat_hidden(const GsnParams& p, const Matrix& flat, const Matrix& visible);
};

// Gradients aligned with GsnParams::param_refs() (tied folds d_down into d_up).
struct GsnGrads {
    std::vector<Matrix> d_up, d_down, d_bias;

    static GsnGrads zeros_like(const GsnParams& p);
    GradSet to_grad_set(const GsnParams& p) const;
};

// ---- Chain tape ----------------------------------------------------------
// The walkback/sampling chains are recorded as a flat op list so one
// reverse sweep produces exact gradients of the unrolled computation.
// Additive Gaussian noise is pass-through; salt-and-pepper passes gradient
// only through kept elements.

enum class ChainOpKind { Corrupt, HiddenUpdate, Decode, ClampVisible };

struct ChainOp {
    ChainOpKind kind;
    int layer = 0;      // HiddenUpdate
    Matrix below;       // consumed neighbor activations
    Matrix above;       // empty at the top layer
    Matrix act_out;     // nonlinearity output before post-activation noise
    Matrix keep_mask;   // Corrupt
    Matrix hidden_in;   // Decode: layer-1 activation at decode time
    int emit_index = -1;
};

struct ChainTape {
    std::vector<ChainOp> ops;
    GsnState initial;
    GsnState final_state;
    std::vector<Matrix> emitted;  // decoded visibles, in emission order
    // free chains record the state after each step (used to carry the
    // recurrent GSN state along real time)
    std::vector<GsnState> states_after_step;
};

// One alternating sweep (odd hidden layers then even), optionally recorded.
void gsn_hidden_sweep(const GsnParams& p, GsnState& state, RandomSource& rng, ChainTape* tape);
// Decode the visible layer from layer 1; overwrites state.a[0] and emits.
Matrix gsn_decode_visible(const GsnParams& p, GsnState& state, ChainTape* tape);

// One full update: hidden sweep, then visible resample (or clamp).
GsnState gsn_update_step(const GsnParams& p, const GsnState& state, RandomSource& rng,
                         const Matrix* clamp_visible = nullptr);

// Clamped training chain: k x (corrupt -> sweep -> decode), recorded.
ChainTape gsn_clamped_chain(const GsnParams& p, const Matrix& x, int k, RandomSource& rng);
// Free-running chain from an initial state: k x (sweep -> decode), recorded.
ChainTape gsn_free_chain(const GsnParams& p, const GsnState& start, int k, RandomSource& rng);

// Reverse sweep. loss_grads[i] is dL/d emitted[i] (empty matrices are
// treated as zero). Parameter gradients are accumulated into `grads`;
// returns gradients w.r.t. the initial activations.
std::vector<Matrix> chain_backward(const GsnParams& p, const ChainTape& tape,
                                   const std::vector<Matrix>& loss_grads, GsnGrads& grads);

// ---- Spec operations -----------------------------------------------------

struct WalkbackTrainResult {
    double loss = 0.0;
    GsnGrads grads;
    GsnState ending;
    Matrix final_recon;
    std::vector<Matrix> recons;
};

// Walkback training pass on one (batch of) input(s): loss is the mean
// reconstruction loss over the k (x, x_recon) pairs.
WalkbackTrainResult walkback_train(const GsnParams& p, const Matrix& x, const WalkbackConfig& wb,
                                   RandomSource& rng, bool compute_grads = true);

// Alg.-2-style pair generation; geometric mode keeps going while u < p and
// always appends the final sample.
std::vector<std::pair<Matrix, Matrix>> walkback_pairs(const GsnParams& p, const Matrix& x,
                                                      const WalkbackConfig& wb, RandomSource& rng);

std::vector<Matrix> gsn_sample_chain(const GsnParams& p, const Matrix& x0, int steps, RandomSource& rng);

struct ReconstructResult {
    Matrix x_recon;
    GsnState ending;
};
ReconstructResult gsn_reconstruct(const GsnParams& p, const Matrix& x, const WalkbackConfig& wb, RandomSource& rng);

// Denoising auto-encoder special case: 1 hidden layer, tied, one step,
// input noise only. Composes the same primitives as the clamped chain so
// the two paths agree bit-for-bit.
struct DaeStepResult {
    double loss = 0.0;
    GsnGrads grads;
    Matrix recon;
};
DaeStepResult dae_train_step(const GsnParams& p, const Matrix& x, RandomSource& rng, bool compute_grads = true);

// Pure decoder: sigmoid/linear map of layer-1 hiddens through the downward
// weights. Used by the transition models' prediction paths.
Matrix gsn_decode_from_hidden1(const GsnParams& p, const Matrix& h1);
// Backward of the decoder; accumulates decoder parameter grads unless frozen.
Matrix gsn_decode_backward(const GsnParams& p, const Matrix& h1, const Matrix& decoded,
                           const Matrix& upstream, GsnGrads* grads);

// Alg.-5 sequential walkbacks: invert the decoder affine map upward with
// transposed weights and negated biases, perturb the hiddens, re-decode.
std::vector<std::pair<Matrix, Matrix>> sequential_walkback_pairs(const GsnParams& p, const Matrix& x,
                                                                 int k, RandomSource& rng);

}  // namespace gsn
