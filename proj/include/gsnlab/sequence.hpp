#pragma once

#include <deque>
#include <optional>
#include <vector>

#include "gsnlab/gsn.hpp"

namespace gsn {

// ---- TGSN ----------------------------------------------------------------

// Windowed affine map from the m most recent flattened hidden stacks to the
// next predicted stack. History shorter than m is left-padded with zeros by
// the caller (HiddenHistory does this).
struct LinearTransition {
    int window = 1;
    Matrix weights;  // (window * h_total) x h_total
    Matrix bias;     // 1 x h_total

    static LinearTransition init(int window, int h_total, RandomSource& rng);
    ParamSet param_refs();
};

struct HiddenHistory {
    int window = 1;
    int h_total = 0;
    int batch = 1;
    std::deque<Matrix> stacks;

    void push(const Matrix& stack);
    // Most recent `window` stacks, oldest first, zero-padded on the left.
    std::vector<Matrix> recent() const;
};

Matrix transition_predict(const LinearTransition& t, const std::vector<Matrix>& history);
// Backward through the affine map; returns nothing useful upstream (history
// entries are training constants).
void transition_backward(const LinearTransition& t, const std::vector<Matrix>& history,
                         const Matrix& d_pred, GradSet& grads);

struct TgsnModel {
    GsnParams gsn;
    LinearTransition transition;
    WalkbackConfig wb;

    static TgsnModel init(const std::vector<int>& layer_sizes, bool tied, const NoiseConfig& noise,
                          Act hidden_act, Act visible_act, int window, const WalkbackConfig& wb,
                          RandomSource& rng);
    // Causal prediction of x_{t+1}: walkback hiddens for x_t, transition,
    // decode predicted layer-1 hiddens.
    Matrix predict_next(HiddenHistory& history, const Matrix& x_t, RandomSource& rng) const;
};

struct TgsnEpochLosses {
    double recon = 0.0;  // walkback reconstruction, pass 1
    double pred = 0.0;   // predicted-next reconstruction, pass 2
};

// One EM epoch over an ordered frame stream: pass 1 updates only the GSN
// parameters, pass 2 only the transition. `gate_open` controls whether the
// predicted-next term contributes to the GSN updates in pass 1.
TgsnEpochLosses tgsn_em_epoch(TgsnModel& model, const std::vector<Matrix>& frames,
                              OptimizerState& opt_gsn, OptimizerState& opt_trans, RandomSource& rng,
                              bool gate_open);

// True once the relative improvement of the reconstruction loss falls below
// the threshold (needs at least two epochs of history).
bool tgsn_warmup_gate(const std::vector<double>& recon_history, double threshold);

// ---- Untied GSN as an RNN ------------------------------------------------

struct PredictionBuffer {
    struct PendingChain {
        long start_t = 0;  // chain ran at start_t; emitted[j] predicts start_t+1+j
        ChainTape tape;
    };
    int k = 0;
    std::deque<PendingChain> chains;
};

struct UntiedGsnModel {
    GsnParams gsn;       // untied
    int k = 0;           // predictions per step; must be >= 2 * hidden layers
    GsnState carry;      // hidden state carried along real time
    bool has_carry = false;

    static UntiedGsnModel init(const std::vector<int>& layer_sizes, const NoiseConfig& noise,
                               Act hidden_act, Act visible_act, int k, RandomSource& rng);
    void reset_state();
};

struct UntiedStepResult {
    double loss = 0.0;  // mean BCE over matured buffered predictions (0 if none)
    int n_pairs = 0;
};

// Online step: score and train against every buffered prediction for the
// current timestep, then run the free chain k steps from x_t and buffer its
// predictions.
UntiedStepResult untied_gsn_online_step(UntiedGsnModel& model, const Matrix& x_t, long t,
                                        PredictionBuffer& buf, OptimizerState& opt, RandomSource& rng);

// Horizon-1 causal prediction (first decoded visible of the free chain).
Matrix untied_predict_next(UntiedGsnModel& model, const Matrix& x_t, RandomSource& rng);
// All k horizons from x_t, without touching the carried state.
std::vector<Matrix> untied_predict_horizons(const UntiedGsnModel& model, const Matrix& x_t,
                                            RandomSource& rng);

// ---- RNN-GSN -------------------------------------------------------------

struct RnnGsnModel {
    GsnParams gsn;
    LstmCell lstm;
    DenseLayer projection;  // lstm hidden -> h_total, tanh
    std::vector<int> taps;  // 1-based GSN hidden layers feeding the LSTM
    WalkbackConfig wb;

    static std::vector<int> default_taps(int n_hidden);
    static RnnGsnModel init(const std::vector<int>& layer_sizes, bool tied, const NoiseConfig& noise,
                            Act hidden_act, Act visible_act, int lstm_hidden, const WalkbackConfig& wb,
                            RandomSource& rng);
    int tap_width() const;
    Matrix tapped(const GsnState& ending) const;
    ParamSet rnn_param_refs();
    Matrix predict_next(const Matrix& x_t, LstmState& state, RandomSource& rng) const;
};

struct RnnGsnStepResult {
    double recon_loss = 0.0;
    double pred_loss = 0.0;
    bool pred_present = false;
};

// Reconstruction term updates only the GSN; prediction term updates only
// the LSTM + projection (decoder frozen). x_next == nullptr skips the
// prediction term (sequence end); null optimizers evaluate without updating.
RnnGsnStepResult rnngsn_train_step(RnnGsnModel& model, const Matrix& x_t, const Matrix* x_next,
                                   LstmState& state, OptimizerState* opt_gsn, OptimizerState* opt_rnn,
                                   RandomSource& rng);

// ---- SEN -----------------------------------------------------------------

struct SenLevel {
    GsnParams gsn;
    LstmCell lstm;
    DenseLayer projection;
    std::vector<int> taps;
};

struct SenStack {
    std::vector<SenLevel> levels;

    // level 0 sees the raw input; level i>=1 sees level i-1's LSTM hiddens.
    static SenStack init(int n_levels, int input_width, const std::vector<int>& gsn_hidden,
                         int lstm_hidden, bool tied, const NoiseConfig& noise, Act level0_visible,
                         const WalkbackConfig& wb0, RandomSource& rng);
    ParamSet param_refs();
};

struct SenRunState {
    std::vector<LstmState> lstm_states;
    // previous step's prediction path caches, per level >= 1 (level 0 is
    // scored immediately against x_next)
    struct Pending {
        Matrix pred_hidden;       // projection output at t-1
        Matrix tapped;            // lstm input at t-1
        LstmCache lstm_cache;     // lstm step at t-1
        DenseCache proj_cache;
        bool valid = false;
    };
    std::vector<Pending> pending;
};

struct SenForwardResult {
    std::vector<GsnState> hiddens;        // per level
    std::vector<Matrix> reconstructions;  // per level (final walkback recon)
    std::vector<Matrix> predicted_next;   // per level (flattened hidden stacks)
};

SenForwardResult sen_forward(SenStack& stack, const Matrix& x_t, SenRunState& state, RandomSource& rng);

struct SenStepLosses {
    std::vector<double> recon;  // per level
    std::vector<double> pred;   // per level
    double total = 0.0;
};

struct SenTrainOptions {
    WalkbackConfig wb;
    bool clip = true;
    GradClipConfig clip_cfg;
};

// Joint step: sum of per-level reconstruction and prediction losses, single
// combined backward, all parameters updated together (with clipping). A
// null optimizer evaluates without updating; out_grads (ordered like
// SenStack::param_refs, post-clip) forces the backward pass even then.
SenStepLosses sen_train_step(SenStack& stack, const Matrix& x_t, const Matrix* x_next,
                             SenRunState& state, OptimizerState* opt, const SenTrainOptions& opts,
                             RandomSource& rng, GradSet* out_grads = nullptr);

SenRunState sen_init_state(const SenStack& stack, int batch);

// ---- LSTM baseline -------------------------------------------------------

struct LstmPredictor {
    std::vector<LstmCell> cells;
    DenseLayer head;  // last hidden -> visible width

    static LstmPredictor init(int input_width, const std::vector<int>& hidden_sizes, Act output_act,
                              RandomSource& rng);
    ParamSet param_refs();
};

Matrix lstm_baseline_step(const LstmPredictor& model, const Matrix& x_t, std::vector<LstmState>& states);

// Truncated-BPTT training over one subsequence: forward/backward per chunk,
// one optimizer step per chunk. Returns mean next-frame prediction loss.
double lstm_train_subsequence(LstmPredictor& model, const std::vector<Matrix>& frames,
                              OptimizerState& opt, const GradClipConfig& clip, int bptt_chunk,
                              Act loss_kind_visible);

}  // namespace gsn
