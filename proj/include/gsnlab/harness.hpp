#pragma once

#include <string>
#include <vector>

#include "gsnlab/config.hpp"
#include "gsnlab/datasets.hpp"
#include "gsnlab/sequence.hpp"

namespace gsn {

// ---- metrics -------------------------------------------------------------

struct MetricsLog {
    struct Row {
        int epoch = 0;
        std::string split;
        std::string metric;
        double value = 0.0;
    };
    std::vector<Row> rows;

    void add(int epoch, const std::string& split, const std::string& metric, double value);
    std::string to_csv() const;  // header epoch,split,metric,value
    void write_csv(const std::string& path) const;
};

// ---- checkpoints ---------------------------------------------------------

struct CheckpointError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Named f64 tensors + config echo + RNG state + epoch. On disk: magic
// "GSNC", version u32, records (name len u16, name, rank u8, dims u32 x
// rank, f64 payload), all little-endian, trailing CRC32.
struct Checkpoint {
    std::vector<std::pair<std::string, Matrix>> tensors;
    std::string config_json;
    uint64_t rng_seed = 0;
    uint64_t rng_counter = 0;
    uint32_t epoch = 0;
};

void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);

// ---- model bundle --------------------------------------------------------

// One trained (or trainable) model of any supported kind, plus the
// per-sequence state needed to predict causally along a stream.
struct ModelBundle {
    ModelKind kind = ModelKind::Gsn;
    GsnParams gsn;  // dae / gsn
    TgsnModel tgsn;
    UntiedGsnModel untied;
    RnnGsnModel rnngsn;
    SenStack sen;
    LstmPredictor lstm;

    static ModelBundle build(const TrainConfig& cfg, RandomSource& rng);
    ParamSet param_refs();
};

// Causal stepper over a sequence: feed ground-truth frames in order, get
// the horizon-1 prediction after each.
struct Predictor {
    ModelBundle* model = nullptr;
    RandomSource rng;

    HiddenHistory history;            // tgsn
    LstmState lstm_state;             // rnn_gsn
    SenRunState sen_state;            // sen
    std::vector<LstmState> lstm_states;  // lstm baseline

    Predictor(ModelBundle& m, RandomSource rng_);
    void reset(int batch);
    Matrix step(const Matrix& x_t);
    // Predictions at horizons 1..max_h from the current state (closed-loop
    // rollout; the untied GSN uses its free chain, bounded by its k).
    std::vector<Matrix> horizons(const Matrix& x_t, int max_h);
};

// ---- evaluation ----------------------------------------------------------

// Teacher-forced horizon-1 mean squared prediction error over all test
// subsequences; `destandardize` maps frames back to raw units first.
double evaluate_mse(Predictor& pred, const SequenceDataset& test, bool destandardize);
double naive_copy_mse(const SequenceDataset& test, bool destandardize);

// Per-horizon BCE of predicted frames (unit-interval data only).
std::vector<double> evaluate_bce(Predictor& pred, const SequenceDataset& test,
                                 const std::vector<int>& horizons);

// ---- training ------------------------------------------------------------

struct TrainRun {
    TrainConfig cfg;
    ModelBundle model;
    OptimizerState opt;   // gsn / joint / lstm
    OptimizerState opt2;  // tgsn transition, rnn-gsn recurrent path
    RandomSource rng;
    int epoch = 0;
    std::vector<double> recon_history;  // tgsn warmup gate input
    MetricsLog log;
    bool diverged = false;
};

TrainRun init_train_run(const TrainConfig& cfg);
Checkpoint make_checkpoint(const TrainRun& run);
TrainRun run_from_checkpoint(const Checkpoint& ck);

// Mean train loss for one epoch (model-kind dispatch).
double train_one_epoch(TrainRun& run, const SequenceDataset& data);

// Remaining epochs with per-epoch logging, optional test metrics,
// checkpointing every cfg.checkpoint_every epochs into out_dir (when
// non-empty). Halts and flags on non-finite loss.
void train_epochs(TrainRun& run, const SequenceDataset& train_data, const SequenceDataset* test_data,
                  const std::string& out_dir);

// Dataset named by cfg (generated in memory; mnist/mocap use synthetic
// stand-ins unless real files are provided to the loaders directly).
SequenceDataset load_dataset(const TrainConfig& cfg, uint64_t seed);
// Deterministic cycling-bright-pixel stream used by the toy configs.
SequenceDataset make_toy_stream(int width, int frames);

// ---- images --------------------------------------------------------------

// Binary PGM (P5) grid, frames tiled row-major with 1-pixel separators;
// 0.0 -> 0, 1.0 -> 255 (clamped).
void emit_image_grid(const std::vector<Matrix>& frames, int cols, int frame_h, int frame_w,
                     const std::string& path);

}  // namespace gsn
