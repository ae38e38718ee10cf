#pragma once

#include <string>
#include <vector>

#include "gsnlab/matrix.hpp"
#include "gsnlab/random.hpp"

namespace gsn {

enum class ValueRange { UnitInterval, Unbounded };

// Ordered frames; each sequence is a list of 1 x width row frames.
struct SequenceDataset {
    std::vector<std::vector<Matrix>> sequences;
    int frame_width = 0;
    ValueRange range = ValueRange::UnitInterval;
    // per-channel standardization (mocap); empty when unused
    std::vector<double> channel_mean, channel_std;
};

// ---- bouncing balls ------------------------------------------------------

struct BouncingBallsConfig {
    int n_balls = 3;
    int resolution = 15;
    int frames = 128;
    double box = 10.0;
    double radius = 1.2;
    double speed_scale = 1.0;  // box units per frame
    uint64_t seed = 0;

    void validate() const;
};

struct BallSimState {
    std::vector<double> px, py, vx, vy;
};

// Raw physics, exposed for the conservation checks: advances one frame
// with substepping, specular wall reflection and elastic pair collisions.
void simulate_balls_frame(const BouncingBallsConfig& cfg, BallSimState& s);
BallSimState init_balls(const BouncingBallsConfig& cfg, RandomSource& rng);
double kinetic_energy(const BallSimState& s);
Matrix render_balls(const BouncingBallsConfig& cfg, const BallSimState& s);  // 1 x res^2

// One video of cfg.frames frames.
SequenceDataset simulate_bouncing_balls(const BouncingBallsConfig& cfg);

// ---- MNIST-style IDX -----------------------------------------------------

struct LabeledImages {
    int image_rows = 0, image_cols = 0;
    std::vector<Matrix> images;  // 1 x rows*cols, pixels in [0,1]
    std::vector<int> labels;
};

LabeledImages load_mnist_idx(const std::string& images_path, const std::string& labels_path);
void write_mnist_idx(const std::string& images_path, const std::string& labels_path, const LabeledImages& store);

// Frames in label order 0..9 repeating; a fresh instance of each class is
// drawn per cycle.
SequenceDataset sequence_mnist(const LabeledImages& store, int n_frames, uint64_t epoch_seed);

// Synthetic 10-class glyph set (MNIST stand-in when the real files are
// unavailable); written/read through the IDX path.
LabeledImages make_synthetic_digits(int per_class, int side, uint64_t seed);

// ---- motion capture ------------------------------------------------------

inline constexpr int kMocapChannels = 49;

SequenceDataset load_mocap_csv(const std::string& path);
// 49-channel sinusoid mixture stand-in.
SequenceDataset make_synthetic_mocap(int n_frames, uint64_t seed);
// Per-channel standardization; statistics come from the first
// floor(0.8*len) frames of each sequence (the train portion).
void standardize_mocap(SequenceDataset& ds);
Matrix destandardize_frame(const SequenceDataset& ds, const Matrix& frame);

// ---- splitting / batching ------------------------------------------------

void split_80_20(const SequenceDataset& ds, SequenceDataset& train, SequenceDataset& test);

struct Subsequence {
    int sequence = 0;
    int start = 0;
    int length = 0;
};
std::vector<Subsequence> make_subsequences(const SequenceDataset& ds, int len, int stride);
std::vector<Matrix> subsequence_frames(const SequenceDataset& ds, const Subsequence& s);

// ---- raw float video container ------------------------------------------
// Single JSON header line {version:1, n_sequences, frames, height, width}
// followed by 32-bit little-endian floats, frame-major.

void write_video_container(const std::string& path, const SequenceDataset& ds, int height, int width);
SequenceDataset read_video_container(const std::string& path);

}  // namespace gsn
