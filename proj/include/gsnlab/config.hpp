#pragma once

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "gsnlab/gsn.hpp"
#include "gsnlab/optim.hpp"

namespace gsn {

enum class ModelKind { Dae, Gsn, Tgsn, UntiedGsn, RnnGsn, Sen, Lstm };

ModelKind model_kind_from_string(const std::string& s);
std::string model_kind_to_string(ModelKind k);

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// One training run, fully specified. Resolved from a JSON file (flat keys,
// dots for grouping) after preset inheritance and command-line overrides.
struct TrainConfig {
    ModelKind model = ModelKind::Gsn;
    std::string dataset = "toy4";  // mnist | balls | mocap | toy4
    std::vector<int> hidden_sizes = {16};
    int visible_width = 0;  // 0: dataset default
    bool tied = true;
    Act hidden_act = Act::Tanh;
    Act visible_act = Act::Sigmoid;
    NoiseConfig noise;
    WalkbackConfig wb;
    int window = 1;

    std::string opt_kind = "sgd";  // sgd | adam
    double lr = 0.25;
    double momentum = 0.5;
    double anneal = 1.0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    bool clip_enabled = false;
    GradClipConfig clip;

    int epochs = 1;
    int batch_size = 1;
    int subsequence_len = 0;  // 0: whole sequences
    int bptt_chunk = 16;
    unsigned long long seed = 1;

    int lstm_hidden = 0;                 // rnn_gsn / sen recurrent width
    std::vector<int> lstm_hidden_sizes;  // lstm baseline stack
    int sen_levels = 2;
    int untied_k = 0;  // 0: 2 * hidden layers
    int checkpoint_every = 10;
    double gate_threshold = 0.01;
    int count = 8;  // sequences per generated dataset

    void validate() const;
    nlohmann::json to_json() const;  // resolved echo, flat keys
    OptimizerState make_optimizer() const;
    int dataset_width() const;  // visible width implied by the dataset name
};

const std::map<std::string, nlohmann::json>& builtin_presets();

TrainConfig config_from_json(const nlohmann::json& flat);
// Load file, follow the "preset" key, merge, apply key=value overrides
// (values parsed as JSON when possible), validate.
TrainConfig resolve_config(const std::string& path, const std::vector<std::string>& overrides);
// Same resolution starting from a preset name instead of a file.
TrainConfig resolve_preset(const std::string& name, const std::vector<std::string>& overrides);

}  // namespace gsn
