#include "gsnlab/config.hpp"

#include <fstream>
#include <set>

namespace gsn {

using nlohmann::json;

ModelKind model_kind_from_string(const std::string& s) {
    if (s == "dae") return ModelKind::Dae;
    if (s == "gsn") return ModelKind::Gsn;
    if (s == "tgsn") return ModelKind::Tgsn;
    if (s == "untied_gsn") return ModelKind::UntiedGsn;
    if (s == "rnn_gsn") return ModelKind::RnnGsn;
    if (s == "sen") return ModelKind::Sen;
    if (s == "lstm") return ModelKind::Lstm;
    throw ConfigError("unknown model kind: " + s);
}

std::string model_kind_to_string(ModelKind k) {
    switch (k) {
        case ModelKind::Dae: return "dae";
        case ModelKind::Gsn: return "gsn";
        case ModelKind::Tgsn: return "tgsn";
        case ModelKind::UntiedGsn: return "untied_gsn";
        case ModelKind::RnnGsn: return "rnn_gsn";
        case ModelKind::Sen: return "sen";
        case ModelKind::Lstm: return "lstm";
    }
    return "?";
}

int TrainConfig::dataset_width() const {
    if (visible_width > 0) return visible_width;
    if (dataset == "mnist") return 28 * 28;
    if (dataset == "balls") return 15 * 15;
    if (dataset == "mocap") return 49;
    if (dataset == "toy4") return 4;
    throw ConfigError("unknown dataset: " + dataset);
}

void TrainConfig::validate() const {
    dataset_width();
    if (hidden_sizes.empty()) throw ConfigError("hidden_sizes must be non-empty");
    for (int h : hidden_sizes) {
        if (h < 1) throw ConfigError("hidden sizes must be positive");
    }
    if (model == ModelKind::Dae && hidden_sizes.size() != 1) {
        throw ConfigError("dae uses exactly one hidden layer");
    }
    noise.validate();
    wb.validate();
    if (window < 1) throw ConfigError("window must be >= 1");
    if (opt_kind != "sgd" && opt_kind != "adam") throw ConfigError("optimizer must be sgd or adam");
    if (lr <= 0) throw ConfigError("learning rate must be positive");
    if (epochs < 0) throw ConfigError("epochs must be >= 0");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (clip.max_l2_norm <= 0) throw ConfigError("clip.max_norm must be positive");
    if (model == ModelKind::UntiedGsn) {
        const int min_k = 2 * static_cast<int>(hidden_sizes.size());
        if (untied_k != 0 && untied_k < min_k) {
            throw ConfigError("untied_k must be >= " + std::to_string(min_k));
        }
    }
    if (model == ModelKind::RnnGsn || model == ModelKind::Sen) {
        if (lstm_hidden < 1) throw ConfigError("lstm_hidden must be >= 1 for this model");
    }
    if (model == ModelKind::Lstm && lstm_hidden_sizes.empty() && lstm_hidden < 1) {
        throw ConfigError("lstm baseline needs lstm_hidden or lstm_hidden_sizes");
    }
    if (model == ModelKind::Sen && sen_levels < 1) throw ConfigError("sen_levels must be >= 1");
    if (checkpoint_every < 1) throw ConfigError("checkpoint_every must be >= 1");
    if (count < 1) throw ConfigError("count must be >= 1");
    if (bptt_chunk < 1) throw ConfigError("bptt_chunk must be >= 1");
}

json TrainConfig::to_json() const {
    json j;
    j["model"] = model_kind_to_string(model);
    j["dataset"] = dataset;
    j["hidden_sizes"] = hidden_sizes;
    j["visible_width"] = visible_width;
    j["tied"] = tied;
    j["hidden_act"] = act_to_string(hidden_act);
    j["visible_act"] = act_to_string(visible_act);
    j["noise.salt_pepper_p"] = noise.salt_pepper_p;
    j["noise.gauss_mean"] = noise.gauss_mean;
    j["noise.gauss_sigma"] = noise.gauss_sigma;
    j["noise.pre"] = noise.apply_pre_activation;
    j["noise.post"] = noise.apply_post_activation;
    j["walkback.k"] = wb.k;
    j["walkback.continue_p"] = wb.continue_p;
    j["walkback.geometric"] = wb.use_geometric;
    j["window"] = window;
    j["optimizer.kind"] = opt_kind;
    j["optimizer.lr"] = lr;
    j["optimizer.momentum"] = momentum;
    j["optimizer.anneal"] = anneal;
    j["optimizer.beta1"] = beta1;
    j["optimizer.beta2"] = beta2;
    j["clip.enabled"] = clip_enabled;
    j["clip.max_norm"] = clip.max_l2_norm;
    j["epochs"] = epochs;
    j["batch_size"] = batch_size;
    j["subsequence_len"] = subsequence_len;
    j["bptt_chunk"] = bptt_chunk;
    j["seed"] = seed;
    j["lstm_hidden"] = lstm_hidden;
    j["lstm_hidden_sizes"] = lstm_hidden_sizes;
    j["sen_levels"] = sen_levels;
    j["untied_k"] = untied_k;
    j["checkpoint_every"] = checkpoint_every;
    j["gate_threshold"] = gate_threshold;
    j["count"] = count;
    return j;
}

OptimizerState TrainConfig::make_optimizer() const {
    if (opt_kind == "adam") return OptimizerState::adam(lr, beta1, beta2);
    return OptimizerState::sgd(lr, momentum, anneal);
}

namespace {

const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys = {
        "preset", "model", "dataset", "hidden_sizes", "visible_width", "tied", "hidden_act",
        "visible_act", "noise.salt_pepper_p", "noise.gauss_mean", "noise.gauss_sigma", "noise.pre",
        "noise.post", "walkback.k", "walkback.continue_p", "walkback.geometric", "window",
        "optimizer.kind", "optimizer.lr", "optimizer.momentum", "optimizer.anneal", "optimizer.beta1",
        "optimizer.beta2", "clip.enabled", "clip.max_norm", "epochs", "batch_size", "subsequence_len",
        "bptt_chunk", "seed", "lstm_hidden", "lstm_hidden_sizes", "sen_levels", "untied_k",
        "checkpoint_every", "gate_threshold", "count"};
    return keys;
}

template <typename T>
void read_key(const json& j, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
    }
}

json merge_flat(const json& base, const json& over) {
    json out = base;
    for (auto it = over.begin(); it != over.end(); ++it) out[it.key()] = it.value();
    return out;
}

json resolve_presets_chain(const json& leaf) {
    json merged = leaf;
    int depth = 0;
    while (merged.contains("preset")) {
        if (++depth > 8) throw ConfigError("preset inheritance too deep (cycle?)");
        const std::string name = merged.at("preset").get<std::string>();
        auto it = builtin_presets().find(name);
        if (it == builtin_presets().end()) throw ConfigError("unknown preset: " + name);
        json child = merged;
        child.erase("preset");
        merged = merge_flat(it->second, child);
    }
    return merged;
}

}  // namespace

const std::map<std::string, json>& builtin_presets() {
    static const std::map<std::string, json> presets = [] {
        std::map<std::string, json> p;
        // Sequenced-MNIST settings: 3x1500 tanh, sigmoid visible,
        // salt-and-pepper 0.4, Gaussian noise sigma 2 pre+post, sgd
        // lr 0.25 / momentum 0.5 / anneal 0.995, batch 100, 300 epochs.
        json mnist_base = {
            {"dataset", "mnist"},
            {"hidden_sizes", {1500, 1500, 1500}},
            {"tied", true},
            {"hidden_act", "tanh"},
            {"visible_act", "sigmoid"},
            {"noise.salt_pepper_p", 0.4},
            {"noise.gauss_sigma", 2.0},
            {"noise.pre", true},
            {"noise.post", true},
            {"walkback.k", 6},
            {"optimizer.kind", "sgd"},
            {"optimizer.lr", 0.25},
            {"optimizer.momentum", 0.5},
            {"optimizer.anneal", 0.995},
            {"epochs", 300},
            {"batch_size", 100},
        };
        p["tgsn-mnist"] = merge_flat(mnist_base, {{"model", "tgsn"}, {"window", 1}});
        p["untied-mnist"] = merge_flat(mnist_base, {{"model", "untied_gsn"}, {"tied", false}});
        p["rnngsn-mnist"] = merge_flat(mnist_base, {{"model", "rnn_gsn"}, {"lstm_hidden", 3000}});

        // Bouncing-balls settings: 2x500 tied, input noise 0.2, hidden
        // Gaussian sigma 1, 4 walkbacks, window 4, subsequences of 100,
        // adam lr 0.001, clip at 0.25.
        json balls_base = {
            {"dataset", "balls"},
            {"hidden_sizes", {500, 500}},
            {"tied", true},
            {"hidden_act", "tanh"},
            {"visible_act", "sigmoid"},
            {"noise.salt_pepper_p", 0.2},
            {"noise.gauss_sigma", 1.0},
            {"noise.pre", true},
            {"noise.post", true},
            {"walkback.k", 4},
            {"window", 4},
            {"subsequence_len", 100},
            {"optimizer.kind", "adam"},
            {"optimizer.lr", 0.001},
            {"clip.enabled", true},
            {"clip.max_norm", 0.25},
            {"epochs", 20},
            {"batch_size", 1},
        };
        p["balls-tgsn"] = merge_flat(balls_base, {{"model", "tgsn"}});
        p["balls-untied"] = merge_flat(balls_base, {{"model", "untied_gsn"}, {"tied", false}});
        p["balls-rnngsn"] = merge_flat(balls_base, {{"model", "rnn_gsn"}, {"lstm_hidden", 500}});
        p["balls-sen"] = merge_flat(balls_base,
                                    {{"model", "sen"}, {"lstm_hidden", 500}, {"sen_levels", 2}});
        p["balls-lstm"] = merge_flat(balls_base, {{"model", "lstm"}, {"lstm_hidden", 500}});

        // Motion-capture settings: 49 linear visibles, 2x128, window 3,
        // input noise 0.1, Gaussian sigma 0.5.
        json mocap_base = {
            {"dataset", "mocap"},
            {"hidden_sizes", {128, 128}},
            {"tied", true},
            {"hidden_act", "tanh"},
            {"visible_act", "identity"},
            {"noise.salt_pepper_p", 0.1},
            {"noise.gauss_sigma", 0.5},
            {"noise.pre", true},
            {"noise.post", true},
            {"walkback.k", 4},
            {"window", 3},
            {"optimizer.kind", "adam"},
            {"optimizer.lr", 0.001},
            {"clip.enabled", true},
            {"clip.max_norm", 0.25},
            {"epochs", 20},
            {"batch_size", 1},
        };
        p["mocap-tgsn"] = merge_flat(mocap_base, {{"model", "tgsn"}});
        p["mocap-untied"] = merge_flat(mocap_base, {{"model", "untied_gsn"}, {"tied", false}});
        p["mocap-rnngsn"] = merge_flat(mocap_base, {{"model", "rnn_gsn"}, {"lstm_hidden", 128}});
        p["mocap-sen"] = merge_flat(mocap_base,
                                    {{"model", "sen"}, {"lstm_hidden", 128}, {"sen_levels", 2}});
        p["mocap-lstm"] = merge_flat(mocap_base, {{"model", "lstm"}, {"lstm_hidden", 128}});
        return p;
    }();
    return presets;
}

TrainConfig config_from_json(const json& flat) {
    if (!flat.is_object()) throw ConfigError("config root must be a JSON object");
    for (auto it = flat.begin(); it != flat.end(); ++it) {
        if (!known_keys().count(it.key())) throw ConfigError("unknown config key: " + it.key());
    }
    TrainConfig c;
    std::string model_s = model_kind_to_string(c.model);
    std::string hidden_act_s = act_to_string(c.hidden_act);
    std::string visible_act_s = act_to_string(c.visible_act);
    read_key(flat, "model", model_s);
    c.model = model_kind_from_string(model_s);
    read_key(flat, "dataset", c.dataset);
    read_key(flat, "hidden_sizes", c.hidden_sizes);
    read_key(flat, "visible_width", c.visible_width);
    read_key(flat, "tied", c.tied);
    read_key(flat, "hidden_act", hidden_act_s);
    read_key(flat, "visible_act", visible_act_s);
    c.hidden_act = act_from_string(hidden_act_s);
    c.visible_act = act_from_string(visible_act_s);
    read_key(flat, "noise.salt_pepper_p", c.noise.salt_pepper_p);
    read_key(flat, "noise.gauss_mean", c.noise.gauss_mean);
    read_key(flat, "noise.gauss_sigma", c.noise.gauss_sigma);
    read_key(flat, "noise.pre", c.noise.apply_pre_activation);
    read_key(flat, "noise.post", c.noise.apply_post_activation);
    read_key(flat, "walkback.k", c.wb.k);
    read_key(flat, "walkback.continue_p", c.wb.continue_p);
    read_key(flat, "walkback.geometric", c.wb.use_geometric);
    read_key(flat, "window", c.window);
    read_key(flat, "optimizer.kind", c.opt_kind);
    read_key(flat, "optimizer.lr", c.lr);
    read_key(flat, "optimizer.momentum", c.momentum);
    read_key(flat, "optimizer.anneal", c.anneal);
    read_key(flat, "optimizer.beta1", c.beta1);
    read_key(flat, "optimizer.beta2", c.beta2);
    read_key(flat, "clip.enabled", c.clip_enabled);
    read_key(flat, "clip.max_norm", c.clip.max_l2_norm);
    read_key(flat, "epochs", c.epochs);
    read_key(flat, "batch_size", c.batch_size);
    read_key(flat, "subsequence_len", c.subsequence_len);
    read_key(flat, "bptt_chunk", c.bptt_chunk);
    read_key(flat, "seed", c.seed);
    read_key(flat, "lstm_hidden", c.lstm_hidden);
    read_key(flat, "lstm_hidden_sizes", c.lstm_hidden_sizes);
    read_key(flat, "sen_levels", c.sen_levels);
    read_key(flat, "untied_k", c.untied_k);
    read_key(flat, "checkpoint_every", c.checkpoint_every);
    read_key(flat, "gate_threshold", c.gate_threshold);
    read_key(flat, "count", c.count);
    c.validate();
    return c;
}

namespace {

TrainConfig resolve_from_leaf(json leaf, const std::vector<std::string>& overrides) {
    for (const std::string& ov : overrides) {
        const size_t eq = ov.find('=');
        if (eq == std::string::npos) throw ConfigError("override must be key=value: " + ov);
        const std::string key = ov.substr(0, eq);
        const std::string raw = ov.substr(eq + 1);
        if (!known_keys().count(key) || key == "preset") {
            throw ConfigError("unknown override key: " + key);
        }
        json value = json::parse(raw, nullptr, /*allow_exceptions=*/false);
        if (value.is_discarded()) value = raw;  // plain string
        leaf[key] = value;
    }
    return config_from_json(resolve_presets_chain(leaf));
}

}  // namespace

TrainConfig resolve_config(const std::string& path, const std::vector<std::string>& overrides) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    json leaf = json::parse(in, nullptr, /*allow_exceptions=*/false);
    if (leaf.is_discarded()) throw ConfigError("config file is not valid JSON: " + path);
    return resolve_from_leaf(std::move(leaf), overrides);
}

TrainConfig resolve_preset(const std::string& name, const std::vector<std::string>& overrides) {
    return resolve_from_leaf(json{{"preset", name}}, overrides);
}

}  // namespace gsn
