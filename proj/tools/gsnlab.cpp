// Command-line workbench: dataset generation, training, sampling,
// evaluation, gradient checking, and model comparison.

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "gsnlab/config.hpp"
#include "gsnlab/harness.hpp"
#include "gsnlab/modelcheck.hpp"

namespace fs = std::filesystem;
using namespace gsn;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitConfig = 2;
constexpr int kExitDiverged = 3;

struct Diverged : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << text;
}

void echo_resolved(const std::string& out_dir, const nlohmann::json& j) {
    fs::create_directories(out_dir);
    write_text(out_dir + "/resolved.json", j.dump(2) + "\n");
}

std::vector<int> parse_widths(const std::string& s) {
    std::vector<int> widths;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (!tok.empty()) widths.push_back(std::stoi(tok));
    }
    return widths;
}

// TrainConfig for a dataset name with enough defaults to call load_dataset.
TrainConfig dataset_stub(const std::string& dataset, uint64_t seed, int count) {
    TrainConfig cfg;
    cfg.dataset = dataset;
    cfg.seed = seed;
    cfg.count = count;
    if (dataset == "mocap") cfg.visible_act = Act::Identity;
    cfg.validate();
    return cfg;
}

void write_mocap_csv(const std::string& path, const SequenceDataset& ds) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    char buf[64];
    for (const auto& seq : ds.sequences) {
        for (const Matrix& f : seq) {
            for (int c = 0; c < f.cols; ++c) {
                std::snprintf(buf, sizeof(buf), "%.10g", f(0, c));
                out << (c ? "," : "") << buf;
            }
            out << "\n";
        }
    }
}

int frame_side(int width) {
    const int s = static_cast<int>(std::lround(std::sqrt(static_cast<double>(width))));
    return s * s == width ? s : 0;
}

int cmd_gen_data(const std::string& dataset, const std::string& out_dir, uint64_t seed, int count) {
    TrainConfig cfg = dataset_stub(dataset, seed, count);
    fs::create_directories(out_dir);
    echo_resolved(out_dir, nlohmann::json{{"subcommand", "gen-data"},
                                          {"dataset", dataset},
                                          {"seed", seed},
                                          {"count", count}});
    if (dataset == "mnist") {
        LabeledImages store = make_synthetic_digits(count, 28, seed);
        write_mnist_idx(out_dir + "/images.idx", out_dir + "/labels.idx", store);
    } else if (dataset == "mocap") {
        // raw (unstandardized) channels, one frame per row
        SequenceDataset ds;
        for (int i = 0; i < count; ++i) {
            SequenceDataset one = make_synthetic_mocap(240, seed + 7919ULL * (i + 1));
            if (i == 0) {
                ds = std::move(one);
            } else {
                ds.sequences.push_back(std::move(one.sequences[0]));
            }
        }
        write_mocap_csv(out_dir + "/mocap.csv", ds);
    } else {
        SequenceDataset ds = load_dataset(cfg, seed);
        const int side = frame_side(ds.frame_width);
        const int h = side > 0 ? side : 1;
        const int w = side > 0 ? side : ds.frame_width;
        write_video_container(out_dir + "/frames.bin", ds, h, w);
        if (ds.range == ValueRange::UnitInterval && !ds.sequences.empty()) {
            std::vector<Matrix> preview(ds.sequences[0].begin(),
                                        ds.sequences[0].begin() +
                                            std::min<size_t>(16, ds.sequences[0].size()));
            emit_image_grid(preview, 8, h, w, out_dir + "/preview.pgm");
        }
    }
    return kExitOk;
}

int cmd_train(const std::string& config_path, const std::vector<std::string>& overrides,
              const std::string& out_dir, bool resume) {
    TrainRun run = [&] {
        if (resume) {
            Checkpoint ck = load_checkpoint(out_dir + "/checkpoint.gsnc");
            if (!overrides.empty()) throw ConfigError("--override cannot be combined with --resume");
            return run_from_checkpoint(ck);
        }
        TrainConfig cfg = fs::exists(config_path) ? resolve_config(config_path, overrides)
                                                  : resolve_preset(config_path, overrides);
        return init_train_run(cfg);
    }();
    fs::create_directories(out_dir);
    echo_resolved(out_dir, run.cfg.to_json());

    SequenceDataset full = load_dataset(run.cfg, run.cfg.seed);
    SequenceDataset train_split, test_split;
    split_80_20(full, train_split, test_split);
    train_epochs(run, train_split, &test_split, out_dir);
    if (run.diverged) throw Diverged("training diverged (non-finite loss); checkpoint retained");
    return kExitOk;
}

int cmd_sample(const std::string& ckpt_path, int steps, const std::string& out_dir) {
    TrainRun run = run_from_checkpoint(load_checkpoint(ckpt_path));
    fs::create_directories(out_dir);
    echo_resolved(out_dir, run.cfg.to_json());

    SequenceDataset ds = load_dataset(run.cfg, run.cfg.seed);
    const Matrix& x0 = ds.sequences.at(0).at(0);
    RandomSource rng = run.rng.split(0x5A4D);

    std::vector<Matrix> frames;
    if (run.cfg.model == ModelKind::Dae || run.cfg.model == ModelKind::Gsn) {
        frames = gsn_sample_chain(run.model.gsn, x0, steps, rng);
    } else {
        Predictor pred(run.model, rng);
        Matrix x = x0;
        for (int i = 0; i < steps; ++i) {
            x = pred.step(x);
            frames.push_back(x);
        }
    }

    SequenceDataset out_ds;
    out_ds.frame_width = ds.frame_width;
    out_ds.range = ds.range;
    out_ds.sequences.push_back(frames);
    const int side = frame_side(ds.frame_width);
    const int h = side > 0 ? side : 1;
    const int w = side > 0 ? side : ds.frame_width;
    write_video_container(out_dir + "/samples.bin", out_ds, h, w);
    if (ds.range == ValueRange::UnitInterval) {
        emit_image_grid(frames, 10, h, w, out_dir + "/samples.pgm");
    }
    return kExitOk;
}

int cmd_eval(const std::string& ckpt_path, const std::string& dataset, const std::string& metric,
             const std::vector<int>& horizons) {
    TrainRun run = run_from_checkpoint(load_checkpoint(ckpt_path));
    if (!dataset.empty()) run.cfg.dataset = dataset;
    run.cfg.validate();

    SequenceDataset full = load_dataset(run.cfg, run.cfg.seed);
    SequenceDataset train_split, test_split;
    split_80_20(full, train_split, test_split);

    Predictor pred(run.model, run.rng.split(0xE7A1));
    std::cout << "metric,horizon,value\n";
    if (metric == "mse") {
        const bool raw = full.range == ValueRange::Unbounded;
        std::cout << "mse,1," << evaluate_mse(pred, test_split, raw) << "\n";
        std::cout << "naive_mse,1," << naive_copy_mse(test_split, raw) << "\n";
    } else {
        std::vector<int> hs = horizons.empty() ? std::vector<int>{1} : horizons;
        std::vector<double> vals = evaluate_bce(pred, test_split, hs);
        for (size_t i = 0; i < hs.size(); ++i) {
            std::cout << "bce," << hs[i] << "," << vals[i] << "\n";
        }
    }
    return kExitOk;
}

int cmd_gradcheck(const std::string& model, const std::string& widths_s, uint64_t seed) {
    std::vector<int> widths = parse_widths(widths_s);
    const double err = gradcheck_model(model, widths, seed);
    std::cout << "model=" << model << " max_rel_err=" << err << "\n";
    if (!(err <= 1e-4)) throw Diverged("gradient check failed: max relative error " +
                                       std::to_string(err));
    return kExitOk;
}

int cmd_compare(const std::string& dataset, const std::string& models_s, int epochs,
                const std::string& out_dir) {
    static const std::map<std::string, std::string> suffix = {
        {"lstm", "lstm"},      {"untied_gsn", "untied"}, {"tgsn", "tgsn"},
        {"rnn_gsn", "rnngsn"}, {"sen", "sen"},
    };
    std::vector<std::string> models;
    std::stringstream ss(models_s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (!tok.empty()) models.push_back(tok);
    }
    if (models.empty()) throw ConfigError("no models given");
    fs::create_directories(out_dir);
    echo_resolved(out_dir, nlohmann::json{{"subcommand", "compare"},
                                          {"dataset", dataset},
                                          {"models", models_s},
                                          {"epochs", epochs}});

    std::string csv = "model,metric,value\n";
    bool naive_done = false;
    for (const std::string& m : models) {
        auto it = suffix.find(m);
        if (it == suffix.end()) throw ConfigError("unknown model for compare: " + m);
        TrainConfig cfg = resolve_preset(dataset + "-" + it->second,
                                         {"epochs=" + std::to_string(epochs)});
        TrainRun run = init_train_run(cfg);
        SequenceDataset full = load_dataset(cfg, cfg.seed);
        SequenceDataset train_split, test_split;
        split_80_20(full, train_split, test_split);
        train_epochs(run, train_split, nullptr, "");
        if (run.diverged) throw Diverged("training diverged for model " + m);
        const bool raw = full.range == ValueRange::Unbounded;
        Predictor pred(run.model, run.rng.split(0xC0));
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.17g", evaluate_mse(pred, test_split, raw));
        csv += m + ",mse," + buf + "\n";
        if (!naive_done) {
            std::snprintf(buf, sizeof(buf), "%.17g", naive_copy_mse(test_split, raw));
            csv += std::string("naive,mse,") + buf + "\n";
            naive_done = true;
        }
    }
    write_text(out_dir + "/compare.csv", csv);
    std::cout << csv;
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"GSN sequence-prediction workbench"};
    app.require_subcommand(1);

    std::string dataset, out_dir, config_path, ckpt_path, metric = "mse", model, widths, models;
    std::vector<std::string> overrides;
    std::vector<int> horizons;
    uint64_t seed = 1;
    int count = 8, steps = 16, epochs = 2;
    bool resume = false;

    auto* gen = app.add_subcommand("gen-data", "Generate a dataset");
    gen->add_option("--dataset", dataset, "balls | mnist | mocap | toy4")->required();
    gen->add_option("--out", out_dir, "Output directory")->required();
    gen->add_option("--seed", seed, "RNG seed");
    gen->add_option("--count", count, "Sequences (or images per class for mnist)");

    auto* train = app.add_subcommand("train", "Train a model");
    train->add_option("--config", config_path, "Config file or preset name");
    train->add_option("--override", overrides, "key=value config overrides");
    train->add_option("--out", out_dir, "Output directory")->required();
    train->add_flag("--resume", resume, "Resume from --out/checkpoint.gsnc");

    auto* sample = app.add_subcommand("sample", "Sample / roll out from a checkpoint");
    sample->add_option("--checkpoint", ckpt_path, "Checkpoint file")->required();
    sample->add_option("--steps", steps, "Frames to emit");
    sample->add_option("--out", out_dir, "Output directory")->required();

    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
    eval->add_option("--checkpoint", ckpt_path, "Checkpoint file")->required();
    eval->add_option("--dataset", dataset, "Dataset override");
    eval->add_option("--metric", metric, "mse | bce")->check(CLI::IsMember({"mse", "bce"}));
    eval->add_option("--horizons", horizons, "Prediction horizons (bce)");

    auto* gc = app.add_subcommand("gradcheck", "Finite-difference gradient check");
    gc->add_option("--model", model, "dense|lstm|dae|gsn|tgsn|rnn_gsn|sen")->required();
    gc->add_option("--widths", widths, "Comma-separated layer widths")->required();
    gc->add_option("--seed", seed, "RNG seed");

    auto* cmp = app.add_subcommand("compare", "Train several models and compare test MSE");
    cmp->add_option("--dataset", dataset, "balls | mocap | mnist")->required();
    cmp->add_option("--models", models, "Comma-separated model kinds")->required();
    cmp->add_option("--epochs", epochs, "Epochs per model");
    cmp->add_option("--out", out_dir, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (gen->parsed()) return cmd_gen_data(dataset, out_dir, seed, count);
        if (train->parsed()) {
            if (config_path.empty() && !resume) {
                std::cerr << "train needs --config (or --resume)\n";
                return kExitUsage;
            }
            return cmd_train(config_path, overrides, out_dir, resume);
        }
        if (sample->parsed()) return cmd_sample(ckpt_path, steps, out_dir);
        if (eval->parsed()) return cmd_eval(ckpt_path, dataset, metric, horizons);
        if (gc->parsed()) return cmd_gradcheck(model, widths, seed);
        if (cmp->parsed()) return cmd_compare(dataset, models, epochs, out_dir);
    } catch (const Diverged& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitDiverged;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    }
    return kExitUsage;
}
