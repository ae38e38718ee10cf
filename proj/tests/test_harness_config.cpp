#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "gsnlab/harness.hpp"

using namespace gsn;

namespace {

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / ("gsnlab_harness_" + name)).string();
}

TrainConfig toy_config(ModelKind kind) {
    TrainConfig cfg;
    cfg.model = kind;
    cfg.dataset = "toy4";
    cfg.hidden_sizes = {6};
    cfg.tied = kind != ModelKind::UntiedGsn;
    cfg.noise.salt_pepper_p = 0.1;
    cfg.wb.k = 2;
    cfg.opt_kind = "adam";
    cfg.lr = 0.005;
    cfg.epochs = 2;
    cfg.batch_size = 4;
    cfg.seed = 11;
    cfg.count = 2;
    cfg.checkpoint_every = 100;
    if (kind == ModelKind::RnnGsn || kind == ModelKind::Sen) cfg.lstm_hidden = 5;
    if (kind == ModelKind::Sen) cfg.sen_levels = 2;
    if (kind == ModelKind::Dae) cfg.wb.k = 1;
    return cfg;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace

// ---- config resolution ---------------------------------------------------

TEST_CASE("the mnist transition preset carries the published hyperparameters") {
    TrainConfig c = resolve_preset("tgsn-mnist", {});
    CHECK(c.model == ModelKind::Tgsn);
    CHECK(c.hidden_sizes == std::vector<int>{1500, 1500, 1500});
    CHECK(c.hidden_act == Act::Tanh);
    CHECK(c.visible_act == Act::Sigmoid);
    CHECK(c.noise.salt_pepper_p == 0.4);
    CHECK(c.opt_kind == "sgd");
    CHECK(c.lr == 0.25);
    CHECK(c.momentum == 0.5);
    CHECK(c.anneal == 0.995);
    CHECK(c.batch_size == 100);
    CHECK(c.epochs == 300);
}

TEST_CASE("the bouncing-balls transition preset carries its published settings") {
    TrainConfig c = resolve_preset("balls-tgsn", {});
    CHECK(c.hidden_sizes == std::vector<int>{500, 500});
    CHECK(c.tied);
    CHECK(c.noise.salt_pepper_p == 0.2);
    CHECK(c.noise.gauss_sigma == 1.0);
    CHECK(c.wb.k == 4);
    CHECK(c.window == 4);
    CHECK(c.opt_kind == "adam");
    CHECK(c.clip_enabled);
}

TEST_CASE("overrides land in the config and in its echo") {
    TrainConfig c = resolve_preset("balls-tgsn", {"walkback.k=9", "epochs=3"});
    CHECK(c.wb.k == 9);
    CHECK(c.epochs == 3);
    nlohmann::json echo = c.to_json();
    CHECK(echo.at("walkback.k").get<int>() == 9);
    CHECK(echo.at("epochs").get<int>() == 3);
}

TEST_CASE("unknown keys are rejected, not ignored") {
    CHECK_THROWS_AS(resolve_preset("balls-tgsn", {"walkbackk=9"}), ConfigError);
    const std::string path = temp_path("bad_key.json");
    {
        std::ofstream out(path);
        out << R"({"model": "gsn", "walkbak.k": 3})";
    }
    CHECK_THROWS_AS(resolve_config(path, {}), ConfigError);
    std::filesystem::remove(path);
}

TEST_CASE("a config file chains through its preset parent") {
    const std::string path = temp_path("child.json");
    {
        std::ofstream out(path);
        out << R"({"preset": "balls-lstm", "epochs": 5})";
    }
    TrainConfig c = resolve_config(path, {});
    CHECK(c.model == ModelKind::Lstm);
    CHECK(c.dataset == "balls");
    CHECK(c.epochs == 5);
    std::filesystem::remove(path);
}

TEST_CASE("missing files and invalid shapes fail validation loudly") {
    CHECK_THROWS(resolve_config("/nonexistent/nope.json", {}));
    TrainConfig c = toy_config(ModelKind::Dae);
    c.hidden_sizes = {4, 4};  // a denoiser has exactly one hidden layer
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = toy_config(ModelKind::RnnGsn);
    c.lstm_hidden = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
}

// ---- metrics -------------------------------------------------------------

TEST_CASE("metrics serialize deterministically") {
    MetricsLog log;
    log.add(0, "train", "loss", 0.6931471805599453);
    log.add(0, "test", "mse", 0.25);
    log.add(1, "train", "loss", 1.0 / 3.0);
    const std::string a = log.to_csv();
    MetricsLog log2;
    log2.add(0, "train", "loss", 0.6931471805599453);
    log2.add(0, "test", "mse", 0.25);
    log2.add(1, "train", "loss", 1.0 / 3.0);
    CHECK(a == log2.to_csv());
    CHECK(a.substr(0, a.find('\n')) == "epoch,split,metric,value");
    // full-precision round trip: parsing a value back gives the same double
    const std::string third = a.substr(a.rfind(',') + 1);
    CHECK(std::stod(third) == 1.0 / 3.0);
}

// ---- training loop -------------------------------------------------------

TEST_CASE("zero requested epochs trains nothing and logs nothing") {
    TrainConfig cfg = toy_config(ModelKind::Gsn);
    cfg.epochs = 0;
    TrainRun run = init_train_run(cfg);
    Checkpoint before = make_checkpoint(run);
    SequenceDataset data = load_dataset(cfg, cfg.seed);
    train_epochs(run, data, nullptr, "");
    Checkpoint after = make_checkpoint(run);
    REQUIRE(before.tensors.size() == after.tensors.size());
    for (size_t i = 0; i < before.tensors.size(); ++i) {
        CHECK(max_abs_diff(before.tensors[i].second, after.tensors[i].second) == 0.0);
    }
    CHECK(run.log.rows.empty());
}

TEST_CASE("a small denoiser halves its loss on 8x8 glyphs within 200 epochs") {
    TrainConfig cfg = toy_config(ModelKind::Dae);
    cfg.visible_width = 64;
    cfg.hidden_sizes = {64};
    cfg.noise.salt_pepper_p = 0.1;
    cfg.lr = 0.02;
    TrainRun run = init_train_run(cfg);

    LabeledImages glyphs = make_synthetic_digits(2, 8, 9);
    SequenceDataset data;
    data.frame_width = 64;
    data.sequences.push_back(glyphs.images);

    // non-binary pixels put an entropy floor under the cross-entropy; the
    // trainable part is the excess above that floor
    double floor = 0.0;
    int n_px = 0;
    for (const Matrix& img : glyphs.images) {
        for (double p : img.data) {
            const double c = std::clamp(p, 1e-7, 1.0 - 1e-7);
            floor += -(c * std::log(c) + (1.0 - c) * std::log(1.0 - c));
            ++n_px;
        }
    }
    floor /= n_px;

    double first = train_one_epoch(run, data);
    double last = first;
    for (int e = 1; e < 200 && last - floor >= 0.5 * (first - floor); ++e) {
        last = train_one_epoch(run, data);
    }
    CHECK(last - floor < 0.5 * (first - floor));
}

TEST_CASE("identical runs produce byte-identical metrics files") {
    TrainConfig cfg = toy_config(ModelKind::RnnGsn);
    cfg.epochs = 3;
    SequenceDataset data = load_dataset(cfg, cfg.seed);
    SequenceDataset train, test;
    split_80_20(data, train, test);

    const std::string d1 = temp_path("run_a"), d2 = temp_path("run_b");
    std::filesystem::create_directories(d1);
    std::filesystem::create_directories(d2);
    TrainRun r1 = init_train_run(cfg);
    TrainRun r2 = init_train_run(cfg);
    train_epochs(r1, train, &test, d1);
    train_epochs(r2, train, &test, d2);
    CHECK(read_file(d1 + "/metrics.csv") == read_file(d2 + "/metrics.csv"));
    std::filesystem::remove_all(d1);
    std::filesystem::remove_all(d2);
}

// ---- evaluation ----------------------------------------------------------

TEST_CASE("horizon-1 mse is zero when the predictor always emits the constant truth") {
    TrainConfig cfg = toy_config(ModelKind::Lstm);
    cfg.lstm_hidden_sizes = {3};
    RandomSource rng(1);
    ModelBundle m = ModelBundle::build(cfg, rng);
    m.lstm.cells[0].wx = Matrix(4, 12, 0.0);
    m.lstm.cells[0].wh = Matrix(3, 12, 0.0);
    m.lstm.cells[0].bias = Matrix(1, 12, 0.0);
    m.lstm.head.weights = Matrix(3, 4, 0.0);
    m.lstm.head.bias = Matrix(1, 4, 0.0);  // sigmoid head now always says 0.5

    SequenceDataset test;
    test.frame_width = 4;
    test.sequences.push_back(std::vector<Matrix>(6, Matrix(1, 4, 0.5)));

    Predictor pred(m, RandomSource(2));
    CHECK(evaluate_mse(pred, test, false) == 0.0);
    CHECK(naive_copy_mse(test, false) == 0.0);

    // ...and equals the squared gap when the truth is a different constant
    SequenceDataset off = test;
    for (auto& fr : off.sequences[0]) fr = Matrix(1, 4, 0.75);
    Predictor pred2(m, RandomSource(2));
    CHECK(evaluate_mse(pred2, off, false) == doctest::Approx(0.0625).epsilon(1e-12));
}

TEST_CASE("bce of an uninformative predictor on binary frames is ln 2") {
    TrainConfig cfg = toy_config(ModelKind::Lstm);
    cfg.lstm_hidden_sizes = {3};
    RandomSource rng(3);
    ModelBundle m = ModelBundle::build(cfg, rng);
    m.lstm.cells[0].wx = Matrix(4, 12, 0.0);
    m.lstm.cells[0].wh = Matrix(3, 12, 0.0);
    m.lstm.cells[0].bias = Matrix(1, 12, 0.0);
    m.lstm.head.weights = Matrix(3, 4, 0.0);
    m.lstm.head.bias = Matrix(1, 4, 0.0);

    SequenceDataset test;
    test.frame_width = 4;
    std::vector<Matrix> frames;
    RandomSource gen(4);
    for (int t = 0; t < 8; ++t) {
        Matrix f(1, 4);
        for (auto& v : f.data) v = gen.uniform() < 0.5 ? 0.0 : 1.0;
        frames.push_back(f);
    }
    test.sequences.push_back(frames);
    Predictor pred(m, RandomSource(5));
    auto vals = evaluate_bce(pred, test, {1});
    REQUIRE(vals.size() == 1);
    CHECK(vals[0] == doctest::Approx(std::log(2.0)).epsilon(1e-6));
}

TEST_CASE("multi-horizon bce stays finite out to the chain length") {
    TrainConfig cfg = toy_config(ModelKind::UntiedGsn);
    cfg.untied_k = 6;
    RandomSource rng(6);
    ModelBundle m = ModelBundle::build(cfg, rng);
    SequenceDataset data = load_dataset(cfg, cfg.seed);
    Predictor pred(m, RandomSource(7));
    auto vals = evaluate_bce(pred, data, {1, 6});
    REQUIRE(vals.size() == 2);
    for (double v : vals) CHECK(std::isfinite(v));
}

// ---- checkpoints ---------------------------------------------------------

TEST_CASE("checkpoints round-trip bit for bit and re-serialize identically") {
    TrainConfig cfg = toy_config(ModelKind::Tgsn);
    TrainRun run = init_train_run(cfg);
    SequenceDataset data = load_dataset(cfg, cfg.seed);
    train_one_epoch(run, data);
    run.epoch = 1;

    Checkpoint ck = make_checkpoint(run);
    const std::string p1 = temp_path("ck1.gsnc"), p2 = temp_path("ck2.gsnc");
    save_checkpoint(p1, ck);
    Checkpoint back = load_checkpoint(p1);
    CHECK(back.rng_seed == ck.rng_seed);
    CHECK(back.rng_counter == ck.rng_counter);
    CHECK(back.epoch == ck.epoch);
    CHECK(back.config_json == ck.config_json);
    REQUIRE(back.tensors.size() == ck.tensors.size());
    for (size_t i = 0; i < ck.tensors.size(); ++i) {
        CHECK(back.tensors[i].first == ck.tensors[i].first);
        CHECK(max_abs_diff(back.tensors[i].second, ck.tensors[i].second) == 0.0);
    }
    save_checkpoint(p2, back);
    CHECK(read_file(p1) == read_file(p2));
    std::filesystem::remove(p1);
    std::filesystem::remove(p2);
}

TEST_CASE("a corrupted checkpoint byte trips the integrity check") {
    TrainConfig cfg = toy_config(ModelKind::Gsn);
    TrainRun run = init_train_run(cfg);
    Checkpoint ck = make_checkpoint(run);
    const std::string path = temp_path("ck_bad.gsnc");
    save_checkpoint(path, ck);
    std::string bytes = read_file(path);
    bytes[bytes.size() / 2] ^= 0x40;
    {
        std::ofstream out(path, std::ios::binary);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    }
    CHECK_THROWS_AS(load_checkpoint(path), CheckpointError);
    std::filesystem::remove(path);
}

TEST_CASE("resuming from a checkpoint matches the uninterrupted run exactly") {
    TrainConfig cfg = toy_config(ModelKind::RnnGsn);
    cfg.epochs = 4;
    SequenceDataset data = load_dataset(cfg, cfg.seed);
    SequenceDataset train, test;
    split_80_20(data, train, test);

    // uninterrupted reference
    TrainRun full = init_train_run(cfg);
    train_epochs(full, train, &test, "");

    // stop after two epochs, checkpoint, rebuild, continue
    TrainConfig half = cfg;
    half.epochs = 2;
    TrainRun first = init_train_run(half);
    train_epochs(first, train, &test, "");
    Checkpoint ck = make_checkpoint(first);
    const std::string path = temp_path("resume.gsnc");
    save_checkpoint(path, ck);
    TrainRun resumed = run_from_checkpoint(load_checkpoint(path));
    resumed.cfg.epochs = 4;
    train_epochs(resumed, train, &test, "");

    Checkpoint a = make_checkpoint(full);
    Checkpoint b = make_checkpoint(resumed);
    REQUIRE(a.tensors.size() == b.tensors.size());
    for (size_t i = 0; i < a.tensors.size(); ++i) {
        CHECK(max_abs_diff(a.tensors[i].second, b.tensors[i].second) == 0.0);
    }
    CHECK(a.rng_counter == b.rng_counter);

    // the per-epoch losses after the resume equal the reference's
    auto loss_rows = [](const MetricsLog& log) {
        std::vector<double> out;
        for (const auto& r : log.rows) {
            if (r.split == "train" && r.metric == "loss") out.push_back(r.value);
        }
        return out;
    };
    auto lf = loss_rows(full.log);
    auto lr = loss_rows(resumed.log);
    REQUIRE(lf.size() == 4);
    REQUIRE(lr.size() == 2);  // resumed log holds only the later epochs
    CHECK(lf[2] == lr[0]);
    CHECK(lf[3] == lr[1]);
    std::filesystem::remove(path);
}

// ---- image grids ---------------------------------------------------------

TEST_CASE("image grids have exact geometry and endpoint mapping") {
    const std::string p1 = temp_path("one.pgm");
    Matrix frame(1, 225, 0.0);
    frame.data[0] = 1.0;
    emit_image_grid({frame}, 4, 15, 15, p1);
    std::string bytes = read_file(p1);
    CHECK(bytes.rfind("P5\n15 15\n255\n", 0) == 0);
    const size_t header = std::string("P5\n15 15\n255\n").size();
    CHECK(bytes.size() == header + 225);
    CHECK(static_cast<unsigned char>(bytes[header]) == 255);
    CHECK(static_cast<unsigned char>(bytes[header + 1]) == 0);
    std::filesystem::remove(p1);

    const std::string p2 = temp_path("grid.pgm");
    std::vector<Matrix> frames(10, Matrix(1, 225, 0.5));
    emit_image_grid(frames, 5, 15, 15, p2);
    std::string grid = read_file(p2);
    // 2 rows x 5 cols of 15x15 tiles with 1-pixel separators
    const std::string want_header = "P5\n79 31\n255\n";
    CHECK(grid.rfind(want_header, 0) == 0);
    CHECK(grid.size() == want_header.size() + 79 * 31);
    std::filesystem::remove(p2);
}

TEST_CASE("the toy stream is deterministic and unit-ranged") {
    SequenceDataset a = make_toy_stream(4, 16);
    SequenceDataset b = make_toy_stream(4, 16);
    REQUIRE(a.sequences.size() == 1);
    REQUIRE(a.sequences[0].size() == 16);
    for (int t = 0; t < 16; ++t) {
        CHECK(max_abs_diff(a.sequences[0][t], b.sequences[0][t]) == 0.0);
        for (double v : a.sequences[0][t].data) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
    }
}
