#include "gsnlab/harness.hpp"

#include <zlib.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

namespace gsn {

// ---- metrics -------------------------------------------------------------

void MetricsLog::add(int epoch, const std::string& split, const std::string& metric, double value) {
    rows.push_back({epoch, split, metric, value});
}

std::string MetricsLog::to_csv() const {
    std::string out = "epoch,split,metric,value\n";
    char buf[64];
    for (const Row& r : rows) {
        std::snprintf(buf, sizeof(buf), "%.17g", r.value);
        out += std::to_string(r.epoch) + "," + r.split + "," + r.metric + "," + buf + "\n";
    }
    return out;
}

void MetricsLog::write_csv(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write metrics file: " + path);
    out << to_csv();
}

// ---- checkpoints ---------------------------------------------------------

namespace {

void put_u16(std::string& b, uint16_t v) {
    b.push_back(static_cast<char>(v & 0xff));
    b.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32(std::string& b, uint32_t v) {
    for (int i = 0; i < 4; ++i) b.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& b, double v) {
    uint64_t bits;
    std::memcpy(&bits, &v, 8);
    for (int i = 0; i < 8; ++i) b.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

struct ByteReader {
    const std::string& b;
    size_t pos = 0;

    void need(size_t n) const {
        if (pos + n > b.size()) throw CheckpointError("checkpoint truncated");
    }
    uint16_t u16() {
        need(2);
        uint16_t v = static_cast<uint8_t>(b[pos]) | (static_cast<uint16_t>(static_cast<uint8_t>(b[pos + 1])) << 8);
        pos += 2;
        return v;
    }
    uint32_t u32() {
        need(4);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(static_cast<uint8_t>(b[pos + i])) << (8 * i);
        pos += 4;
        return v;
    }
    uint8_t u8() {
        need(1);
        return static_cast<uint8_t>(b[pos++]);
    }
    double f64() {
        need(8);
        uint64_t bits = 0;
        for (int i = 0; i < 8; ++i) bits |= static_cast<uint64_t>(static_cast<uint8_t>(b[pos + i])) << (8 * i);
        pos += 8;
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }
    std::string str(size_t n) {
        need(n);
        std::string s = b.substr(pos, n);
        pos += n;
        return s;
    }
};

// rank 2: matrix; rank 1: flat row; rank 0: single scalar
void put_record(std::string& b, const std::string& name, const Matrix& m, int rank) {
    put_u16(b, static_cast<uint16_t>(name.size()));
    b += name;
    b.push_back(static_cast<char>(rank));
    if (rank == 2) {
        put_u32(b, static_cast<uint32_t>(m.rows));
        put_u32(b, static_cast<uint32_t>(m.cols));
    } else if (rank == 1) {
        put_u32(b, static_cast<uint32_t>(m.data.size()));
    }
    for (double v : m.data) put_f64(b, v);
}

double u64_as_f64(uint64_t v) {
    double d;
    std::memcpy(&d, &v, 8);
    return d;
}

uint64_t f64_as_u64(double d) {
    uint64_t v;
    std::memcpy(&v, &d, 8);
    return v;
}

constexpr char kCkptMagic[4] = {'G', 'S', 'N', 'C'};
constexpr uint32_t kCkptVersion = 1;

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
    std::string body;
    body.append(kCkptMagic, 4);
    put_u32(body, kCkptVersion);

    Matrix scalar(1, 1, 0.0);
    scalar.data[0] = u64_as_f64(static_cast<uint64_t>(ck.epoch));
    put_record(body, "__epoch", scalar, 0);
    scalar.data[0] = u64_as_f64(ck.rng_seed);
    put_record(body, "__rng_seed", scalar, 0);
    scalar.data[0] = u64_as_f64(ck.rng_counter);
    put_record(body, "__rng_counter", scalar, 0);

    Matrix cfg_bytes(1, std::max<int>(1, static_cast<int>(ck.config_json.size())), 0.0);
    cfg_bytes.data.resize(ck.config_json.size());
    cfg_bytes.cols = static_cast<int>(ck.config_json.size());
    for (size_t i = 0; i < ck.config_json.size(); ++i) {
        cfg_bytes.data[i] = static_cast<double>(static_cast<uint8_t>(ck.config_json[i]));
    }
    put_record(body, "__config_json", cfg_bytes, 1);

    // tensors are always rank 2 so shapes round-trip exactly
    for (const auto& [name, m] : ck.tensors) put_record(body, name, m, 2);

    uint32_t crc = static_cast<uint32_t>(
        crc32(0L, reinterpret_cast<const Bytef*>(body.data()), static_cast<uInt>(body.size())));
    put_u32(body, crc);

    std::ofstream out(path, std::ios::binary);
    if (!out) throw CheckpointError("cannot write checkpoint: " + path);
    out.write(body.data(), static_cast<std::streamsize>(body.size()));
    if (!out) throw CheckpointError("short write: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("cannot open checkpoint: " + path);
    std::string body((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (body.size() < 12) throw CheckpointError("checkpoint truncated");

    const std::string payload = body.substr(0, body.size() - 4);
    ByteReader tail{body, body.size() - 4};
    const uint32_t stored_crc = tail.u32();
    const uint32_t crc = static_cast<uint32_t>(
        crc32(0L, reinterpret_cast<const Bytef*>(payload.data()), static_cast<uInt>(payload.size())));
    if (crc != stored_crc) throw CheckpointError("checkpoint integrity check failed (bad CRC)");

    ByteReader r{payload, 0};
    if (r.str(4) != std::string(kCkptMagic, 4)) throw CheckpointError("bad checkpoint magic");
    const uint32_t version = r.u32();
    if (version != kCkptVersion) {
        throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
    }

    Checkpoint ck;
    while (r.pos < payload.size()) {
        const uint16_t name_len = r.u16();
        const std::string name = r.str(name_len);
        const uint8_t rank = r.u8();
        size_t count = 1;
        int rows = 1, cols = 1;
        if (rank == 1) {
            cols = static_cast<int>(r.u32());
            count = static_cast<size_t>(cols);
        } else if (rank == 2) {
            rows = static_cast<int>(r.u32());
            cols = static_cast<int>(r.u32());
            count = static_cast<size_t>(rows) * cols;
        } else if (rank != 0) {
            throw CheckpointError("unsupported tensor rank " + std::to_string(rank));
        }
        Matrix m(std::max(rows, 1), std::max(cols, 0), 0.0);
        m.rows = rows;
        m.cols = cols;
        m.data.resize(count);
        for (size_t i = 0; i < count; ++i) m.data[i] = r.f64();

        if (name == "__epoch") {
            ck.epoch = static_cast<uint32_t>(f64_as_u64(m.data[0]));
        } else if (name == "__rng_seed") {
            ck.rng_seed = f64_as_u64(m.data[0]);
        } else if (name == "__rng_counter") {
            ck.rng_counter = f64_as_u64(m.data[0]);
        } else if (name == "__config_json") {
            ck.config_json.clear();
            for (double v : m.data) ck.config_json.push_back(static_cast<char>(static_cast<uint8_t>(v)));
        } else {
            ck.tensors.emplace_back(name, std::move(m));
        }
    }
    return ck;
}

// ---- model bundle --------------------------------------------------------

namespace {

std::vector<int> full_sizes(const TrainConfig& cfg) {
    std::vector<int> sizes;
    sizes.push_back(cfg.dataset_width());
    for (int h : cfg.hidden_sizes) sizes.push_back(h);
    return sizes;
}

int untied_k_of(const TrainConfig& cfg) {
    return cfg.untied_k > 0 ? cfg.untied_k : 2 * static_cast<int>(cfg.hidden_sizes.size());
}

}  // namespace

ModelBundle ModelBundle::build(const TrainConfig& cfg, RandomSource& rng) {
    ModelBundle b;
    b.kind = cfg.model;
    switch (cfg.model) {
        case ModelKind::Dae:
        case ModelKind::Gsn:
            b.gsn = GsnParams::init(full_sizes(cfg), cfg.tied, cfg.noise, cfg.hidden_act,
                                    cfg.visible_act, rng);
            break;
        case ModelKind::Tgsn:
            b.tgsn = TgsnModel::init(full_sizes(cfg), cfg.tied, cfg.noise, cfg.hidden_act,
                                     cfg.visible_act, cfg.window, cfg.wb, rng);
            break;
        case ModelKind::UntiedGsn:
            b.untied = UntiedGsnModel::init(full_sizes(cfg), cfg.noise, cfg.hidden_act,
                                            cfg.visible_act, untied_k_of(cfg), rng);
            break;
        case ModelKind::RnnGsn:
            b.rnngsn = RnnGsnModel::init(full_sizes(cfg), cfg.tied, cfg.noise, cfg.hidden_act,
                                         cfg.visible_act, cfg.lstm_hidden, cfg.wb, rng);
            break;
        case ModelKind::Sen:
            b.sen = SenStack::init(cfg.sen_levels, cfg.dataset_width(), cfg.hidden_sizes,
                                   cfg.lstm_hidden, cfg.tied, cfg.noise, cfg.visible_act, cfg.wb, rng);
            break;
        case ModelKind::Lstm: {
            std::vector<int> sizes = cfg.lstm_hidden_sizes;
            if (sizes.empty()) sizes.assign(cfg.hidden_sizes.size(), cfg.lstm_hidden);
            b.lstm = LstmPredictor::init(cfg.dataset_width(), sizes, cfg.visible_act, rng);
            break;
        }
    }
    return b;
}

ParamSet ModelBundle::param_refs() {
    switch (kind) {
        case ModelKind::Dae:
        case ModelKind::Gsn:
            return gsn.param_refs();
        case ModelKind::Tgsn: {
            ParamSet ps = tgsn.gsn.param_refs();
            ps.add(tgsn.transition.weights);
            ps.add(tgsn.transition.bias);
            return ps;
        }
        case ModelKind::UntiedGsn:
            return untied.gsn.param_refs();
        case ModelKind::RnnGsn: {
            ParamSet ps = rnngsn.gsn.param_refs();
            ParamSet rnn = rnngsn.rnn_param_refs();
            for (Matrix* m : rnn.tensors) ps.tensors.push_back(m);
            return ps;
        }
        case ModelKind::Sen:
            return sen.param_refs();
        case ModelKind::Lstm:
            return lstm.param_refs();
    }
    return {};
}

// ---- predictor -----------------------------------------------------------

Predictor::Predictor(ModelBundle& m, RandomSource rng_) : model(&m), rng(rng_) { reset(1); }

void Predictor::reset(int batch) {
    switch (model->kind) {
        case ModelKind::Tgsn:
            history = HiddenHistory{model->tgsn.transition.window, model->tgsn.gsn.hidden_total(),
                                    batch, {}};
            break;
        case ModelKind::UntiedGsn:
            model->untied.reset_state();
            break;
        case ModelKind::RnnGsn:
            lstm_state = LstmState::zero(batch, model->rnngsn.lstm.hidden_size);
            break;
        case ModelKind::Sen:
            sen_state = sen_init_state(model->sen, batch);
            break;
        case ModelKind::Lstm:
            lstm_states.clear();
            for (const LstmCell& c : model->lstm.cells) {
                lstm_states.push_back(LstmState::zero(batch, c.hidden_size));
            }
            break;
        default:
            break;
    }
}

Matrix Predictor::step(const Matrix& x_t) {
    switch (model->kind) {
        case ModelKind::Dae:
        case ModelKind::Gsn: {
            WalkbackConfig wb;
            wb.k = 1;
            return gsn_reconstruct(model->gsn, x_t, wb, rng).x_recon;
        }
        case ModelKind::Tgsn:
            return model->tgsn.predict_next(history, x_t, rng);
        case ModelKind::UntiedGsn:
            return untied_predict_next(model->untied, x_t, rng);
        case ModelKind::RnnGsn:
            return model->rnngsn.predict_next(x_t, lstm_state, rng);
        case ModelKind::Sen: {
            SenForwardResult fw = sen_forward(model->sen, x_t, sen_state, rng);
            const GsnParams& g0 = model->sen.levels[0].gsn;
            Matrix h1 = hslice(fw.predicted_next[0], 0, g0.layer_sizes[1]);
            return gsn_decode_from_hidden1(g0, h1);
        }
        case ModelKind::Lstm:
            return lstm_baseline_step(model->lstm, x_t, lstm_states);
    }
    throw std::logic_error("unreachable");
}

std::vector<Matrix> Predictor::horizons(const Matrix& x_t, int max_h) {
    if (max_h < 1) throw std::invalid_argument("horizons: max_h must be >= 1");
    if (model->kind == ModelKind::UntiedGsn) {
        if (max_h > model->untied.k) {
            throw std::invalid_argument("horizon " + std::to_string(max_h) +
                                        " exceeds prediction depth " + std::to_string(model->untied.k));
        }
        RandomSource child = rng.split(0x484f52);
        std::vector<Matrix> all = untied_predict_horizons(model->untied, x_t, child);
        all.resize(max_h);
        return all;
    }
    // closed-loop rollout on a copy so the caller's state stays causal
    Predictor scratch = *this;
    std::vector<Matrix> out;
    Matrix x = x_t;
    for (int h = 0; h < max_h; ++h) {
        x = scratch.step(x);
        out.push_back(x);
    }
    return out;
}

// ---- evaluation ----------------------------------------------------------

namespace {

double frame_sq_err(const SequenceDataset& ds, const Matrix& pred, const Matrix& target,
                    bool destandardize) {
    const Matrix p = destandardize ? destandardize_frame(ds, pred) : pred;
    const Matrix t = destandardize ? destandardize_frame(ds, target) : target;
    double s = 0.0;
    for (size_t i = 0; i < p.data.size(); ++i) {
        const double d = p.data[i] - t.data[i];
        s += d * d;
    }
    return s;
}

}  // namespace

double evaluate_mse(Predictor& pred, const SequenceDataset& test, bool destandardize) {
    if (test.sequences.empty()) throw std::invalid_argument("evaluate_mse: empty test set");
    double total = 0.0;
    long count = 0;
    for (const auto& seq : test.sequences) {
        pred.reset(1);
        for (size_t t = 0; t + 1 < seq.size(); ++t) {
            Matrix p = pred.step(seq[t]);
            total += frame_sq_err(test, p, seq[t + 1], destandardize);
            count += seq[t].cols;
        }
    }
    if (count == 0) throw std::invalid_argument("evaluate_mse: no frame pairs in test set");
    return total / count;
}

double naive_copy_mse(const SequenceDataset& test, bool destandardize) {
    if (test.sequences.empty()) throw std::invalid_argument("naive_copy_mse: empty test set");
    double total = 0.0;
    long count = 0;
    for (const auto& seq : test.sequences) {
        for (size_t t = 0; t + 1 < seq.size(); ++t) {
            total += frame_sq_err(test, seq[t], seq[t + 1], destandardize);
            count += seq[t].cols;
        }
    }
    if (count == 0) throw std::invalid_argument("naive_copy_mse: no frame pairs in test set");
    return total / count;
}

std::vector<double> evaluate_bce(Predictor& pred, const SequenceDataset& test,
                                 const std::vector<int>& horizons) {
    if (test.sequences.empty()) throw std::invalid_argument("evaluate_bce: empty test set");
    if (test.range != ValueRange::UnitInterval) {
        throw std::invalid_argument("evaluate_bce: data is not unit-interval");
    }
    int max_h = 0;
    for (int h : horizons) {
        if (h < 1) throw std::invalid_argument("horizons must be >= 1");
        max_h = std::max(max_h, h);
    }
    std::vector<double> totals(horizons.size(), 0.0);
    long count = 0;
    for (const auto& seq : test.sequences) {
        pred.reset(1);
        for (size_t t = 0; t + max_h < seq.size(); ++t) {
            std::vector<Matrix> preds = pred.horizons(seq[t], max_h);
            for (size_t i = 0; i < horizons.size(); ++i) {
                totals[i] += bce_loss(preds[horizons[i] - 1], seq[t + horizons[i]]).value;
            }
            ++count;
            pred.step(seq[t]);  // advance the causal state
        }
    }
    if (count == 0) throw std::invalid_argument("evaluate_bce: sequences shorter than max horizon");
    for (double& v : totals) v /= count;
    return totals;
}

// ---- training ------------------------------------------------------------

TrainRun init_train_run(const TrainConfig& cfg) {
    cfg.validate();
    TrainRun run;
    run.cfg = cfg;
    run.rng = RandomSource(cfg.seed);
    run.model = ModelBundle::build(cfg, run.rng);
    run.opt = cfg.make_optimizer();
    run.opt2 = cfg.make_optimizer();
    return run;
}

Checkpoint make_checkpoint(const TrainRun& run) {
    Checkpoint ck;
    ck.config_json = run.cfg.to_json().dump();
    ck.rng_seed = run.rng.seed;
    ck.rng_counter = run.rng.counter;
    ck.epoch = static_cast<uint32_t>(run.epoch);

    ModelBundle& model = const_cast<ModelBundle&>(run.model);
    ParamSet params = model.param_refs();
    for (size_t i = 0; i < params.size(); ++i) {
        ck.tensors.emplace_back("param/" + std::to_string(i), *params.tensors[i]);
    }
    auto dump_opt = [&ck](const char* prefix, const OptimizerState& opt) {
        Matrix meta(1, 2, 0.0);
        meta(0, 0) = opt.learning_rate;
        meta(0, 1) = static_cast<double>(opt.step_count);
        ck.tensors.emplace_back(std::string(prefix) + "/meta", meta);
        for (size_t i = 0; i < opt.m_acc.size(); ++i) {
            ck.tensors.emplace_back(std::string(prefix) + "/m/" + std::to_string(i), opt.m_acc[i]);
        }
        for (size_t i = 0; i < opt.v_acc.size(); ++i) {
            ck.tensors.emplace_back(std::string(prefix) + "/v/" + std::to_string(i), opt.v_acc[i]);
        }
    };
    dump_opt("opt0", run.opt);
    dump_opt("opt1", run.opt2);
    if (!run.recon_history.empty()) {
        Matrix hist(1, static_cast<int>(run.recon_history.size()), 0.0);
        for (size_t i = 0; i < run.recon_history.size(); ++i) hist.data[i] = run.recon_history[i];
        ck.tensors.emplace_back("recon_history", hist);
    }
    return ck;
}

TrainRun run_from_checkpoint(const Checkpoint& ck) {
    nlohmann::json j = nlohmann::json::parse(ck.config_json);
    TrainConfig cfg = config_from_json(j);
    TrainRun run = init_train_run(cfg);
    run.rng.seed = ck.rng_seed;
    run.rng.counter = ck.rng_counter;
    run.epoch = static_cast<int>(ck.epoch);

    ParamSet params = run.model.param_refs();
    auto find = [&ck](const std::string& name) -> const Matrix* {
        for (const auto& [n, m] : ck.tensors) {
            if (n == name) return &m;
        }
        return nullptr;
    };
    for (size_t i = 0; i < params.size(); ++i) {
        const Matrix* m = find("param/" + std::to_string(i));
        if (!m) throw CheckpointError("checkpoint missing tensor param/" + std::to_string(i));
        if (m->rows != params.tensors[i]->rows || m->cols != params.tensors[i]->cols) {
            throw CheckpointError("checkpoint tensor shape mismatch at param/" + std::to_string(i));
        }
        *params.tensors[i] = *m;
    }
    auto load_opt = [&find](const char* prefix, OptimizerState& opt) {
        const Matrix* meta = find(std::string(prefix) + "/meta");
        if (!meta) return;
        opt.learning_rate = (*meta)(0, 0);
        opt.step_count = static_cast<long>((*meta)(0, 1));
        opt.m_acc.clear();
        opt.v_acc.clear();
        for (size_t i = 0;; ++i) {
            const Matrix* m = find(std::string(prefix) + "/m/" + std::to_string(i));
            if (!m) break;
            opt.m_acc.push_back(*m);
        }
        for (size_t i = 0;; ++i) {
            const Matrix* v = find(std::string(prefix) + "/v/" + std::to_string(i));
            if (!v) break;
            opt.v_acc.push_back(*v);
        }
    };
    load_opt("opt0", run.opt);
    load_opt("opt1", run.opt2);
    if (const Matrix* hist = find("recon_history")) {
        run.recon_history.assign(hist->data.begin(), hist->data.end());
    }
    return run;
}

namespace {

// Frames of one sequence, split into training windows when configured.
std::vector<std::vector<Matrix>> training_windows(const TrainConfig& cfg, const SequenceDataset& data) {
    std::vector<std::vector<Matrix>> out;
    if (cfg.subsequence_len >= 2) {
        for (const Subsequence& s : make_subsequences(data, cfg.subsequence_len, cfg.subsequence_len)) {
            out.push_back(subsequence_frames(data, s));
        }
        if (!out.empty()) return out;
    }
    for (const auto& seq : data.sequences) out.push_back(seq);
    return out;
}

double epoch_dae_gsn(TrainRun& run, const SequenceDataset& data) {
    const TrainConfig& cfg = run.cfg;
    std::vector<const Matrix*> pool;
    for (const auto& seq : data.sequences) {
        for (const Matrix& f : seq) pool.push_back(&f);
    }
    ParamSet params = run.model.gsn.param_refs();
    double total = 0.0;
    int batches = 0;
    for (size_t i = 0; i < pool.size(); i += cfg.batch_size) {
        const size_t n = std::min<size_t>(cfg.batch_size, pool.size() - i);
        Matrix batch(static_cast<int>(n), data.frame_width, 0.0);
        for (size_t r = 0; r < n; ++r) {
            for (int c = 0; c < data.frame_width; ++c) batch(static_cast<int>(r), c) = (*pool[i + r])(0, c);
        }
        double loss;
        GradSet gs;
        if (cfg.model == ModelKind::Dae) {
            DaeStepResult step = dae_train_step(run.model.gsn, batch, run.rng, true);
            loss = step.loss;
            gs = step.grads.to_grad_set(run.model.gsn);
        } else {
            WalkbackTrainResult step = walkback_train(run.model.gsn, batch, cfg.wb, run.rng, true);
            loss = step.loss;
            gs = step.grads.to_grad_set(run.model.gsn);
        }
        if (cfg.clip_enabled) clip_global_norm(gs, cfg.clip);
        run.opt.apply(params, gs);
        total += loss;
        ++batches;
    }
    return batches ? total / batches : 0.0;
}

double epoch_tgsn(TrainRun& run, const SequenceDataset& data) {
    const bool gate = tgsn_warmup_gate(run.recon_history, run.cfg.gate_threshold);
    double recon = 0.0, pred = 0.0;
    int n = 0;
    for (const auto& frames : training_windows(run.cfg, data)) {
        if (frames.size() < 2) continue;
        TgsnEpochLosses l = tgsn_em_epoch(run.model.tgsn, frames, run.opt, run.opt2, run.rng, gate);
        recon += l.recon;
        pred += l.pred;
        ++n;
    }
    if (n) {
        recon /= n;
        pred /= n;
    }
    run.recon_history.push_back(recon);
    run.log.add(run.epoch + 1, "train", "recon_bce", recon);
    run.log.add(run.epoch + 1, "train", "pred_bce", pred);
    return pred;
}

double epoch_untied(TrainRun& run, const SequenceDataset& data) {
    double total = 0.0;
    long pairs = 0;
    for (const auto& frames : training_windows(run.cfg, data)) {
        run.model.untied.reset_state();
        PredictionBuffer buf;
        buf.k = run.model.untied.k;
        for (size_t t = 0; t < frames.size(); ++t) {
            UntiedStepResult r = untied_gsn_online_step(run.model.untied, frames[t],
                                                        static_cast<long>(t), buf, run.opt, run.rng);
            if (r.n_pairs > 0) {
                total += r.loss;
                ++pairs;
            }
        }
    }
    return pairs ? total / pairs : 0.0;
}

double epoch_rnngsn(TrainRun& run, const SequenceDataset& data) {
    double total = 0.0;
    long n = 0;
    for (const auto& frames : training_windows(run.cfg, data)) {
        LstmState state = LstmState::zero(frames.empty() ? 1 : frames[0].rows,
                                          run.model.rnngsn.lstm.hidden_size);
        for (size_t t = 0; t < frames.size(); ++t) {
            const Matrix* next = t + 1 < frames.size() ? &frames[t + 1] : nullptr;
            RnnGsnStepResult r = rnngsn_train_step(run.model.rnngsn, frames[t], next, state,
                                                   &run.opt, &run.opt2, run.rng);
            if (r.pred_present) {
                total += r.pred_loss;
                ++n;
            }
        }
    }
    return n ? total / n : 0.0;
}

double epoch_sen(TrainRun& run, const SequenceDataset& data) {
    SenTrainOptions opts;
    opts.wb = run.cfg.wb;
    opts.clip = run.cfg.clip_enabled;
    opts.clip_cfg = run.cfg.clip;
    double total = 0.0;
    long n = 0;
    for (const auto& frames : training_windows(run.cfg, data)) {
        SenRunState state = sen_init_state(run.model.sen, frames.empty() ? 1 : frames[0].rows);
        for (size_t t = 0; t < frames.size(); ++t) {
            const Matrix* next = t + 1 < frames.size() ? &frames[t + 1] : nullptr;
            SenStepLosses l = sen_train_step(run.model.sen, frames[t], next, state, &run.opt, opts,
                                             run.rng);
            total += l.total;
            ++n;
        }
    }
    return n ? total / n : 0.0;
}

double epoch_lstm(TrainRun& run, const SequenceDataset& data) {
    double total = 0.0;
    int n = 0;
    for (const auto& frames : training_windows(run.cfg, data)) {
        total += lstm_train_subsequence(run.model.lstm, frames, run.opt, run.cfg.clip,
                                        run.cfg.bptt_chunk, run.cfg.visible_act);
        ++n;
    }
    return n ? total / n : 0.0;
}

}  // namespace

double train_one_epoch(TrainRun& run, const SequenceDataset& data) {
    double loss = 0.0;
    switch (run.cfg.model) {
        case ModelKind::Dae:
        case ModelKind::Gsn: loss = epoch_dae_gsn(run, data); break;
        case ModelKind::Tgsn: loss = epoch_tgsn(run, data); break;
        case ModelKind::UntiedGsn: loss = epoch_untied(run, data); break;
        case ModelKind::RnnGsn: loss = epoch_rnngsn(run, data); break;
        case ModelKind::Sen: loss = epoch_sen(run, data); break;
        case ModelKind::Lstm: loss = epoch_lstm(run, data); break;
    }
    run.opt.epoch_end();
    run.opt2.epoch_end();
    return loss;
}

void train_epochs(TrainRun& run, const SequenceDataset& train_data, const SequenceDataset* test_data,
                  const std::string& out_dir) {
    const bool is_mocap = train_data.range == ValueRange::Unbounded;
    while (run.epoch < run.cfg.epochs && !run.diverged) {
        const double loss = train_one_epoch(run, train_data);
        const int epoch_no = run.epoch + 1;
        run.log.add(epoch_no, "train", "loss", loss);
        if (!std::isfinite(loss)) {
            run.diverged = true;
            run.log.add(epoch_no, "train", "diverged", 1.0);
        } else if (test_data && !test_data->sequences.empty()) {
            Predictor pred(run.model, run.rng.split(0xE5A1 + static_cast<uint64_t>(epoch_no)));
            run.log.add(epoch_no, "test", "mse", evaluate_mse(pred, *test_data, is_mocap));
        }
        ++run.epoch;
        const bool at_checkpoint = run.diverged || run.epoch % run.cfg.checkpoint_every == 0 ||
                                   run.epoch == run.cfg.epochs;
        if (!out_dir.empty()) {
            if (at_checkpoint) save_checkpoint(out_dir + "/checkpoint.gsnc", make_checkpoint(run));
            run.log.write_csv(out_dir + "/metrics.csv");
        }
    }
}

// ---- datasets ------------------------------------------------------------

SequenceDataset make_toy_stream(int width, int frames) {
    SequenceDataset ds;
    ds.frame_width = width;
    ds.range = ValueRange::UnitInterval;
    std::vector<Matrix> seq;
    for (int t = 0; t < frames; ++t) {
        Matrix f(1, width, 0.1);
        f(0, t % width) = 0.9;
        seq.push_back(std::move(f));
    }
    ds.sequences.push_back(std::move(seq));
    return ds;
}

SequenceDataset load_dataset(const TrainConfig& cfg, uint64_t seed) {
    SequenceDataset ds;
    if (cfg.dataset == "toy4") {
        ds = make_toy_stream(4, 64);
        std::vector<Matrix> base = ds.sequences[0];
        for (int i = 1; i < cfg.count; ++i) ds.sequences.push_back(base);
        return ds;
    }
    if (cfg.dataset == "balls") {
        RandomSource rng(seed);
        for (int i = 0; i < cfg.count; ++i) {
            BouncingBallsConfig bc;
            bc.seed = rng.split(static_cast<uint64_t>(i) + 1).seed;
            SequenceDataset one = simulate_bouncing_balls(bc);
            if (i == 0) {
                ds = std::move(one);
            } else {
                ds.sequences.push_back(std::move(one.sequences[0]));
            }
        }
        return ds;
    }
    if (cfg.dataset == "mnist") {
        LabeledImages store = make_synthetic_digits(20, 28, seed);
        for (int i = 0; i < cfg.count; ++i) {
            SequenceDataset one = sequence_mnist(store, 100, seed + 1000003ULL * (i + 1));
            if (i == 0) {
                ds = std::move(one);
            } else {
                ds.sequences.push_back(std::move(one.sequences[0]));
            }
        }
        return ds;
    }
    if (cfg.dataset == "mocap") {
        for (int i = 0; i < cfg.count; ++i) {
            SequenceDataset one = make_synthetic_mocap(240, seed + 7919ULL * (i + 1));
            if (i == 0) {
                ds = std::move(one);
            } else {
                ds.sequences.push_back(std::move(one.sequences[0]));
            }
        }
        standardize_mocap(ds);
        return ds;
    }
    throw ConfigError("unknown dataset: " + cfg.dataset);
}

// ---- images --------------------------------------------------------------

void emit_image_grid(const std::vector<Matrix>& frames, int cols, int frame_h, int frame_w,
                     const std::string& path) {
    if (frames.empty()) throw std::invalid_argument("emit_image_grid: no frames");
    if (cols < 1) throw std::invalid_argument("emit_image_grid: cols must be >= 1");
    for (const Matrix& f : frames) {
        if (static_cast<int>(f.data.size()) != frame_h * frame_w) {
            throw std::invalid_argument("emit_image_grid: frame size does not match declared dims");
        }
    }
    const int n = static_cast<int>(frames.size());
    const int grid_cols = std::min(cols, n);
    const int grid_rows = (n + grid_cols - 1) / grid_cols;
    const int img_w = grid_cols * frame_w + (grid_cols - 1);
    const int img_h = grid_rows * frame_h + (grid_rows - 1);
    std::vector<uint8_t> pixels(static_cast<size_t>(img_w) * img_h, 0);
    for (int i = 0; i < n; ++i) {
        const int gr = i / grid_cols;
        const int gc = i % grid_cols;
        const int y0 = gr * (frame_h + 1);
        const int x0 = gc * (frame_w + 1);
        for (int y = 0; y < frame_h; ++y) {
            for (int x = 0; x < frame_w; ++x) {
                double v = frames[i].data[static_cast<size_t>(y) * frame_w + x];
                v = std::min(1.0, std::max(0.0, v));
                pixels[static_cast<size_t>(y0 + y) * img_w + (x0 + x)] =
                    static_cast<uint8_t>(std::lround(v * 255.0));
            }
        }
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write image: " + path);
    out << "P5\n" << img_w << " " << img_h << "\n255\n";
    out.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
}

}  // namespace gsn
