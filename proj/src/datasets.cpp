#include "gsnlab/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace gsn {

// ---- bouncing balls ------------------------------------------------------

void BouncingBallsConfig::validate() const {
    if (n_balls < 1) throw std::invalid_argument("n_balls must be >= 1");
    if (resolution < 4) throw std::invalid_argument("resolution must be >= 4");
    if (frames < 1) throw std::invalid_argument("frames must be >= 1");
    if (radius >= box / 2.0) throw std::invalid_argument("radius must be < box/2");
    if (speed_scale < 0.0) throw std::invalid_argument("speed_scale must be >= 0");
}

BallSimState init_balls(const BouncingBallsConfig& cfg, RandomSource& rng) {
    cfg.validate();
    const double r = cfg.radius;
    for (int attempt = 0; attempt < 100; ++attempt) {
        BallSimState s;
        for (int i = 0; i < cfg.n_balls; ++i) {
            s.px.push_back(r + (cfg.box - 2 * r) * rng.uniform());
            s.py.push_back(r + (cfg.box - 2 * r) * rng.uniform());
            const double speed = (0.5 + rng.uniform()) * cfg.speed_scale;
            const double angle = 2.0 * M_PI * rng.uniform();
            s.vx.push_back(speed * std::cos(angle));
            s.vy.push_back(speed * std::sin(angle));
        }
        bool ok = true;
        for (int i = 0; i < cfg.n_balls && ok; ++i) {
            for (int j = i + 1; j < cfg.n_balls; ++j) {
                const double dx = s.px[i] - s.px[j];
                const double dy = s.py[i] - s.py[j];
                if (dx * dx + dy * dy < 4 * r * r) {
                    ok = false;
                    break;
                }
            }
        }
        if (ok) return s;
    }
    throw std::runtime_error("init_balls: could not place " + std::to_string(cfg.n_balls) +
                             " non-overlapping balls after 100 attempts");
}

double kinetic_energy(const BallSimState& s) {
    double e = 0.0;
    for (size_t i = 0; i < s.vx.size(); ++i) e += 0.5 * (s.vx[i] * s.vx[i] + s.vy[i] * s.vy[i]);
    return e;
}

static void reflect_walls(const BouncingBallsConfig& cfg, BallSimState& s, int i) {
    const double r = cfg.radius, hi = cfg.box - cfg.radius;
    if (s.px[i] < r) {
        s.px[i] = 2 * r - s.px[i];
        s.vx[i] = -s.vx[i];
    } else if (s.px[i] > hi) {
        s.px[i] = 2 * hi - s.px[i];
        s.vx[i] = -s.vx[i];
    }
    if (s.py[i] < r) {
        s.py[i] = 2 * r - s.py[i];
        s.vy[i] = -s.vy[i];
    } else if (s.py[i] > hi) {
        s.py[i] = 2 * hi - s.py[i];
        s.vy[i] = -s.vy[i];
    }
}

void simulate_balls_frame(const BouncingBallsConfig& cfg, BallSimState& s) {
    const int n = cfg.n_balls;
    double vmax = 0.0;
    for (int i = 0; i < n; ++i) {
        vmax = std::max(vmax, std::sqrt(s.vx[i] * s.vx[i] + s.vy[i] * s.vy[i]));
    }
    // keep per-substep displacement below radius/4 so tunneling is negligible
    const int substeps = std::max(1, static_cast<int>(std::ceil(vmax / (cfg.radius / 4.0))));
    const double dt = 1.0 / substeps;
    for (int step = 0; step < substeps; ++step) {
        for (int i = 0; i < n; ++i) {
            s.px[i] += s.vx[i] * dt;
            s.py[i] += s.vy[i] * dt;
            reflect_walls(cfg, s, i);
        }
        // pairwise elastic collisions, resolved in index order
        for (int i = 0; i < n; ++i) {
            for (int j = i + 1; j < n; ++j) {
                const double dx = s.px[j] - s.px[i];
                const double dy = s.py[j] - s.py[i];
                const double d2 = dx * dx + dy * dy;
                if (d2 >= 4 * cfg.radius * cfg.radius || d2 == 0.0) continue;
                const double d = std::sqrt(d2);
                const double nx = dx / d, ny = dy / d;
                const double rvn = (s.vx[j] - s.vx[i]) * nx + (s.vy[j] - s.vy[i]) * ny;
                if (rvn >= 0.0) continue;  // separating already
                // equal masses: exchange normal velocity components
                const double v1n = s.vx[i] * nx + s.vy[i] * ny;
                const double v2n = s.vx[j] * nx + s.vy[j] * ny;
                s.vx[i] += (v2n - v1n) * nx;
                s.vy[i] += (v2n - v1n) * ny;
                s.vx[j] += (v1n - v2n) * nx;
                s.vy[j] += (v1n - v2n) * ny;
            }
        }
    }
}

Matrix render_balls(const BouncingBallsConfig& cfg, const BallSimState& s) {
    const int res = cfg.resolution;
    Matrix frame(1, res * res, 0.0);
    const double px_size = cfg.box / res;
    const double sigma = cfg.radius / 2.0;
    const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
    for (int i = 0; i < res; ++i) {
        const double cy = (i + 0.5) * px_size;
        for (int j = 0; j < res; ++j) {
            const double cx = (j + 0.5) * px_size;
            double v = 0.0;
            for (size_t b = 0; b < s.px.size(); ++b) {
                const double dx = cx - s.px[b];
                const double dy = cy - s.py[b];
                v += std::exp(-(dx * dx + dy * dy) * inv2s2);
            }
            frame.data[static_cast<size_t>(i) * res + j] = std::min(1.0, v);
        }
    }
    return frame;
}

SequenceDataset simulate_bouncing_balls(const BouncingBallsConfig& cfg) {
    cfg.validate();
    RandomSource rng(cfg.seed);
    BallSimState s = init_balls(cfg, rng);
    SequenceDataset ds;
    ds.frame_width = cfg.resolution * cfg.resolution;
    ds.range = ValueRange::UnitInterval;
    std::vector<Matrix> frames;
    frames.push_back(render_balls(cfg, s));
    for (int f = 1; f < cfg.frames; ++f) {
        simulate_balls_frame(cfg, s);
        frames.push_back(render_balls(cfg, s));
    }
    ds.sequences.push_back(std::move(frames));
    return ds;
}

// ---- IDX -----------------------------------------------------------------

static uint32_t read_be32(std::istream& in, const char* what) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw std::runtime_error(std::string("idx: truncated while reading ") + what);
    return (uint32_t(b[0]) << 24) | (uint32_t(b[1]) << 16) | (uint32_t(b[2]) << 8) | uint32_t(b[3]);
}

static void write_be32(std::ostream& out, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
    out.write(reinterpret_cast<char*>(b), 4);
}

LabeledImages load_mnist_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream imgs(images_path, std::ios::binary);
    if (!imgs) throw std::runtime_error("idx: cannot open " + images_path);
    const uint32_t img_magic = read_be32(imgs, "image magic");
    if (img_magic != 0x803) {
        throw std::runtime_error("idx: bad image magic 0x" + [&] {
            std::ostringstream os;
            os << std::hex << img_magic;
            return os.str();
        }() + " in " + images_path);
    }
    const uint32_t count = read_be32(imgs, "image count");
    const uint32_t rows = read_be32(imgs, "image rows");
    const uint32_t cols = read_be32(imgs, "image cols");

    LabeledImages store;
    store.image_rows = static_cast<int>(rows);
    store.image_cols = static_cast<int>(cols);
    const size_t npix = static_cast<size_t>(rows) * cols;
    std::vector<unsigned char> buf(npix);
    for (uint32_t i = 0; i < count; ++i) {
        imgs.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(npix));
        if (!imgs) throw std::runtime_error("idx: truncated image payload in " + images_path);
        Matrix m(1, static_cast<int>(npix));
        for (size_t j = 0; j < npix; ++j) m.data[j] = buf[j] / 255.0;
        store.images.push_back(std::move(m));
    }

    std::ifstream labs(labels_path, std::ios::binary);
    if (!labs) throw std::runtime_error("idx: cannot open " + labels_path);
    const uint32_t lab_magic = read_be32(labs, "label magic");
    if (lab_magic != 0x801) {
        throw std::runtime_error("idx: bad label magic 0x" + [&] {
            std::ostringstream os;
            os << std::hex << lab_magic;
            return os.str();
        }() + " in " + labels_path);
    }
    const uint32_t lab_count = read_be32(labs, "label count");
    if (lab_count != count) {
        throw std::runtime_error("idx: image/label count mismatch: " + std::to_string(count) + " vs " +
                                 std::to_string(lab_count));
    }
    for (uint32_t i = 0; i < lab_count; ++i) {
        char c;
        labs.read(&c, 1);
        if (!labs) throw std::runtime_error("idx: truncated label payload in " + labels_path);
        store.labels.push_back(static_cast<unsigned char>(c));
    }
    return store;
}

void write_mnist_idx(const std::string& images_path, const std::string& labels_path,
                     const LabeledImages& store) {
    std::ofstream imgs(images_path, std::ios::binary);
    if (!imgs) throw std::runtime_error("idx: cannot write " + images_path);
    write_be32(imgs, 0x803);
    write_be32(imgs, static_cast<uint32_t>(store.images.size()));
    write_be32(imgs, static_cast<uint32_t>(store.image_rows));
    write_be32(imgs, static_cast<uint32_t>(store.image_cols));
    for (const Matrix& m : store.images) {
        for (double v : m.data) {
            const double c = std::clamp(v, 0.0, 1.0);
            const unsigned char b = static_cast<unsigned char>(std::lround(c * 255.0));
            imgs.write(reinterpret_cast<const char*>(&b), 1);
        }
    }
    std::ofstream labs(labels_path, std::ios::binary);
    if (!labs) throw std::runtime_error("idx: cannot write " + labels_path);
    write_be32(labs, 0x801);
    write_be32(labs, static_cast<uint32_t>(store.labels.size()));
    for (int l : store.labels) {
        const char c = static_cast<char>(l);
        labs.write(&c, 1);
    }
}

SequenceDataset sequence_mnist(const LabeledImages& store, int n_frames, uint64_t epoch_seed) {
    std::vector<std::vector<int>> by_class(10);
    for (size_t i = 0; i < store.labels.size(); ++i) {
        const int l = store.labels[i];
        if (l >= 0 && l < 10) by_class[l].push_back(static_cast<int>(i));
    }
    for (int c = 0; c < 10; ++c) {
        if (by_class[c].empty()) {
            throw std::runtime_error("sequence_mnist: no instances of digit " + std::to_string(c));
        }
    }
    RandomSource rng(epoch_seed);
    SequenceDataset ds;
    ds.frame_width = store.image_rows * store.image_cols;
    ds.range = ValueRange::UnitInterval;
    std::vector<Matrix> frames;
    for (int f = 0; f < n_frames; ++f) {
        const int label = f % 10;
        const auto& pool = by_class[label];
        const int pick = static_cast<int>(rng.next_u64() % pool.size());
        frames.push_back(store.images[pool[pick]]);
    }
    ds.sequences.push_back(std::move(frames));
    return ds;
}

// ---- synthetic digits ----------------------------------------------------

namespace {

struct Seg {
    double x0, y0, x1, y1;
};

// seven-segment layout, coordinates in the unit square (y down)
const Seg kSegs[7] = {
    {0.22, 0.15, 0.78, 0.15},  // A top
    {0.78, 0.15, 0.78, 0.50},  // B upper right
    {0.78, 0.50, 0.78, 0.85},  // C lower right
    {0.22, 0.85, 0.78, 0.85},  // D bottom
    {0.22, 0.50, 0.22, 0.85},  // E lower left
    {0.22, 0.15, 0.22, 0.50},  // F upper left
    {0.22, 0.50, 0.78, 0.50},  // G middle
};

const int kDigitSegs[10] = {
    0b0111111,  // 0: ABCDEF
    0b0000110,  // 1: BC
    0b1011011,  // 2: ABDEG
    0b1001111,  // 3: ABCDG
    0b1100110,  // 4: BCFG
    0b1101101,  // 5: ACDFG
    0b1111101,  // 6: ACDEFG
    0b0000111,  // 7: ABC
    0b1111111,  // 8
    0b1101111,  // 9: ABCDFG
};

double seg_distance(const Seg& s, double x, double y) {
    const double dx = s.x1 - s.x0, dy = s.y1 - s.y0;
    const double len2 = dx * dx + dy * dy;
    double t = len2 > 0 ? ((x - s.x0) * dx + (y - s.y0) * dy) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const double px = s.x0 + t * dx, py = s.y0 + t * dy;
    return std::hypot(x - px, y - py);
}

}  // namespace

LabeledImages make_synthetic_digits(int per_class, int side, uint64_t seed) {
    RandomSource rng(seed);
    LabeledImages store;
    store.image_rows = side;
    store.image_cols = side;
    const double stroke = 0.055;
    for (int inst = 0; inst < per_class; ++inst) {
        for (int digit = 0; digit < 10; ++digit) {
            const double jx = (rng.uniform() - 0.5) * 2.0 / side;  // ~ +-1 px
            const double jy = (rng.uniform() - 0.5) * 2.0 / side;
            const double gain = 0.85 + 0.15 * rng.uniform();
            Matrix img(1, side * side, 0.0);
            for (int i = 0; i < side; ++i) {
                const double y = (i + 0.5) / side - jy;
                for (int j = 0; j < side; ++j) {
                    const double x = (j + 0.5) / side - jx;
                    double v = 0.0;
                    for (int s = 0; s < 7; ++s) {
                        if (!(kDigitSegs[digit] >> s & 1)) continue;
                        const double d = seg_distance(kSegs[s], x, y);
                        v = std::max(v, std::exp(-d * d / (2 * stroke * stroke)));
                    }
                    v = gain * v + 0.04 * rng.normal(0.0, 1.0);
                    img.data[static_cast<size_t>(i) * side + j] = std::clamp(v, 0.0, 1.0);
                }
            }
            store.images.push_back(std::move(img));
            store.labels.push_back(digit);
        }
    }
    return store;
}

// ---- mocap ---------------------------------------------------------------

SequenceDataset load_mocap_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("mocap: cannot open " + path);
    SequenceDataset ds;
    ds.frame_width = kMocapChannels;
    ds.range = ValueRange::Unbounded;
    std::vector<Matrix> frames;
    std::string line;
    int row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        Matrix frame(1, kMocapChannels);
        std::stringstream ss(line);
        std::string cell;
        int col = 0;
        while (std::getline(ss, cell, ',')) {
            if (col >= kMocapChannels) break;
            try {
                size_t pos = 0;
                frame.data[col] = std::stod(cell, &pos);
                if (pos != cell.size()) throw std::invalid_argument(cell);
            } catch (const std::exception&) {
                throw std::runtime_error("mocap: non-numeric cell '" + cell + "' at row " +
                                         std::to_string(row) + " in " + path);
            }
            ++col;
        }
        if (col != kMocapChannels) {
            throw std::runtime_error("mocap: row " + std::to_string(row) + " has " + std::to_string(col) +
                                     " columns, expected " + std::to_string(kMocapChannels));
        }
        frames.push_back(std::move(frame));
    }
    ds.sequences.push_back(std::move(frames));
    return ds;
}

SequenceDataset make_synthetic_mocap(int n_frames, uint64_t seed) {
    RandomSource rng(seed);
    std::vector<double> amp1(kMocapChannels), amp2(kMocapChannels), phase(kMocapChannels),
        offset(kMocapChannels);
    for (int c = 0; c < kMocapChannels; ++c) {
        amp1[c] = 0.5 + 2.5 * rng.uniform();
        amp2[c] = 0.2 + 1.0 * rng.uniform();
        phase[c] = 2.0 * M_PI * rng.uniform();
        offset[c] = -5.0 + 10.0 * rng.uniform();
    }
    SequenceDataset ds;
    ds.frame_width = kMocapChannels;
    ds.range = ValueRange::Unbounded;
    std::vector<Matrix> frames;
    for (int t = 0; t < n_frames; ++t) {
        Matrix frame(1, kMocapChannels);
        for (int c = 0; c < kMocapChannels; ++c) {
            frame.data[c] = offset[c] + amp1[c] * std::sin(0.35 * t + phase[c]) +
                            amp2[c] * std::sin(0.9 * t + 2.0 * phase[c]);
        }
        frames.push_back(std::move(frame));
    }
    ds.sequences.push_back(std::move(frames));
    return ds;
}

void standardize_mocap(SequenceDataset& ds) {
    const int w = ds.frame_width;
    std::vector<double> sum(w, 0.0), sumsq(w, 0.0);
    long n = 0;
    for (const auto& seq : ds.sequences) {
        const long train_len = static_cast<long>(0.8 * seq.size());
        for (long t = 0; t < train_len; ++t) {
            for (int c = 0; c < w; ++c) {
                sum[c] += seq[t].data[c];
                sumsq[c] += seq[t].data[c] * seq[t].data[c];
            }
        }
        n += train_len;
    }
    if (n == 0) throw std::runtime_error("standardize_mocap: empty train portion");
    ds.channel_mean.assign(w, 0.0);
    ds.channel_std.assign(w, 1.0);
    for (int c = 0; c < w; ++c) {
        ds.channel_mean[c] = sum[c] / n;
        const double var = sumsq[c] / n - ds.channel_mean[c] * ds.channel_mean[c];
        ds.channel_std[c] = var > 1e-12 ? std::sqrt(var) : 1.0;
    }
    for (auto& seq : ds.sequences) {
        for (Matrix& frame : seq) {
            for (int c = 0; c < w; ++c) {
                frame.data[c] = (frame.data[c] - ds.channel_mean[c]) / ds.channel_std[c];
            }
        }
    }
}

Matrix destandardize_frame(const SequenceDataset& ds, const Matrix& frame) {
    if (ds.channel_mean.empty()) return frame;
    Matrix out = frame;
    for (int r = 0; r < out.rows; ++r) {
        for (int c = 0; c < out.cols; ++c) {
            out(r, c) = out(r, c) * ds.channel_std[c] + ds.channel_mean[c];
        }
    }
    return out;
}

// ---- split / subsequence -------------------------------------------------

void split_80_20(const SequenceDataset& ds, SequenceDataset& train, SequenceDataset& test) {
    train = SequenceDataset{};
    test = SequenceDataset{};
    train.frame_width = test.frame_width = ds.frame_width;
    train.range = test.range = ds.range;
    train.channel_mean = test.channel_mean = ds.channel_mean;
    train.channel_std = test.channel_std = ds.channel_std;
    for (const auto& seq : ds.sequences) {
        if (seq.size() < 5) {
            throw std::runtime_error("split_80_20: sequence of length " + std::to_string(seq.size()) +
                                     " too short (need >= 5)");
        }
        const size_t cut = static_cast<size_t>(0.8 * seq.size());
        train.sequences.emplace_back(seq.begin(), seq.begin() + cut);
        test.sequences.emplace_back(seq.begin() + cut, seq.end());
    }
}

std::vector<Subsequence> make_subsequences(const SequenceDataset& ds, int len, int stride) {
    if (len < 2) throw std::invalid_argument("make_subsequences: len must be >= 2");
    if (stride < 1) throw std::invalid_argument("make_subsequences: stride must be >= 1");
    std::vector<Subsequence> out;
    for (size_t s = 0; s < ds.sequences.size(); ++s) {
        const int n = static_cast<int>(ds.sequences[s].size());
        for (int start = 0; start + len <= n; start += stride) {
            out.push_back({static_cast<int>(s), start, len});
        }
    }
    return out;
}

std::vector<Matrix> subsequence_frames(const SequenceDataset& ds, const Subsequence& s) {
    const auto& seq = ds.sequences[s.sequence];
    return std::vector<Matrix>(seq.begin() + s.start, seq.begin() + s.start + s.length);
}

// ---- video container -----------------------------------------------------

void write_video_container(const std::string& path, const SequenceDataset& ds, int height, int width) {
    if (height * width != ds.frame_width) {
        throw std::invalid_argument("write_video_container: " + std::to_string(height) + "x" +
                                    std::to_string(width) + " != frame width " +
                                    std::to_string(ds.frame_width));
    }
    const size_t frames = ds.sequences.empty() ? 0 : ds.sequences[0].size();
    for (const auto& seq : ds.sequences) {
        if (seq.size() != frames) {
            throw std::invalid_argument("write_video_container: ragged sequence lengths");
        }
    }
    nlohmann::json header = {{"version", 1},
                             {"n_sequences", ds.sequences.size()},
                             {"frames", frames},
                             {"height", height},
                             {"width", width}};
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << header.dump() << "\n";
    for (const auto& seq : ds.sequences) {
        for (const Matrix& frame : seq) {
            for (double v : frame.data) {
                const float f = static_cast<float>(v);
                out.write(reinterpret_cast<const char*>(&f), sizeof(float));
            }
        }
    }
}

SequenceDataset read_video_container(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::string header_line;
    if (!std::getline(in, header_line)) throw std::runtime_error("video container: missing header in " + path);
    nlohmann::json header = nlohmann::json::parse(header_line);
    if (header.value("version", 0) != 1) {
        throw std::runtime_error("video container: unsupported version in " + path);
    }
    const size_t n_seq = header.at("n_sequences").get<size_t>();
    const size_t frames = header.at("frames").get<size_t>();
    const int height = header.at("height").get<int>();
    const int width = header.at("width").get<int>();
    SequenceDataset ds;
    ds.frame_width = height * width;
    ds.range = ValueRange::UnitInterval;
    for (size_t s = 0; s < n_seq; ++s) {
        std::vector<Matrix> seq;
        for (size_t f = 0; f < frames; ++f) {
            Matrix frame(1, ds.frame_width);
            for (int i = 0; i < ds.frame_width; ++i) {
                float v;
                in.read(reinterpret_cast<char*>(&v), sizeof(float));
                if (!in) throw std::runtime_error("video container: truncated payload in " + path);
                frame.data[i] = v;
            }
            seq.push_back(std::move(frame));
        }
        ds.sequences.push_back(std::move(seq));
    }
    return ds;
}

}  // namespace gsn
