#include "gsnlab/matrix.hpp"

#include <cmath>

namespace gsn {

std::string Matrix::shape_str() const {
    return std::to_string(rows) + "x" + std::to_string(cols);
}

std::string shape_pair(const Matrix& a, const Matrix& b) {
    return a.shape_str() + " vs " + b.shape_str();
}

static void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
    if (!a.same_shape(b)) {
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_pair(a, b));
    }
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols != b.rows) {
        throw ShapeError("matmul: inner dimension mismatch " + shape_pair(a, b));
    }
    Matrix out(a.rows, b.cols, 0.0);
    const int n = a.rows, k = a.cols, m = b.cols;
    for (int i = 0; i < n; ++i) {
        const double* arow = &a.data[static_cast<size_t>(i) * k];
        double* orow = &out.data[static_cast<size_t>(i) * m];
        for (int p = 0; p < k; ++p) {
            const double av = arow[p];
            if (av == 0.0) continue;
            const double* brow = &b.data[static_cast<size_t>(p) * m];
            for (int j = 0; j < m; ++j) {
                orow[j] += av * brow[j];
            }
        }
    }
    return out;
}

Matrix transpose(const Matrix& m) {
    Matrix out(m.cols, m.rows);
    for (int i = 0; i < m.rows; ++i) {
        for (int j = 0; j < m.cols; ++j) {
            out(j, i) = m(i, j);
        }
    }
    return out;
}

Matrix add(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "add");
    Matrix out = a;
    for (int i = 0; i < out.size(); ++i) out.data[i] += b.data[i];
    return out;
}

Matrix sub(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "sub");
    Matrix out = a;
    for (int i = 0; i < out.size(); ++i) out.data[i] -= b.data[i];
    return out;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "hadamard");
    Matrix out = a;
    for (int i = 0; i < out.size(); ++i) out.data[i] *= b.data[i];
    return out;
}

Matrix scale(const Matrix& m, double s) {
    Matrix out = m;
    for (double& v : out.data) v *= s;
    return out;
}

void add_in_place(Matrix& a, const Matrix& b) {
    if (a.empty()) {
        a = b;
        return;
    }
    require_same_shape(a, b, "add_in_place");
    for (int i = 0; i < a.size(); ++i) a.data[i] += b.data[i];
}

void axpy_in_place(Matrix& y, double alpha, const Matrix& x) {
    require_same_shape(y, x, "axpy");
    for (int i = 0; i < y.size(); ++i) y.data[i] += alpha * x.data[i];
}

Matrix add_row_bias(const Matrix& m, const Matrix& bias) {
    if (bias.rows != 1 || bias.cols != m.cols) {
        throw ShapeError("add_row_bias: bias " + bias.shape_str() + " incompatible with " + m.shape_str());
    }
    Matrix out = m;
    for (int i = 0; i < m.rows; ++i) {
        for (int j = 0; j < m.cols; ++j) {
            out(i, j) += bias.data[j];
        }
    }
    return out;
}

Matrix col_sums(const Matrix& m) {
    Matrix out(1, m.cols, 0.0);
    for (int i = 0; i < m.rows; ++i) {
        for (int j = 0; j < m.cols; ++j) {
            out.data[j] += m(i, j);
        }
    }
    return out;
}

Matrix hcat(const std::vector<const Matrix*>& parts) {
    if (parts.empty()) return Matrix();
    int rows = parts[0]->rows;
    int cols = 0;
    for (const Matrix* p : parts) {
        if (p->rows != rows) {
            throw ShapeError("hcat: row mismatch " + shape_pair(*parts[0], *p));
        }
        cols += p->cols;
    }
    Matrix out(rows, cols);
    int off = 0;
    for (const Matrix* p : parts) {
        for (int i = 0; i < rows; ++i) {
            for (int j = 0; j < p->cols; ++j) {
                out(i, off + j) = (*p)(i, j);
            }
        }
        off += p->cols;
    }
    return out;
}

Matrix hslice(const Matrix& m, int col_begin, int col_end) {
    Matrix out(m.rows, col_end - col_begin);
    for (int i = 0; i < m.rows; ++i) {
        for (int j = col_begin; j < col_end; ++j) {
            out(i, j - col_begin) = m(i, j);
        }
    }
    return out;
}

double l2_norm(const Matrix& m) {
    double s = 0.0;
    for (double v : m.data) s += v * v;
    return std::sqrt(s);
}

double dot(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "dot");
    double s = 0.0;
    for (int i = 0; i < a.size(); ++i) s += a.data[i] * b.data[i];
    return s;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "max_abs_diff");
    double m = 0.0;
    for (int i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a.data[i] - b.data[i]));
    return m;
}

bool all_finite(const Matrix& m) {
    for (double v : m.data) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

Act act_from_string(const std::string& s) {
    if (s == "sigmoid") return Act::Sigmoid;
    if (s == "tanh") return Act::Tanh;
    if (s == "identity") return Act::Identity;
    throw std::invalid_argument("unknown activation: " + s);
}

std::string act_to_string(Act a) {
    switch (a) {
        case Act::Sigmoid: return "sigmoid";
        case Act::Tanh: return "tanh";
        default: return "identity";
    }
}

Matrix activate(const Matrix& m, Act kind) {
    if (kind == Act::Identity) return m;
    Matrix out = m;
    if (kind == Act::Sigmoid) {
        for (double& v : out.data) v = 1.0 / (1.0 + std::exp(-v));
    } else {
        for (double& v : out.data) v = std::tanh(v);
    }
    return out;
}

Matrix activate_grad_from_output(const Matrix& y, Act kind) {
    Matrix out(y.rows, y.cols, 1.0);
    if (kind == Act::Sigmoid) {
        for (int i = 0; i < y.size(); ++i) out.data[i] = y.data[i] * (1.0 - y.data[i]);
    } else if (kind == Act::Tanh) {
        for (int i = 0; i < y.size(); ++i) out.data[i] = 1.0 - y.data[i] * y.data[i];
    }
    return out;
}

}  // namespace gsn
