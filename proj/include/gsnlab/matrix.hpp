#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace gsn {

struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Dense row-major matrix of doubles. The universal value carrier for
// activations, weights, and frames.
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(int r, int c, double fill = 0.0) : rows(r), cols(c), data(static_cast<size_t>(r) * c, fill) {}

    double& operator()(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
    double operator()(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }

    int size() const { return rows * cols; }
    bool empty() const { return rows == 0 || cols == 0; }
    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }

    std::string shape_str() const;
};

std::string shape_pair(const Matrix& a, const Matrix& b);

// Throws ShapeError naming both shapes on mismatch.
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& m);

Matrix add(const Matrix& a, const Matrix& b);
Matrix sub(const Matrix& a, const Matrix& b);
Matrix hadamard(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& m, double s);
void add_in_place(Matrix& a, const Matrix& b);
void axpy_in_place(Matrix& y, double alpha, const Matrix& x);  // y += alpha*x

// Broadcast a 1xC bias row over every row of m.
Matrix add_row_bias(const Matrix& m, const Matrix& bias);
Matrix col_sums(const Matrix& m);  // 1 x cols

// Horizontal concatenation (same row counts).
Matrix hcat(const std::vector<const Matrix*>& parts);
Matrix hslice(const Matrix& m, int col_begin, int col_end);

double l2_norm(const Matrix& m);
double dot(const Matrix& a, const Matrix& b);
double max_abs_diff(const Matrix& a, const Matrix& b);
bool all_finite(const Matrix& m);

enum class Act { Sigmoid, Tanh, Identity };

Act act_from_string(const std::string& s);
std::string act_to_string(Act a);

Matrix activate(const Matrix& m, Act kind);
// Derivative expressed through the activation output y = act(x).
Matrix activate_grad_from_output(const Matrix& y, Act kind);

}  // namespace gsn
