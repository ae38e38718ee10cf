#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "gsnlab/matrix.hpp"
#include "gsnlab/random.hpp"

using namespace gsn;

namespace {

// deliberately naive triple loop, kept independent of the library routine
Matrix naive_matmul(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows, b.cols, 0.0);
    for (int i = 0; i < a.rows; ++i) {
        for (int j = 0; j < b.cols; ++j) {
            double s = 0.0;
            for (int k = 0; k < a.cols; ++k) s += a(i, k) * b(k, j);
            out(i, j) = s;
        }
    }
    return out;
}

}  // namespace

TEST_CASE("matmul by identity returns the operand") {
    RandomSource rng(11);
    Matrix m = uniform_matrix(3, 3, -2.0, 2.0, rng);
    Matrix eye(3, 3, 0.0);
    for (int i = 0; i < 3; ++i) eye(i, i) = 1.0;
    Matrix out = matmul(eye, m);
    CHECK(max_abs_diff(out, m) == 0.0);
}

TEST_CASE("matmul matches hand-checked 2x2 by 2x1") {
    Matrix a(2, 2);
    a(0, 0) = 1;
    a(0, 1) = 2;
    a(1, 0) = 3;
    a(1, 1) = 4;
    Matrix b(2, 1);
    b(0, 0) = 0;
    b(1, 0) = 1;
    Matrix out = matmul(a, b);
    CHECK(out(0, 0) == 2.0);
    CHECK(out(1, 0) == 4.0);
}

TEST_CASE("matmul equals a naive triple-loop on random 7x5 by 5x3") {
    RandomSource rng(42);
    Matrix a = uniform_matrix(7, 5, -1.0, 1.0, rng);
    Matrix b = uniform_matrix(5, 3, -1.0, 1.0, rng);
    CHECK(max_abs_diff(matmul(a, b), naive_matmul(a, b)) == 0.0);
}

TEST_CASE("matmul is associative within 1e-10 on 10x10 doubles") {
    RandomSource rng(7);
    Matrix a = uniform_matrix(10, 10, -1.0, 1.0, rng);
    Matrix b = uniform_matrix(10, 10, -1.0, 1.0, rng);
    Matrix c = uniform_matrix(10, 10, -1.0, 1.0, rng);
    CHECK(max_abs_diff(matmul(matmul(a, b), c), matmul(a, matmul(b, c))) < 1e-10);
}

TEST_CASE("matmul rejects mismatched shapes naming both") {
    Matrix a(2, 3), b(4, 2);
    CHECK_THROWS_WITH_AS(matmul(a, b), doctest::Contains("2x3"), ShapeError);
}

TEST_CASE("activation point values and ranges") {
    Matrix z(1, 1, 0.0);
    CHECK(activate(z, Act::Sigmoid)(0, 0) == 0.5);
    CHECK(activate(z, Act::Tanh)(0, 0) == 0.0);
    CHECK(activate(z, Act::Identity)(0, 0) == 0.0);

    RandomSource rng(3);
    Matrix x = uniform_matrix(4, 4, -6.0, 6.0, rng);
    Matrix s = activate(x, Act::Sigmoid);
    Matrix t = activate(x, Act::Tanh);
    for (int i = 0; i < x.size(); ++i) {
        CHECK(s.data[i] > 0.0);
        CHECK(s.data[i] < 1.0);
        CHECK(t.data[i] > -1.0);
        CHECK(t.data[i] < 1.0);
    }
}

TEST_CASE("sigmoid symmetry: s(x) + s(-x) = 1") {
    RandomSource rng(5);
    Matrix x = uniform_matrix(8, 8, -5.0, 5.0, rng);
    Matrix s1 = activate(x, Act::Sigmoid);
    Matrix s2 = activate(scale(x, -1.0), Act::Sigmoid);
    for (int i = 0; i < x.size(); ++i) {
        CHECK(s1.data[i] + s2.data[i] == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("elementwise helpers stay finite and exact") {
    RandomSource rng(9);
    Matrix a = uniform_matrix(5, 6, -3.0, 3.0, rng);
    Matrix b = uniform_matrix(5, 6, -3.0, 3.0, rng);
    CHECK(all_finite(add(a, b)));
    CHECK(all_finite(hadamard(a, b)));
    CHECK(max_abs_diff(sub(add(a, b), b), a) < 1e-15);
    Matrix t = transpose(transpose(a));
    CHECK(max_abs_diff(t, a) == 0.0);
}

TEST_CASE("hcat then hslice round-trips") {
    RandomSource rng(13);
    Matrix a = uniform_matrix(3, 2, 0.0, 1.0, rng);
    Matrix b = uniform_matrix(3, 4, 0.0, 1.0, rng);
    Matrix cat = hcat({&a, &b});
    CHECK(cat.cols == 6);
    CHECK(max_abs_diff(hslice(cat, 0, 2), a) == 0.0);
    CHECK(max_abs_diff(hslice(cat, 2, 6), b) == 0.0);
}

TEST_CASE("row bias broadcast and column sums") {
    Matrix m(2, 3, 1.0);
    Matrix bias(1, 3);
    bias(0, 0) = 1;
    bias(0, 1) = 2;
    bias(0, 2) = 3;
    Matrix out = add_row_bias(m, bias);
    CHECK(out(0, 0) == 2.0);
    CHECK(out(1, 2) == 4.0);
    Matrix cs = col_sums(out);
    CHECK(cs(0, 0) == 4.0);
    CHECK(cs(0, 2) == 8.0);
}
