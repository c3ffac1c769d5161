#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <functional>

#include "sgnnx/autodiff.hpp"
#include "sgnnx/rng.hpp"

using namespace sgnnx;
using ad::Tape;

namespace {

// Central finite-difference check of d(loss)/d(input) for a scalar loss
// built as sum(op(input) .* coeffs). The op under test must be the only
// thing between the leaf and the reduction.
void check_gradient(int rows, int cols, std::uint64_t seed,
                    const std::function<Tape::Var(Tape&, Tape::Var)>& op, double h = 1e-5,
                    double tol = 1e-4) {
    Rng rng(seed);
    std::vector<double> x(static_cast<std::size_t>(rows) * cols);
    for (double& v : x) v = rng.uniform(-1.5, 1.5);

    // analytic gradient
    Tape t;
    Tape::Var leaf = t.leaf(rows, cols, x);
    Tape::Var y = op(t, leaf);
    const auto ys = t.shape(y);
    std::vector<double> coeffs(static_cast<std::size_t>(ys.rows) * ys.cols);
    Rng crng(seed ^ 0xC0FFEE);
    for (double& c : coeffs) c = crng.uniform(0.5, 1.5);

    auto weighted_sum = [&](Tape& tape, Tape::Var yy) {
        Tape::Var c = tape.leaf(ys.rows, ys.cols, coeffs);
        // loss = sum_ij y_ij c_ij, assembled from column slices
        if (ys.cols == 1) return tape.row_sum(tape.scale_rows(c, yy));
        Tape::Var acc = -1;
        for (int j = 0; j < ys.cols; ++j) {
            std::vector<double> mask(static_cast<std::size_t>(ys.cols), 0.0);
            mask[j] = 1.0;
            Tape::Var m = tape.leaf(ys.cols, 1, mask);
            Tape::Var ycol = tape.matmul(yy, m);  // r x 1
            Tape::Var ccol = tape.matmul(c, m);   // r x 1
            Tape::Var prod = tape.scale_rows(ycol, ccol);
            Tape::Var s = tape.row_sum(prod);
            acc = acc < 0 ? s : tape.add(acc, s);
        }
        return acc;
    };

    Tape::Var loss = weighted_sum(t, y);
    REQUIRE(t.shape(loss).rows == 1);
    REQUIRE(t.shape(loss).cols == 1);
    t.backward(loss);
    std::vector<double> analytic = t.grad(leaf);

    double num_norm = 0.0, diff_norm = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        auto eval = [&](double delta) {
            std::vector<double> xp = x;
            xp[i] += delta;
            Tape tt;
            Tape::Var l2 = tt.leaf(rows, cols, xp);
            Tape::Var y2 = op(tt, l2);
            Tape::Var loss2 = weighted_sum(tt, y2);
            return tt.scalar_val(loss2);
        };
        double fd = (eval(h) - eval(-h)) / (2.0 * h);
        diff_norm += (fd - analytic[i]) * (fd - analytic[i]);
        num_norm += fd * fd;
    }
    double rel = std::sqrt(diff_norm) / std::max(std::sqrt(num_norm), 1e-8);
    CHECK(rel < tol);
}

} // namespace

TEST_CASE("sigmoid point values") {
    Tape t;
    Tape::Var x = t.leaf(1, 1, {0.0});
    Tape::Var y = t.sigmoid(x);
    CHECK(t.scalar_val(y) == Catch::Approx(0.5));
    t.backward(y);
    CHECK(t.grad(x)[0] == Catch::Approx(0.25));
}

TEST_CASE("matmul identity") {
    Tape t;
    std::vector<double> eye = {1, 0, 0, 0, 1, 0, 0, 0, 1};
    std::vector<double> x = {1, 2, 3, 4, 5, 6};
    Tape::Var i3 = t.leaf(3, 3, eye);
    Tape::Var xv = t.leaf(3, 2, x);
    Tape::Var y = t.matmul(i3, xv);
    CHECK(t.val(y) == x);
}

TEST_CASE("l1 norm value and subgradient sign convention") {
    Tape t;
    Tape::Var x = t.leaf(1, 3, {0.2, -0.3, 0.0});
    Tape::Var y = t.l1_norm(x);
    CHECK(t.scalar_val(y) == Catch::Approx(0.5));
    t.backward(y);
    CHECK(t.grad(x)[0] == 1.0);
    CHECK(t.grad(x)[1] == -1.0);
    CHECK(t.grad(x)[2] == 0.0); // sign(0) = 0
}

TEST_CASE("shape mismatch errors list both shapes") {
    Tape t;
    Tape::Var a = t.leaf(2, 3, std::vector<double>(6, 0.0));
    Tape::Var b = t.leaf(2, 2, std::vector<double>(4, 0.0));
    try {
        t.add(a, b);
        FAIL("expected throw");
    } catch (const std::invalid_argument& e) {
        std::string msg = e.what();
        CHECK(msg.find("[2x3]") != std::string::npos);
        CHECK(msg.find("[2x2]") != std::string::npos);
    }
}

TEST_CASE("straight-through threshold forward and backward") {
    Tape t;
    Tape::Var x = t.leaf(1, 3, {0.7, 0.3, 0.5});
    Tape::Var y = t.straight_through_threshold(x, 0.5);
    CHECK(t.val(y) == std::vector<double>{1.0, 0.0, 0.0}); // tie maps to 0
    Tape::Var loss = t.scalar_mul(t.mean_all(y), 3.0);
    t.backward(loss);
    CHECK(t.grad(x) == std::vector<double>{1.0, 1.0, 1.0});
    CHECK_THROWS_AS(t.straight_through_threshold(x, 1.5), std::invalid_argument);
}

TEST_CASE("diamond graph accumulates gradients from both paths") {
    Tape t;
    Tape::Var x = t.leaf(1, 1, {2.0});
    Tape::Var a = t.scalar_mul(x, 3.0);
    Tape::Var b = t.scalar_mul(x, 4.0);
    Tape::Var y = t.add(a, b);
    t.backward(y);
    CHECK(t.grad(x)[0] == Catch::Approx(7.0));
}

TEST_CASE("softmax cross-entropy decreases as the correct logit grows") {
    double prev = 1e9;
    for (double scale : {0.5, 1.0, 2.0, 4.0}) {
        Tape t;
        Tape::Var z = t.leaf(1, 3, {scale, 0.0, 0.0});
        double l = t.scalar_val(t.softmax_cross_entropy(z, 0));
        CHECK(l < prev);
        prev = l;
    }
}

TEST_CASE("finite-difference gradient checks for every core op") {
    // 20+ random instances per op family (criterion 4)
    for (std::uint64_t s = 0; s < 20; ++s) {
        check_gradient(3, 4, s, [](Tape& t, Tape::Var x) { return t.relu(x); });
        check_gradient(3, 4, s + 100, [](Tape& t, Tape::Var x) { return t.sigmoid(x); });
        check_gradient(3, 4, s + 200, [](Tape& t, Tape::Var x) { return t.scalar_mul(x, -2.5); });
        check_gradient(3, 4, s + 300, [](Tape& t, Tape::Var x) { return t.row_sum(x); });
        check_gradient(3, 4, s + 400, [](Tape& t, Tape::Var x) { return t.row_mean(x); });
        check_gradient(3, 4, s + 500, [s](Tape& t, Tape::Var x) {
            Rng r(s + 1);
            std::vector<double> w(12);
            for (double& v : w) v = r.uniform(-1, 1);
            return t.matmul(x, t.leaf(4, 3, w));
        });
        check_gradient(4, 3, s + 600, [s](Tape& t, Tape::Var x) {
            Rng r(s + 2);
            std::vector<double> w(8);
            for (double& v : w) v = r.uniform(-1, 1);
            return t.matmul(t.leaf(2, 4, w), x);
        });
        check_gradient(3, 4, s + 700, [s](Tape& t, Tape::Var x) {
            Rng r(s + 3);
            std::vector<double> w(12);
            for (double& v : w) v = r.uniform(-1, 1);
            return t.add(x, t.leaf(3, 4, w));
        });
        check_gradient(3, 4, s + 800, [s](Tape& t, Tape::Var x) {
            Rng r(s + 4);
            std::vector<double> w(4);
            for (double& v : w) v = r.uniform(-1, 1);
            return t.add_row(x, t.leaf(1, 4, w));
        });
        check_gradient(3, 4, s + 900, [](Tape& t, Tape::Var x) {
            return t.concat_cols(x, t.scalar_mul(x, 2.0));
        });
        check_gradient(4, 3, s + 1000, [](Tape& t, Tape::Var x) {
            return t.gather_rows(x, {2, 0, 0, 3, 1});
        });
        check_gradient(4, 3, s + 1100, [](Tape& t, Tape::Var x) {
            return t.scatter_add_rows(x, {1, 0, 1, 2}, 3);
        });
        check_gradient(4, 3, s + 1200, [s](Tape& t, Tape::Var x) {
            Rng r(s + 5);
            std::vector<double> w(4);
            for (double& v : w) v = r.uniform(0.2, 1.8);
            return t.scale_rows(x, t.leaf(4, 1, w));
        });
        check_gradient(3, 4, s + 1300, [](Tape& t, Tape::Var x) {
            return t.scale_by_scalar(x, t.scalar(1.7));
        });
        check_gradient(3, 4, s + 1350, [](Tape& t, Tape::Var x) { return t.abs(x); });
        check_gradient(1, 4, s + 1400, [](Tape& t, Tape::Var x) { return t.l1_norm(x); });
        check_gradient(1, 4, s + 1500, [](Tape& t, Tape::Var x) { return t.mean_all(x); });
        check_gradient(1, 5, s + 1600, [](Tape& t, Tape::Var x) {
            return t.softmax_cross_entropy(x, 2);
        });
    }
}

TEST_CASE("adam first step moves against the gradient sign") {
    ad::ParamStore ps;
    ad::Param& p = ps.create("w", 1, 3);
    p.value = {1.0, -2.0, 0.5};
    std::vector<double> before = p.value;

    // zero gradient leaves params unchanged
    ps.adam_step(0.1);
    CHECK(p.value == before);

    ps.reset_adam();
    p.grad = {0.3, -0.7, 0.0};
    double lr = 0.05;
    ps.adam_step(lr);
    // with bias correction the first Adam step is -lr * g/(|g|+eps')
    CHECK(p.value[0] == Catch::Approx(before[0] - lr).epsilon(1e-4));
    CHECK(p.value[1] == Catch::Approx(before[1] + lr).epsilon(1e-4));
    CHECK(p.value[2] == Catch::Approx(before[2]));
}

TEST_CASE("adam is deterministic") {
    auto run = [] {
        ad::ParamStore ps;
        ad::Param& p = ps.create("w", 1, 2);
        p.value = {0.3, -0.4};
        for (int i = 0; i < 5; ++i) {
            p.grad = {0.1 * (i + 1), -0.2};
            ps.adam_step(0.01);
        }
        return p.value;
    };
    CHECK(run() == run());
}

TEST_CASE("param gradients accumulate across independent tapes") {
    ad::ParamStore ps;
    ad::Param& p = ps.create("w", 1, 1);
    p.value = {2.0};
    for (int i = 0; i < 2; ++i) {
        Tape t;
        Tape::Var w = t.param(p);
        Tape::Var loss = t.scalar_mul(w, 3.0);
        t.backward(loss);
    }
    CHECK(p.grad[0] == Catch::Approx(6.0));
}
