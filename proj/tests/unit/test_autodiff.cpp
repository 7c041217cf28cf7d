#include <doctest.h>

#include <cmath>
#include <functional>

#include "hierrec/autodiff.hpp"
#include "hierrec/errors.hpp"
#include "hierrec/optim.hpp"
#include "hierrec/rng.hpp"

using namespace hierrec;
using ad::Matrix;

namespace {

// Compares analytic gradients of a scalar graph against central differences.
void check_gradients(ad::ParamStore& params, const std::function<ad::Var(ad::Tape&)>& build,
                     double tol = 1e-6) {
    ad::Gradients g(params);
    {
        ad::Tape tape(params, &g);
        tape.backward(build(tape));
    }
    auto eval = [&] {
        ad::Tape tape(params, nullptr);
        return tape.scalar(build(tape));
    };
    const double h = 1e-5;
    for (std::size_t p = 0; p < params.size(); ++p) {
        Matrix& v = params.value(ad::ParamId{p});
        for (Eigen::Index i = 0; i < v.size(); ++i) {
            const double keep = v.data()[i];
            v.data()[i] = keep + h;
            const double up = eval();
            v.data()[i] = keep - h;
            const double down = eval();
            v.data()[i] = keep;
            const double numeric = (up - down) / (2 * h);
            const double analytic = g[ad::ParamId{p}].data()[i];
            INFO("param " << params.name(ad::ParamId{p}) << " entry " << i);
            REQUIRE(std::abs(numeric - analytic) <= tol * std::max(1.0, std::abs(numeric)));
        }
    }
}

}  // namespace

TEST_CASE("elementwise and linear ops match finite differences") {
    Rng rng(1);
    ad::ParamStore ps;
    const auto w = ps.add_uniform("w", 4, 3, 3, rng);
    const auto x = ps.add_uniform("x", 3, 2, 3, rng);
    const auto b = ps.add_uniform("b", 4, 1, 1, rng);
    const auto u = ps.add_uniform("u", 4, 2, 1, rng);
    check_gradients(ps, [&](ad::Tape& t) {
        auto y = t.affine(t.param(w), t.param(x), t.param(b));
        auto z = t.mul(t.tanh(y), t.sigmoid(t.param(u)));
        auto s = t.add(z, t.scale(t.matmul(t.param(w), t.param(x)), 0.5));
        auto m = t.mean_cols(s);
        return t.pick(t.log_softmax(m), 2);
    });
}

TEST_CASE("attention-style ops match finite differences") {
    Rng rng(2);
    ad::ParamStore ps;
    const auto q = ps.add_uniform("q", 3, 4, 1, rng);
    const auto k = ps.add_uniform("k", 3, 4, 1, rng);
    const auto e = ps.add_uniform("e", 5, 6, 1, rng);
    check_gradients(ps, [&](ad::Tape& t) {
        auto a = t.softmax_cols(t.matmul_tn(t.param(k), t.param(q)));  // 4x4
        auto g = t.gather_cols(t.param(e), {4, 0, 2, 0});               // 5x4
        auto c = t.concat_rows({t.matmul(g, a), t.slice_rows(g, 1, 2)});
        auto v = t.mean_cols(c);
        return t.weighted_sum({t.pick(v, 0), t.pick(v, 6), t.pick(v, 3)}, {1.0, -2.0, 0.5});
    });
}

TEST_CASE("lstm cell and bce match finite differences") {
    Rng rng(3);
    ad::ParamStore ps;
    const auto w = ps.add_uniform("w", 4 * 3, 2 + 3, 5, rng);
    const auto b = ps.add_uniform("b", 4 * 3, 1, 5, rng);
    const auto x = ps.add_uniform("x", 2, 1, 1, rng);
    const auto r = ps.add_uniform("r", 1, 3, 1, rng);
    check_gradients(ps, [&](ad::Tape& t) {
        auto h = t.constant(Matrix::Zero(3, 1));
        auto c = t.constant(Matrix::Zero(3, 1));
        for (int step = 0; step < 3; ++step) std::tie(h, c) = ad::lstm_cell(t, t.param(w), t.param(b), t.param(x), h, c);
        auto p = t.sigmoid(t.matmul(t.param(r), h));
        return t.add(t.bce(p, 1.0), t.bce(t.sigmoid(t.pick(c, 1)), 0.0));
    });
}

TEST_CASE("tape lstm matches the plain lstm") {
    Rng rng(4);
    ad::ParamStore ps;
    const auto w = ps.add_uniform("w", 8, 5, 5, rng);
    const auto b = ps.add_uniform("b", 8, 1, 5, rng);
    ad::Vector x = ad::Vector::Random(3);
    ad::Vector h = ad::Vector::Zero(2), c = ad::Vector::Zero(2);
    ad::Tape tape(ps, nullptr);
    auto th = tape.constant(h), tc = tape.constant(c);
    for (int i = 0; i < 4; ++i) {
        std::tie(h, c) = ad::lstm_cell(ps.value(w), ps.value(b), x, h, c);
        std::tie(th, tc) = ad::lstm_cell(tape, tape.param(w), tape.param(b), tape.constant(x), th, tc);
    }
    CHECK((tape.value(th) - h).norm() < 1e-14);
    CHECK((tape.value(tc) - c).norm() < 1e-14);
}

TEST_CASE("bce clamps extreme probabilities") {
    ad::ParamStore ps;
    ad::Tape t(ps, nullptr);
    CHECK(t.scalar(t.bce(t.scalar_constant(1.0), 1.0)) <= 1e-6);
    CHECK(t.scalar(t.bce(t.scalar_constant(0.0), 1.0)) == doctest::Approx(-std::log(1e-7)));
    CHECK(t.scalar(t.bce(t.scalar_constant(0.5), 1.0)) == doctest::Approx(0.6931471805599453));
}

TEST_CASE("shape mismatches throw") {
    ad::ParamStore ps;
    ad::Tape t(ps, nullptr);
    auto a = t.constant(Matrix::Zero(2, 1));
    auto b = t.constant(Matrix::Zero(3, 1));
    CHECK_THROWS_AS(t.add(a, b), DimensionMismatch);
    CHECK_THROWS_AS(t.matmul(a, b), DimensionMismatch);
    ad::Gradients g(ps);
    ad::Tape tg(ps, &g);
    CHECK_THROWS_AS(tg.backward(tg.constant(Matrix::Zero(2, 1))), DimensionMismatch);
    CHECK_THROWS(t.backward(t.scalar_constant(1.0)));
}

TEST_CASE("Adam first step moves each weight by lr against the gradient sign") {
    ad::ParamStore ps;
    const auto p = ps.add("p", (Matrix(1, 3) << 1.0, -2.0, 0.5).finished());
    const auto frozen = ps.add("f", Matrix::Constant(1, 1, 3.0));
    ps.set_trainable(frozen, false);
    ad::Gradients g(ps);
    g[p] << 0.3, -4.0, 0.0;
    g[frozen](0, 0) = 1.0;
    Adam adam(ps, AdamConfig{0.1});
    adam.step(ps, g);
    // m̂ = g, v̂ = g², update = lr·g/(|g| + eps).
    CHECK(ps.value(p)(0, 0) == doctest::Approx(0.9).epsilon(1e-7));
    CHECK(ps.value(p)(0, 1) == doctest::Approx(-1.9).epsilon(1e-7));
    CHECK(ps.value(p)(0, 2) == 0.5);
    CHECK(ps.value(frozen)(0, 0) == 3.0);
}

TEST_CASE("global norm clipping") {
    ad::ParamStore ps;
    const auto p = ps.add_zeros("p", 2, 1);
    ad::Gradients g(ps);
    g[p] << 3.0, 4.0;
    CHECK(clip_global_norm(g, 10.0) == doctest::Approx(5.0));
    CHECK(g.norm() == doctest::Approx(5.0));
    clip_global_norm(g, 1.0);
    CHECK(g.norm() == doctest::Approx(1.0));
    CHECK(g[p](0, 0) == doctest::Approx(0.6));
}
