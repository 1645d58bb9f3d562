#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dlm/meta.hpp"
#include "oracles.hpp"

using namespace dlm;
using namespace dlm::testing;

namespace {

LossValue make_loss(double total, size_t m) {
    LossValue l;
    l.total = total;
    l.per_token.assign(m, total / static_cast<double>(m));
    return l;
}

MetaParams flat_meta() {
    MetaParams m = init_meta(1, false);
    m.b = {0.0, 0.0, 0.0};
    return m;
}

}  // namespace

TEST_CASE("gradient preprocessing") {
    ParamVector theta{1.0, -2.0, 0.5};
    ParamVector anchor{0.0, 0.0, 0.0};

    SUBCASE("zero gradient maps to zero") {
        ParamVector g{0.0, 0.0, 0.0};
        auto f = preprocess_features(theta, make_loss(1.0, 4), g, anchor);
        for (double x : f.grad_pre) CHECK(x == 0.0);
    }
    SUBCASE("tau*(e-1) maps to exactly one") {
        ParamVector g{kGradPreprocTau * (std::exp(1.0) - 1.0), 0.0, 0.0};
        auto f = preprocess_features(theta, make_loss(1.0, 4), g, anchor);
        CHECK(f.grad_pre[0] == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("odd symmetry") {
        ParamVector g{0.37, -1.4, 2e-5};
        ParamVector gn{-0.37, 1.4, -2e-5};
        auto fp = preprocess_features(theta, make_loss(1.0, 4), g, anchor);
        auto fn = preprocess_features(theta, make_loss(1.0, 4), gn, anchor);
        for (size_t j = 0; j < 3; ++j) CHECK(fp.grad_pre[j] == -fn.grad_pre[j]);
    }
    SUBCASE("loss channel is log(1 + L/M)") {
        ParamVector g{0.0, 0.0, 0.0};
        auto f = preprocess_features(theta, make_loss(6.0, 3), g, anchor);
        CHECK(f.loss_feat == doctest::Approx(std::log(3.0)).epsilon(1e-14));
    }
    SUBCASE("non-finite input rejected") {
        ParamVector g{std::nan(""), 0.0, 0.0};
        CHECK_THROWS_WITH(preprocess_features(theta, make_loss(1.0, 4), g, anchor),
                          "non-finite feature");
    }
}

TEST_CASE("compute_gates constant cases") {
    MetaParams m = flat_meta();
    CoordFeatures feats;
    feats.theta_prev = {0.1, -0.2, 3.0};
    feats.grad_pre = {1.0, -1.0, 0.0};
    feats.anchor = {0.0, 0.5, -0.5};
    feats.loss_feat = 0.7;
    std::vector<uint8_t> groups(3, 0);

    SUBCASE("zero weights and biases give 0.5 everywhere") {
        for (auto& row : m.w) row.fill(0.0);
        auto g = compute_gates(m, feats, groups);
        for (size_t j = 0; j < 3; ++j) {
            CHECK(g.f[j] == 0.5);
            CHECK(g.i[j] == 0.5);
            CHECK(g.z[j] == 0.5);
        }
    }
    SUBCASE("bias-only map is constant across coordinates") {
        m.b = {1.5, -0.5, 0.25};
        auto g = compute_gates(m, feats, groups);
        auto sig = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };
        for (size_t j = 0; j < 3; ++j) {
            CHECK(g.f[j] == sig(1.5));
            CHECK(g.i[j] == sig(-0.5));
            CHECK(g.z[j] == sig(0.25));
        }
    }
}

TEST_CASE("coordinate-sharing equivariance under permutation") {
    std::mt19937_64 rng(5);
    const size_t n = 64;
    MetaParams m = init_meta(1);
    for (auto& row : m.w)
        for (auto& x : row) x = 2.0 * unit_draw(rng) - 1.0;
    m.b = {0.3, -0.2, 0.1};
    m.group_bias = {0.0, 0.0, 0.0};

    CoordFeatures feats;
    feats.theta_prev.resize(n);
    feats.grad_pre.resize(n);
    feats.anchor.resize(n);
    for (size_t j = 0; j < n; ++j) {
        feats.theta_prev[j] = 2.0 * unit_draw(rng) - 1.0;
        feats.grad_pre[j] = 2.0 * unit_draw(rng) - 1.0;
        feats.anchor[j] = 2.0 * unit_draw(rng) - 1.0;
    }
    feats.loss_feat = 0.9;
    std::vector<uint8_t> groups(n, 0);

    std::vector<size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);

    CoordFeatures pf;
    pf.loss_feat = feats.loss_feat;
    pf.theta_prev.resize(n);
    pf.grad_pre.resize(n);
    pf.anchor.resize(n);
    for (size_t j = 0; j < n; ++j) {
        pf.theta_prev[j] = feats.theta_prev[perm[j]];
        pf.grad_pre[j] = feats.grad_pre[perm[j]];
        pf.anchor[j] = feats.anchor[perm[j]];
    }

    auto g = compute_gates(m, feats, groups);
    auto gp = compute_gates(m, pf, groups);
    for (size_t j = 0; j < n; ++j) {
        CHECK(gp.f[j] == g.f[perm[j]]);
        CHECK(gp.i[j] == g.i[perm[j]]);
        CHECK(gp.z[j] == g.z[perm[j]]);
    }
}

TEST_CASE("gates stay inside the open unit interval") {
    std::mt19937_64 rng(6);
    MetaParams m = init_meta(1);
    // magnitudes kept below sigmoid's double-precision saturation point
    for (auto& row : m.w)
        for (auto& x : row) x = 2.0 * (2.0 * unit_draw(rng) - 1.0);
    CoordFeatures feats;
    for (size_t j = 0; j < 32; ++j) {
        feats.theta_prev.push_back(2.0 * (2.0 * unit_draw(rng) - 1.0));
        feats.grad_pre.push_back(2.0 * (2.0 * unit_draw(rng) - 1.0));
        feats.anchor.push_back(2.0 * (2.0 * unit_draw(rng) - 1.0));
    }
    feats.loss_feat = 2.0;
    auto g = compute_gates(m, feats, std::vector<uint8_t>(32, 0));
    for (size_t j = 0; j < 32; ++j) {
        CHECK(g.f[j] > 0.0); CHECK(g.f[j] < 1.0);
        CHECK(g.i[j] > 0.0); CHECK(g.i[j] < 1.0);
        CHECK(g.z[j] > 0.0); CHECK(g.z[j] < 1.0);
    }
}

TEST_CASE("apply_update identity cases") {
    MetaParams m = init_meta(1);
    ParamVector prev{2.0, -1.0}, grad{0.5, 0.5}, anchor{0.0, 4.0};

    SUBCASE("pure COPY") {
        GateTriple g{{1.0, 1.0}, {0.0, 0.0}, {0.0, 0.0}};
        CHECK(apply_update(prev, g, grad, anchor, m) == prev);
    }
    SUBCASE("pure FLUSH") {
        GateTriple g{{0.0, 0.0}, {0.0, 0.0}, {1.0, 1.0}};
        CHECK(apply_update(prev, g, grad, anchor, m) == anchor);
    }
    SUBCASE("hand-evaluated mixed update") {
        GateTriple g{{0.5, 0.5}, {0.2, 0.2}, {0.1, 0.5}};
        auto out = apply_update(prev, g, grad, anchor, m);
        CHECK(out[0] == doctest::Approx(1.1).epsilon(1e-15));
        CHECK(out[1] == doctest::Approx(1.6).epsilon(1e-15));
    }
    SUBCASE("negated gradient channel") {
        m.negate_grad_channel = true;
        GateTriple g{{0.0, 0.0}, {1.0, 1.0}, {0.0, 0.0}};
        auto out = apply_update(prev, g, grad, anchor, m);
        CHECK(out[0] == -0.5);
        CHECK(out[1] == -0.5);
    }
    SUBCASE("flush disabled drops the anchor term") {
        m.use_flush = false;
        GateTriple g{{0.0, 0.0}, {0.0, 0.0}, {1.0, 1.0}};
        auto out = apply_update(prev, g, grad, anchor, m);
        CHECK(out == ParamVector{0.0, 0.0});
    }
}

TEST_CASE("update output is bounded by the triangle bound") {
    std::mt19937_64 rng(9);
    MetaParams m = init_meta(1);
    const size_t n = 100;
    ParamVector prev(n), grad(n), anchor(n);
    GateTriple g;
    g.f.resize(n); g.i.resize(n); g.z.resize(n);
    for (size_t j = 0; j < n; ++j) {
        prev[j] = 4.0 * (2.0 * unit_draw(rng) - 1.0);
        grad[j] = 4.0 * (2.0 * unit_draw(rng) - 1.0);
        anchor[j] = 4.0 * (2.0 * unit_draw(rng) - 1.0);
        g.f[j] = unit_draw(rng);
        g.i[j] = unit_draw(rng);
        g.z[j] = unit_draw(rng);
    }
    auto out = apply_update(prev, g, grad, anchor, m);
    for (size_t j = 0; j < n; ++j)
        CHECK(std::abs(out[j]) <= std::abs(prev[j]) + std::abs(grad[j]) + std::abs(anchor[j]) + 1e-15);
}

TEST_CASE("dynamic_eval_step") {
    SUBCASE("alpha zero is the identity") {
        ParamVector p{1.0, -2.0, 3.0}, g{9.0, 9.0, 9.0};
        CHECK(dynamic_eval_step(p, g, 0.0) == p);
    }
    SUBCASE("direct arithmetic") {
        ParamVector p{1.0, 1.0}, g{2.0, -2.0};
        auto out = dynamic_eval_step(p, g, 0.1);
        CHECK(out[0] == doctest::Approx(0.8).epsilon(1e-15));
        CHECK(out[1] == doctest::Approx(1.2).epsilon(1e-15));
    }
    SUBCASE("contracts a quadratic bowl by 1 - alpha per step") {
        // loss 0.5*||theta||^2 has gradient theta
        ParamVector p{3.0, -4.0};
        double norm0 = 5.0;
        for (int s = 0; s < 10; ++s) p = dynamic_eval_step(p, p, 0.1);
        double norm = std::sqrt(p[0] * p[0] + p[1] * p[1]);
        CHECK(norm == doctest::Approx(norm0 * std::pow(0.9, 10)).epsilon(1e-12));
    }
}
