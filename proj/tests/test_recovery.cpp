#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "spv/model.hpp"
#include "spv/recovery.hpp"
#include "spv/rng.hpp"

using namespace spv;

TEST_CASE("recovery score: sign alignment, exactness, degenerate flags") {
    Rng rng(2);
    const Eigen::VectorXd x = sample_br_vector(30, 0.5, rng);
    const auto same = recovery_score(x, x, 0.5);
    CHECK(same.correlation == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(same.exact);
    const auto flipped = recovery_score(-x, x, 0.5);
    CHECK(flipped.correlation == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(flipped.exact);
    // orthogonal estimate: near-zero correlation, not exact
    Eigen::VectorXd y = Eigen::VectorXd::Zero(30);
    int i0 = -1, i1 = -1;
    for (int i = 0; i < 30 && i1 < 0; ++i)
        if (x[i] != 0.0) (i0 < 0 ? i0 : i1) = i;
    y[i0] = x[i1];
    y[i1] = -x[i0];
    const auto orth = recovery_score(y, x, 0.5);
    CHECK(orth.correlation < 1e-12);
    CHECK(!orth.exact);
    const auto degen = recovery_score(Eigen::VectorXd::Zero(30), x, 0.5);
    CHECK(degen.degenerate_score);
}

TEST_CASE("lattice recovery: d=1 is the sign-read-off case") {
    for (uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
        const ModelParams p{1, 4, 1.0, 0.0};
        const auto inst = generate_model1(p, seed);
        const auto rec = recover_lll(inst.blind(), 1.0, 40, 120, 0.0);
        REQUIRE(rec.found);
        const auto score = recovery_score(rec.estimate, inst.x, 1.0);
        CHECK(score.exact);
    }
}

TEST_CASE("lattice recovery at the calibrated desk point, with in-span certificate") {
    int exact = 0;
    const int trials = 6;  // fast subset; the full 20-trial run lives in acceptance
    for (int t = 0; t < trials; ++t) {
        const ModelParams p{12, 25, 0.5, 0.0};
        const auto inst = generate_model1(p, 7000 + t);
        const auto rec = recover_lll(inst.blind(), 0.5, 60, 120, 0.0);
        if (!rec.found) continue;
        const auto score = recovery_score(rec.estimate, inst.x, 0.5);
        if (score.exact) {
            ++exact;
            CHECK(rec.in_span_residual <= std::ldexp(1.0, -30));
            CHECK(score.correlation == doctest::Approx(1.0).epsilon(1e-9));
        }
    }
    CHECK(exact >= 5);
}

TEST_CASE("lattice recovery parameter errors") {
    const ModelParams p{4, 8, 1.0, 0.0};
    const auto inst = generate_model1(p, 3);
    CHECK_THROWS_AS(recover_lll(inst.blind().topRows(4), 1.0, 60, 120, 0.0),
                    std::invalid_argument);  // n <= d
    CHECK_THROWS_AS(recover_lll(inst.blind(), 1.0, 60, 10, 1e-2), std::invalid_argument);
    CHECK_NOTHROW(recover_lll(inst.blind(), 1.0, 60, 6, 1e-2));  // 2^-6 covers 1e-2
}

TEST_CASE("spectral recovery across the rho regimes") {
    // rho = 1 (planted eigenvalue is the bottom outlier)
    int good = 0;
    for (int t = 0; t < 4; ++t) {
        const ModelParams p{20, 6000, 1.0, 0.0};
        const auto inst = generate_model2(p, 400 + t);
        const auto rec = recover_spectral(inst.blind(), 1.0);
        const auto score = recovery_score(rec.estimate, inst.x, 1.0);
        good += score.correlation >= 0.9;
    }
    CHECK(good >= 3);
    // rho small (top outlier)
    const ModelParams p{15, 4000, 0.2, 0.0};
    const auto inst = generate_model2(p, 11);
    const auto rec = recover_spectral(inst.blind(), 0.2);
    CHECK(recovery_score(rec.estimate, inst.x, 0.2).correlation >= 0.9);
    // d=1: exact at any n
    const ModelParams p1{1, 50, 1.0, 0.0};
    const auto i1 = generate_model2(p1, 21);
    const auto r1 = recover_spectral(i1.blind(), 1.0);
    CHECK(recovery_score(r1.estimate, i1.x, 1.0).exact);
}

TEST_CASE("spectral on pure null has no fixed-direction correlation") {
    const ModelParams p{20, 6000, 1.0, 0.0};
    Rng rng(77);
    const Eigen::VectorXd fixed = sample_br_vector(6000, 1.0, rng);
    const auto z = generate_null(p, 31);
    const auto rec = recover_spectral(z, 1.0);
    const auto score = recovery_score(rec.estimate, fixed, 1.0);
    CHECK(score.correlation <= 0.1);
}

TEST_CASE("estimation-to-test: in-span estimates give T = 0") {
    const ModelParams p{6, 40, 0.5, 0.0};
    const auto inst = generate_model1(p, 5);
    CHECK(estimation_test_statistic(inst.blind(), inst.x, 0.5) <= 1e-16);
    const EstimationTestConfig cfg{1e-8, 0.5};
    CHECK(estimation_to_test(inst.blind(), inst.x, cfg) == TestDecision::planted);
}

TEST_CASE("estimation-to-test calibrated error rates") {
    const ModelParams p{20, 100, 0.5, 0.0};
    const double tau = calibrate_estimation_threshold(p, 400, 1000, 3.0);
    CHECK(tau > 0.0);
    const EstimationTestConfig cfg{tau, 0.5};
    const int trials = 400;
    int false_p = 0, false_q = 0;
    for (int t = 0; t < trials; ++t) {
        // evaluation seeds disjoint from the calibration block
        Rng rng = Rng::substream(555000, t);
        {
            const auto inst = generate_model1(p, rng.next_u64());
            Eigen::VectorXd est = inst.x + 3.0 * sample_unit_sphere(100, rng);
            if (estimation_to_test(inst.blind(), est, cfg) != TestDecision::planted) ++false_q;
        }
        {
            const auto z = generate_null(p, rng.next_u64());
            Eigen::VectorXd est = sample_br_vector(100, 0.5, rng);
            est += 3.0 * sample_unit_sphere(100, rng);
            if (estimation_to_test(z, est, cfg) != TestDecision::null) ++false_p;
        }
    }
    CHECK(false_p <= 10);  // 2.5% of 400
    CHECK(false_q <= 10);
    CHECK(false_p + false_q <= 20);  // total decision error <= 5%
}

TEST_CASE("wasserstein gap equals sigma^2 and ignores the direction") {
    Rng rng(123);
    const Eigen::VectorXd u5 = sample_unit_sphere(5, rng);
    CHECK(wasserstein_gap(u5, 0.0) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(wasserstein_gap(u5, 0.3) == doctest::Approx(0.09).epsilon(1e-12));
    double lo = 1e300, hi = 0.0;
    for (int t = 0; t < 10; ++t) {
        const double v = wasserstein_gap(sample_unit_sphere(13, rng), 0.42);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    CHECK(hi - lo <= 1e-12);
    Eigen::VectorXd bad = 2.0 * u5;
    CHECK_THROWS_AS(wasserstein_gap(bad, 0.1), std::invalid_argument);
}

TEST_CASE("lll recovery wall time is recorded") {
    const ModelParams p{6, 14, 1.0, 0.0};
    const auto inst = generate_model1(p, 77);
    const auto rec = recover_lll(inst.blind(), 1.0, 50, 120, 0.0);
    CHECK(rec.millis >= 0.0);
    CHECK(rec.millis < 60000.0);
}
