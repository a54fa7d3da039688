#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "spv/kernel.hpp"
#include "spv/rng.hpp"
#include "spv/signed_log.hpp"

using namespace spv;

namespace {
double rand_value(Rng& rng) {
    // spread over many magnitudes, both signs, with occasional zero
    const double u = rng.uniform();
    if (u < 0.05) return 0.0;
    const double mag = std::exp(40.0 * (rng.uniform() - 0.5));
    return (rng.uniform() < 0.5 ? -1.0 : 1.0) * mag;
}
}  // namespace

TEST_CASE("signed-log arithmetic agrees with plain arithmetic") {
    Rng rng(1001);
    for (int i = 0; i < 20000; ++i) {
        const double a = rand_value(rng), b = rand_value(rng);
        const SignedLog sa = SignedLog::from_linear(a), sb = SignedLog::from_linear(b);
        CHECK((sa * sb).linear() == doctest::Approx(a * b).epsilon(1e-13));
        const double sum = a + b;
        const double got = (sa + sb).linear();
        if (sum == 0.0)
            CHECK(std::fabs(got) <= 1e-13 * std::max(std::fabs(a), std::fabs(b)));
        else
            CHECK(got == doctest::Approx(sum).epsilon(1e-12));
        CHECK((sa - sb).linear() == doctest::Approx(a - b).epsilon(1e-12));
        CHECK((-sa).linear() == -a);
        CHECK(sa.abs().linear() == std::fabs(a));
    }
}

TEST_CASE("signed-log integer powers track signs") {
    Rng rng(1002);
    for (int i = 0; i < 2000; ++i) {
        const double a = rand_value(rng);
        if (a == 0.0) continue;
        for (long long t : {1LL, 2LL, 3LL, 7LL}) {
            const SignedLog p = SignedLog::from_linear(a).pow_int(t);
            CHECK(p.sign == ((a < 0 && (t & 1)) ? -1 : 1));
            CHECK(p.lg == doctest::Approx(t * std::log(std::fabs(a))).epsilon(1e-13));
        }
    }
    CHECK(SignedLog::zero().pow_int(0).linear() == 1.0);
    CHECK(SignedLog::zero().pow_int(3).is_zero());
}

TEST_CASE("signed-log accumulator matches sequential addition and handles spread") {
    Rng rng(1003);
    for (int rep = 0; rep < 200; ++rep) {
        std::vector<SignedLog> vals;
        SignedLog seq = SignedLog::zero();
        for (int i = 0; i < 50; ++i) {
            const SignedLog v(rng.uniform() < 0.5 ? -1 : 1, 600.0 * (rng.uniform() - 0.5));
            vals.push_back(v);
            seq = seq + v;
        }
        SignedLogSum acc;
        for (const auto& v : vals) acc.add(v);
        const SignedLog tot = acc.total();
        if (seq.is_zero()) {
            CHECK((tot.is_zero() || tot.lg < acc.total_abs().lg - 25.0));
        } else {
            CHECK(tot.sign == seq.sign);
            CHECK(tot.lg == doctest::Approx(seq.lg).epsilon(1e-10));
        }
        CHECK(acc.total_abs().lg >= tot.lg);
    }
}

TEST_CASE("rng substreams differ and reseeding reproduces") {
    Rng a = Rng::substream(99, 0);
    Rng b = Rng::substream(99, 1);
    Rng c = Rng::substream(99, 0);
    bool all_same = true;
    for (int i = 0; i < 64; ++i) {
        const uint64_t va = a.next_u64();
        all_same &= va == b.next_u64();
        CHECK(va == c.next_u64());
    }
    CHECK(!all_same);
}

TEST_CASE("rng normal moments") {
    Rng rng(2024);
    const int n = 2000000;
    double m1 = 0.0, m2 = 0.0, m4 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double v = rng.normal();
        m1 += v;
        m2 += v * v;
        m4 += v * v * v * v;
    }
    m1 /= n;
    m2 /= n;
    m4 /= n;
    CHECK(std::fabs(m1) < 3e-3);
    CHECK(std::fabs(m2 - 1.0) < 5e-3);
    CHECK(std::fabs(m4 - 3.0) < 3e-2);
}

TEST_CASE("conditional overlap symmetries") {
    Rng rng(1004);
    for (int i = 0; i < 2000; ++i) {
        const double rho = 0.05 + 0.95 * rng.uniform();
        const double sigma = 1.2 * rng.uniform();
        const double c = 1.6 * rng.uniform() - 0.8;
        const double g = 1.0 / std::sqrt(rho);
        const LikelihoodKernel k(rho, sigma);
        const double xu = (rng.uniform() < 0.5 ? -g : g) * (rng.uniform() < 0.3 ? 0.0 : 1.0);
        const double xv = (rng.uniform() < 0.5 ? -g : g) * (rng.uniform() < 0.3 ? 0.0 : 1.0);
        // argument exchange
        CHECK(k.log_conditional_overlap(xu, xv, c) ==
              doctest::Approx(k.log_conditional_overlap(xv, xu, c)).epsilon(1e-13));
        // joint sign flip of (x_u, c)
        CHECK(k.log_conditional_overlap(xu, xv, c) ==
              doctest::Approx(k.log_conditional_overlap(-xu, xv, -c)).epsilon(1e-12));
        // positivity
        CHECK(k.conditional_overlap(xu, xv, c) > 0.0);
    }
}

TEST_CASE("mixture minus-one linear and log routes agree where both apply") {
    Rng rng(1005);
    for (int i = 0; i < 3000; ++i) {
        const double rho = 0.05 + 0.95 * rng.uniform();
        const double sigma = rng.uniform();
        const double c = 1.9 * rng.uniform() - 0.95;
        const LikelihoodKernel k(rho, sigma);
        const SignedLog direct = k.mixture_overlap_minus_one(c);
        const double via_log = std::expm1(k.log_mixture_overlap(c));
        if (std::fabs(via_log) > 1e-12)
            CHECK(direct.linear() == doctest::Approx(via_log).epsilon(1e-3));
        else
            CHECK(std::fabs(direct.linear() - via_log) < 1e-13);
    }
}
