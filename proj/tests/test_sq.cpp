#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>

#include "spv/kernel.hpp"
#include "spv/quad.hpp"
#include "spv/special.hpp"
#include "spv/sq.hpp"

using namespace spv;

namespace {

// independent discrete-rearrangement oracle on a p-grid: masses from the beta
// cdf on a fine |c| grid, sorted by h, prefix scan
double brute_force_sda_q(const ModelParams& params, double m, int p_grid) {
    const OverlapLaw law(params.d);
    const LikelihoodKernel kernel(params.rho, params.sigma);
    const int cells = 200000;
    std::vector<std::pair<double, double>> hm;  // (h, mass)
    hm.reserve(cells);
    for (int i = 0; i < cells; ++i) {
        const double lo = static_cast<double>(i) / cells;
        const double hi = static_cast<double>(i + 1) / cells;
        const double mid = 0.5 * (lo + hi);
        if (mid >= 1.0 - 1e-12) continue;
        const double mass = 2.0 * (law.cdf(hi) - law.cdf(lo));
        hm.emplace_back(kernel.mixture_overlap_minus_one(mid).abs().linear(), mass);
    }
    std::sort(hm.begin(), hm.end(), [](auto& a, auto& b) { return a.first > b.first; });
    std::vector<double> cum_p(hm.size()), cum_e(hm.size());
    double p = 0.0, e = 0.0;
    for (size_t i = 0; i < hm.size(); ++i) {
        p += hm[i].second;
        e += hm[i].second * hm[i].first;
        cum_p[i] = p;
        cum_e[i] = e;
    }
    // scan the p grid from below, find the smallest p where the condition holds
    for (int gi = 0; gi <= p_grid; ++gi) {
        const double pp = std::exp(std::log(1e-8) * (1.0 - static_cast<double>(gi) / p_grid));
        // conditional expectation over the top-pp tail
        size_t j = 0;
        while (j + 1 < cum_p.size() && cum_p[j] < pp) ++j;
        double top_e = cum_e[j];
        if (cum_p[j] > pp && j > 0)
            top_e = cum_e[j - 1] + (pp - cum_p[j - 1]) * hm[j].first;
        else if (cum_p[j] > pp)
            top_e = pp * hm[0].first;
        if (top_e / pp <= 1.0 / m) return std::floor(1.0 / std::sqrt(pp));
    }
    return 0.0;
}

}  // namespace

TEST_CASE("sda with a vanishing statistic returns the infinite sentinel") {
    const QuadConfig cfg;
    const auto cert = sda_lower_bound_custom(
        [](const Overlap&) { return SignedLog::zero(); }, 50, 100.0, cfg);
    CHECK(std::isinf(cert.q));
    CHECK(cert.flags.front() == "h-zero");
}

TEST_CASE("sda at vanishing m is unbounded above any threshold") {
    const QuadConfig cfg;
    const ModelParams p{60, 10, 1.0, 0.0};
    const auto cert = sda_lower_bound(p, 1e-12, cfg);
    CHECK(cert.q >= 1e12);
    CHECK(!cert.flags.empty());
    CHECK(cert.flags.front() == "at-cap");
}

TEST_CASE("sda matches the brute-force p-grid oracle within one grid step") {
    const QuadConfig cfg;
    const ModelParams p{200, 1, 1.0, 0.0};
    const double m = 200.0;
    const auto cert = sda_lower_bound(p, m, cfg);
    const double q_bf = brute_force_sda_q(p, m, 10000);
    // one grid step on the 1e4-point log grid moves q by the grid ratio
    const double step = std::exp(-0.5 * std::log(1e-8) / 10000.0);
    CHECK(cert.q <= q_bf * step * 1.02 + 1);
    CHECK(cert.q >= q_bf / step / 1.02 - 1);
    CHECK(cert.method == "definition-tail");
    CHECK(cert.flags.empty());  // monotone path, no fallback
}

TEST_CASE("sda is non-increasing in m on a grid") {
    const QuadConfig cfg;
    const ModelParams p{100, 1, 0.6, 0.0};
    double prev = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 20; ++i) {
        const double m = 5.0 * std::pow(1.6, i);
        const auto cert = sda_lower_bound(p, m, cfg);
        CHECK(cert.q <= prev);
        prev = cert.q;
    }
}

TEST_CASE("sda fallback path on a deliberately non-monotone statistic") {
    const QuadConfig cfg;
    // bump statistic: h large on a middle band only
    const auto bump = [](const Overlap& pt) {
        const double a = std::fabs(pt.c);
        return SignedLog::from_linear(a > 0.3 && a < 0.5 ? 1e-3 : 1e-8);
    };
    const auto cert = sda_lower_bound_custom(bump, 40, 10.0, cfg);
    REQUIRE(!cert.flags.empty());
    CHECK(cert.flags.front() == "fallback-levelsets");
    CHECK(cert.q >= 1.0);
    // and when even the universal event violates the condition, q = 0
    const auto hot = sda_lower_bound_custom(
        [](const Overlap& pt) {
            const double a = std::fabs(pt.c);
            return SignedLog::from_linear(a > 0.3 && a < 0.5 ? 1.0 : 0.01);
        },
        40, 50.0, cfg);
    CHECK(hot.q == 0.0);
}

TEST_CASE("ldlr-to-sda translation arithmetic") {
    // k=2, eps=4, m=100, q=2 -> 100 / (2 * 2 * 4) = 6.25
    const auto cert = sda_from_ldlr(4.0, 2, 100.0, 2.0);
    CHECK(cert.m == doctest::Approx(6.25).epsilon(1e-12));
    CHECK(cert.q == 2.0);
    CHECK(cert.method == "ldlr-translation");
    // eps = 1, q = 1: certified parameter m/k
    CHECK(sda_from_ldlr(1.0, 4, 80.0, 1.0).m == doctest::Approx(20.0).epsilon(1e-12));
    // q = e^k survives in logs: m / (e^2 k eps^{2/k})
    const int k = 400;
    const auto big = sda_from_ldlr(2.5, k, 1e6, std::exp(static_cast<double>(k)));
    const double expect = std::exp(std::log(1e6) - 2.0 - std::log(static_cast<double>(k)) -
                                   (2.0 / k) * std::log(2.5));
    CHECK(big.m == doctest::Approx(expect).epsilon(1e-10));
    CHECK_THROWS_AS(sda_from_ldlr(1.0, 3, 10.0, 1.0), std::invalid_argument);  // odd k
    // smaller eps never certifies a smaller parameter
    double prev = 0.0;
    for (double eps : {8.0, 4.0, 2.0, 1.0, 0.5}) {
        const double m_cert = sda_from_ldlr(eps, 4, 100.0, 3.0).m;
        CHECK(m_cert >= prev);
        prev = m_cert;
    }
}

TEST_CASE("queries needed from a certificate") {
    SdaCertificate cert;
    cert.q = 100.0;
    cert.m = 300.0;
    const auto qb0 = queries_needed(cert, 0.0);
    CHECK(qb0.queries == 100.0);
    CHECK(qb0.vstat_parameter == 100.0);
    const auto qb = queries_needed(cert, 0.5);
    CHECK(qb.queries == 50.0);
    CHECK_THROWS_AS(queries_needed(cert, 1.0), std::invalid_argument);
}

TEST_CASE("theorem regime echo carries the symbolic pieces") {
    const std::string s = theorem_regime_echo(1000, 0.5);
    CHECK(s.find("rho^2 d^1.99") != std::string::npos);
    CHECK(s.find("VSTAT") != std::string::npos);
    CHECK(s.find("exp(") != std::string::npos);
    CHECK(s.find("d^-0.499") != std::string::npos);
}

TEST_CASE("vstat honest closed-form answers are exact") {
    VstatOracle oracle(NullDist{10}, 1e6, AdversaryPolicy::honest, 1);
    const auto a = oracle.query(make_constant_query(0.5));
    CHECK(a.answer == 0.5);
    CHECK(a.bound == doctest::Approx(std::sqrt(0.25 / 1e6)).epsilon(1e-12));
    // bound floor at 1/n
    VstatOracle small(NullDist{10}, 4.0, AdversaryPolicy::honest, 1);
    const auto b = small.query(make_constant_query(1.0));
    CHECK(b.bound == 0.25);
}

TEST_CASE("vstat chi-square tail query under the null, mc backend") {
    const int d = 10;
    VstatOracle oracle(NullDist{d}, 1e6, AdversaryPolicy::honest, 7, 10000000);
    const auto a = oracle.query(make_norm_threshold_query(static_cast<double>(d)));
    CHECK(std::fabs(a.answer - chi_square_tail(d, d)) <= 1e-3);
}

TEST_CASE("push-to-null adversary lands exactly at the bound") {
    Eigen::VectorXd u = Eigen::VectorXd::Zero(6);
    u[0] = 1.0;
    VstatOracle oracle(ConditionalDist{u, 1.0, 0.5}, 1e4,
                       AdversaryPolicy::adversarial_callback, 3);
    Eigen::VectorXd a = Eigen::VectorXd::Zero(6);
    a[0] = 1.0;
    const Query q = make_halfspace_query(a, 0.2);
    const double null_value = normal_cdf(0.2);
    oracle.set_adversary([null_value](double truth, double bound) {
        return truth > null_value ? -bound : bound;  // push toward the null's value
    });
    const auto ans = oracle.query(q);
    CHECK(std::fabs(ans.answer - ans.truth) == doctest::Approx(ans.bound).epsilon(1e-12));
    CHECK(std::fabs(ans.answer - null_value) < std::fabs(ans.truth - null_value));
}

TEST_CASE("contract violations are rejected") {
    VstatOracle oracle(NullDist{4}, 100.0, AdversaryPolicy::adversarial_callback, 5);
    oracle.set_adversary([](double, double bound) { return 2.0 * bound; });
    CHECK_THROWS_AS(oracle.query(make_constant_query(0.3)), ContractViolation);

    // phi out of [0,1] caught on samples in the mc backend
    VstatOracle mc(NullDist{4}, 100.0, AdversaryPolicy::honest, 5, 1000);
    Query bad;
    bad.name = "bad";
    bad.eval = [](const Eigen::VectorXd& z) { return z[0]; };
    CHECK_THROWS_AS(mc.query(bad), ContractViolation);

    // closed-form backend requires a declared mean
    VstatOracle cf(NullDist{4}, 100.0, AdversaryPolicy::honest, 5);
    Query nomean;
    nomean.name = "nomean";
    nomean.eval = [](const Eigen::VectorXd&) { return 0.5; };
    CHECK_THROWS_AS(cf.query(nomean), ContractViolation);
}

TEST_CASE("every answer satisfies the definition bound across policies and backends") {
    Rng rng(4711);
    int checked = 0;
    for (int rep = 0; rep < 200; ++rep) {
        const int d = 3 + static_cast<int>(rng.next_u64() % 5);
        DistHandle dist;
        const int pick = static_cast<int>(rng.next_u64() % 3);
        Eigen::VectorXd u = Eigen::VectorXd::Zero(d);
        u[0] = 1.0;
        if (pick == 0)
            dist = NullDist{d};
        else if (pick == 1)
            dist = ConditionalDist{u, 1.0, 0.4};
        else
            dist = MixtureDist{d, 0.5, 0.3};
        const double n = 10.0 + rng.uniform() * 1e5;
        const bool use_mc = rng.uniform() < 0.5;
        const auto policy =
            rng.uniform() < 0.5 ? AdversaryPolicy::honest : AdversaryPolicy::bounded_random;
        Eigen::VectorXd a(d);
        for (int j = 0; j < d; ++j) a[j] = rng.normal();
        const Query q = rng.uniform() < 0.5 ? make_halfspace_query(a, rng.normal())
                                            : make_constant_query(rng.uniform());
        if (!use_mc && pick == 2 && q.name.rfind("halfspace", 0) == 0) continue;
        VstatAnswer ans = use_mc ? VstatOracle(dist, n, policy, rep, 2000).query(q)
                                 : VstatOracle(dist, n, policy, rep).query(q);
        CHECK(std::fabs(ans.answer - ans.truth) <= ans.bound * (1.0 + 1e-12));
        ++checked;
    }
    CHECK(checked > 150);
}

TEST_CASE("certificates serialize to json") {
    const auto cert = sda_from_ldlr(4.0, 2, 100.0, 2.0);
    const std::string j = cert.to_json();
    CHECK(j.find("\"q\":2.0") != std::string::npos);
    CHECK(j.find("\"m\":6.25") != std::string::npos);
    CHECK(j.find("\"k\":2") != std::string::npos);
    CHECK(j.find("\"epsilon\":4.0") != std::string::npos);
    CHECK(j.find("ldlr-translation") != std::string::npos);
}

TEST_CASE("transcripts serialize to json lines") {
    VstatOracle oracle(NullDist{3}, 50.0, AdversaryPolicy::honest, 1);
    oracle.query(make_constant_query(0.25));
    oracle.query(make_norm_threshold_query(3.0));
    const std::string jl = oracle.transcript_jsonl();
    CHECK(std::count(jl.begin(), jl.end(), '\n') == 2);
    CHECK(jl.find("\"truth\"") != std::string::npos);
    CHECK(oracle.transcript().size() == 2);
}

TEST_CASE("demo tester distinguishes planted from null far above threshold") {
    const ModelParams p{10, 1, 0.1, 0.0};
    int planted_right = 0, null_right = 0;
    const int trials = 100;
    for (int t = 0; t < trials; ++t) {
        VstatOracle planted(MixtureDist{10, 0.1, 0.0}, 1e6, AdversaryPolicy::honest, 9000 + t,
                            30000);
        if (demo_sq_tester(planted, p, 10).declares_planted) ++planted_right;
        VstatOracle null(NullDist{10}, 1e6, AdversaryPolicy::honest, 19000 + t, 30000);
        if (!demo_sq_tester(null, p, 10).declares_planted) ++null_right;
    }
    CHECK(planted_right >= 95);
    CHECK(null_right >= 95);
}

TEST_CASE("demo tester rejects a zero budget") {
    const ModelParams p{10, 1, 0.1, 0.0};
    VstatOracle oracle(NullDist{10}, 1e6, AdversaryPolicy::honest, 1, 1000);
    CHECK_THROWS_AS(demo_sq_tester(oracle, p, 0), std::invalid_argument);
}

TEST_CASE("clamped quartic null mean closed form") {
    // frozen: T = 25 under N(0,1)
    CHECK(clamped_quartic_null_mean(25.0) ==
          doctest::Approx(0.09544169623800727).epsilon(1e-12));
}
