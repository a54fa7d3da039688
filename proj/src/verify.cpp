#include "spv/verify.hpp"

#include <cmath>
#include <future>
#include <sstream>

#include "spv/kernel.hpp"
#include "spv/mc.hpp"
#include "spv/quad.hpp"
#include "spv/rng.hpp"

namespace spv {

namespace {

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

Eigen::VectorXd axis_vector(int d, double c) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(d);
    v[0] = c;
    v[1] = std::sqrt(std::max(0.0, 1.0 - c * c));
    return v;
}

struct GridPoint {
    double rho, sigma, c;
};

std::vector<GridPoint> grid27() {
    std::vector<GridPoint> g;
    for (double rho : {0.3, 0.6, 1.0})
        for (double sigma : {0.4, 0.6, 0.8})
            for (double c : {0.0, 0.4, 0.7}) g.push_back({rho, sigma, c});
    return g;
}

CheckResult agree(const std::string& name, double closed, const McEstimate& mc) {
    const double diff = std::fabs(mc.value - closed);
    const bool within_se = diff <= 3.0 * mc.stderror;
    const bool within_rel = diff <= 0.01 * std::fabs(closed);
    CheckResult r;
    r.name = name;
    r.pass = within_se && within_rel;
    r.detail = "closed=" + fmt(closed) + " mc=" + fmt(mc.value) + " se=" + fmt(mc.stderror) +
               " |z|=" + fmt(mc.stderror > 0 ? diff / mc.stderror : 0.0);
    return r;
}

// probability-weighted four-case sum over conditional_overlap
double four_case_sum(const LikelihoodKernel& k, double c) {
    const double rho = k.rho();
    const double br = 1.0 / std::sqrt(rho);
    const double p0 = 1.0 - rho;
    double s = p0 * p0 * k.conditional_overlap(0.0, 0.0, c);
    s += 2.0 * rho * p0 * k.conditional_overlap(0.0, br, c);
    s += 0.5 * rho * rho * k.conditional_overlap(br, br, c);
    s += 0.5 * rho * rho * k.conditional_overlap(br, -br, c);
    return s;
}

}  // namespace

bool all_pass(const std::vector<CheckResult>& results) {
    for (const auto& r : results)
        if (!r.pass) return false;
    return true;
}

std::vector<CheckResult> run_verification(const VerifyConfig& cfg) {
    std::vector<CheckResult> out;
    const int d_mc = 6;

    // --- closed form vs Monte-Carlo on the 27-point grid ---
    {
        const auto grid = grid27();
        std::vector<std::future<std::pair<CheckResult, CheckResult>>> futs;
        const int workers = std::max(1, cfg.threads);
        for (size_t i = 0; i < grid.size(); ++i) {
            auto job = [&, i]() {
                const auto& gp = grid[i];
                const LikelihoodKernel kernel(gp.rho, gp.sigma);
                const Eigen::VectorXd u = axis_vector(d_mc, 1.0);
                const Eigen::VectorXd v = axis_vector(d_mc, gp.c);
                const double x = 1.0 / std::sqrt(gp.rho);
                const std::string tag = "[rho=" + fmt(gp.rho) + ",sigma=" + fmt(gp.sigma) +
                                        ",c=" + fmt(gp.c) + "]";
                const McEstimate mcc = mc_conditional_overlap(x, x, u, v, gp.sigma,
                                                              cfg.mc_samples, cfg.seed + 2 * i);
                CheckResult rc =
                    agree("mc-vs-kernel conditional " + tag,
                          kernel.conditional_overlap(x, x, gp.c), mcc);
                const McEstimate mcm = mc_mixture_overlap(u, v, gp.rho, gp.sigma, cfg.mc_samples,
                                                          cfg.seed + 2 * i + 1);
                CheckResult rm =
                    agree("mc-vs-kernel mixture " + tag, kernel.mixture_overlap(gp.c), mcm);
                return std::make_pair(rc, rm);
            };
            if (workers > 1)
                futs.push_back(std::async(std::launch::async, job));
            else
                futs.push_back(std::async(std::launch::deferred, job));
        }
        for (auto& f : futs) {
            auto [rc, rm] = f.get();
            out.push_back(rc);
            out.push_back(rm);
        }
    }

    // --- four-case mixture identity on a random (rho, sigma, c) cloud ---
    {
        Rng rng(cfg.seed ^ 0xabcdef);
        double worst = 0.0;
        for (int i = 0; i < 1000; ++i) {
            const double rho = 0.05 + 0.95 * rng.uniform();
            const double sigma = rng.uniform();
            const double c = 1.8 * rng.uniform() - 0.9;
            const LikelihoodKernel kernel(rho, sigma);
            const double g = kernel.mixture_overlap(c);
            const double s = four_case_sum(kernel, c);
            worst = std::max(worst, std::fabs(g - s) / std::fabs(g));
        }
        out.push_back({"mixture-four-case-identity", worst <= 1e-12,
                       "max rel diff=" + fmt(worst)});
    }

    // --- binomial cross-identity: ldlr(k=n) == lr2 - 1 ---
    {
        const QuadConfig qc;
        struct Tup {
            int d;
            long long n;
            double rho, sigma;
        };
        for (const Tup& t : {Tup{50, 10, 0.5, 0.0}, Tup{100, 20, 1.0, 0.0},
                             Tup{100, 20, 0.5, 1e-6}}) {
            const ModelParams p{t.d, t.n, t.rho, t.sigma};
            const LdlrEstimate ldlr = ldlr_norm_sq(p, static_cast<int>(t.n), qc);
            const Lr2Estimate lr2 = lr_second_moment(p, qc);
            const SignedLog diff = ldlr.total - lr2.minus_one;
            const double rel = diff.is_zero() ? 0.0 : std::exp(diff.lg - lr2.minus_one.abs().lg);
            out.push_back({"binomial-cross-identity [d=" + std::to_string(t.d) +
                               ",n=" + std::to_string(t.n) + ",rho=" + fmt(t.rho) +
                               ",sigma=" + fmt(t.sigma) + "]",
                           rel <= 1e-8, "rel diff=" + fmt(rel)});
        }
    }

    // --- split additivity ---
    {
        const QuadConfig qc;
        {
            const ModelParams p{200, 100, 1.0, 0.0};
            const int k = 4;
            const double eps = k / std::sqrt(200.0);
            const auto [s1, s2] = split_diagnostics_noiseless(p, k, eps, qc);
            const SignedLog whole = ldlr_yform_half(p, k, qc);
            const SignedLog diff = (s1 + s2) - whole;
            const double rel = diff.is_zero() ? 0.0 : std::exp(diff.lg - whole.abs().lg);
            out.push_back({"split-additivity-S", rel <= 1e-8, "rel diff=" + fmt(rel)});
        }
        {
            const ModelParams p{100, 50, 0.5, 1e-6};
            const int k = 3;
            const auto [t1, t2] = split_diagnostics_noisy(p, k, 6.0, qc);
            const LdlrEstimate ldlr = ldlr_norm_sq(p, k, qc);
            SignedLog two_sum = t1 + t2;
            two_sum.lg += std::log(2.0);
            const SignedLog diff = two_sum - ldlr.total;
            const double rel = diff.is_zero() ? 0.0 : std::exp(diff.lg - ldlr.total.abs().lg);
            out.push_back({"split-additivity-T", rel <= 1e-8, "rel diff=" + fmt(rel)});
        }
        {
            const ModelParams p{100, 20, 0.5, 0.0};
            const auto [p1, p2] =
                it_split_diagnostics(p, ItSplitMode::noiseless_p, 0.5 - 0.001 * p.rho, qc);
            const Lr2Estimate lr2 = lr_second_moment(p, qc);
            const SignedLog diff = (p1 + p2) - lr2.total();
            const double rel = diff.is_zero() ? 0.0 : std::exp(diff.lg - lr2.total().abs().lg);
            out.push_back({"it-split-additivity", rel <= 1e-8, "rel diff=" + fmt(rel)});
        }
    }

    // --- overlap law KS battery ---
    for (int d : {2, 3, 10, 50}) {
        const KsReport rep = mc_overlap_law(d, cfg.ks_pairs, cfg.seed + 1000 + d);
        out.push_back({"overlap-law-ks d=" + std::to_string(d), rep.ks < 0.01,
                       "ks=" + fmt(rep.ks)});
    }

    return out;
}

}  // namespace spv
