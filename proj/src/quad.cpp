#include "spv/quad.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "spv/special.hpp"

namespace spv {

namespace {

// QUADPACK dqk15 nodes/weights (7-point Gauss nested in 15-point Kronrod).
constexpr double kXgk[8] = {.991455371120812639206854697526329,
                            .949107912342758524526189684047851,
                            .864864423359769072789712788640926,
                            .741531185599394439863864773280788,
                            .58608723546769113029414483825873,
                            .405845151377397166906606412076961,
                            .207784955007898467600689403773245,
                            0.};
constexpr double kWgk[8] = {.02293532201052922496373200805897,
                            .063092092629978553290700663189204,
                            .104790010322250183839876322541518,
                            .140653259715525918745189590510238,
                            .16900472663926790282658342659855,
                            .190350578064785409913256402421014,
                            .204432940075298892414161999234649,
                            .209482141084727828012999174891714};
constexpr double kWg[4] = {.129484966168869693270611432679082,
                           .27970539148927666790146777142378,
                           .381830050505118944950369775488975,
                           .417959183673469387755102040816327};

enum class MapKind { linear, right_exp, left_exp, low_exp };

struct Segment {
    MapKind map;
    double ta, tb;
    int depth = 0;
};

using TriFn = std::function<SignedLog(double, double, double)>;

struct MappedPoint {
    double x, omx, opx, log_jac;
};

MappedPoint map_point(MapKind map, double tau) {
    switch (map) {
        case MapKind::linear:
            return {tau, 1.0 - tau, 1.0 + tau, 0.0};
        case MapKind::right_exp: {
            const double u = std::exp(-tau);
            return {1.0 - u, u, 2.0 - u, -tau};
        }
        case MapKind::left_exp: {
            const double u = std::exp(-tau);
            return {-1.0 + u, 2.0 - u, u, -tau};
        }
        default: {  // low_exp, y-line near 0
            const double u = std::exp(-tau);
            return {u, 1.0 - u, 1.0 + u, -tau};
        }
    }
}

struct PanelEval {
    SignedLog val;
    SignedLog err;
    SignedLog l1;
};

PanelEval eval_panel(const TriFn& f, const Segment& seg, long long* evals) {
    const double c = 0.5 * (seg.ta + seg.tb);
    const double h = 0.5 * (seg.tb - seg.ta);
    const double log_h = std::log(h);

    SignedLogSum kronrod, gauss, l1;
    auto sample = [&](double tau) {
        const MappedPoint p = map_point(seg.map, tau);
        ++*evals;
        SignedLog v = f(p.x, p.omx, p.opx);
        v.lg += p.log_jac;
        return v;
    };

    const SignedLog fc = sample(c);
    {
        SignedLog t = fc;
        t.lg += std::log(kWgk[7]);
        kronrod.add(t);
        l1.add(t.abs());
        SignedLog tg = fc;
        tg.lg += std::log(kWg[3]);
        gauss.add(tg);
    }
    for (int j = 0; j < 7; ++j) {
        const SignedLog f1 = sample(c - h * kXgk[j]);
        const SignedLog f2 = sample(c + h * kXgk[j]);
        const double lw = std::log(kWgk[j]);
        for (SignedLog v : {f1, f2}) {
            SignedLog t = v;
            t.lg += lw;
            kronrod.add(t);
            l1.add(t.abs());
        }
        if (j % 2 == 1) {  // xgk[1],[3],[5] carry the Gauss weights
            const double lg = std::log(kWg[(j - 1) / 2]);
            for (SignedLog v : {f1, f2}) {
                SignedLog t = v;
                t.lg += lg;
                gauss.add(t);
            }
        }
    }
    PanelEval out;
    out.val = kronrod.total();
    out.l1 = l1.total();
    out.err = (kronrod.total() - gauss.total()).abs();
    out.val.lg += log_h;
    out.l1.lg += log_h;
    out.err.lg += log_h;
    return out;
}

struct Panel {
    Segment seg;
    PanelEval ev;
};

QuadOutcome integrate_segments(const TriFn& f, const std::vector<Segment>& segs,
                               const QuadConfig& cfg) {
    cfg.validate();
    long long evals = 0;
    std::vector<Panel> panels;
    panels.reserve(segs.size() * 4);
    for (const auto& s : segs) {
        if (!(s.tb > s.ta)) continue;
        panels.push_back({s, eval_panel(f, s, &evals)});
    }

    auto totals = [&]() {
        SignedLogSum v, e, l;
        for (const auto& p : panels) {
            v.add(p.ev.val);
            e.add(p.ev.err);
            l.add(p.ev.l1);
        }
        return std::array<SignedLog, 3>{v.total(), e.total(), l.total()};
    };

    const double log_tol = std::log(cfg.rel_tol);
    while (true) {
        const auto [val, err, l1] = totals();
        const double scale = std::max(val.abs().lg, l1.lg);
        const bool ok = err.is_zero() || err.lg <= log_tol + scale;
        if (ok) {
            QuadOutcome out;
            out.value = val;
            out.abs_error = err.is_zero() ? 0.0 : std::exp(err.lg);
            out.rel_error = err.is_zero() ? 0.0 : std::exp(err.lg - scale);
            out.converged = true;
            out.evaluations = evals;
            return out;
        }
        // refine the worst panel
        size_t worst = 0;
        double worst_lg = -std::numeric_limits<double>::infinity();
        for (size_t i = 0; i < panels.size(); ++i) {
            if (!panels[i].ev.err.is_zero() && panels[i].ev.err.lg > worst_lg) {
                worst_lg = panels[i].ev.err.lg;
                worst = i;
            }
        }
        Panel p = panels[worst];
        if (static_cast<int>(panels.size()) >= cfg.max_panels || p.seg.depth >= cfg.max_depth) {
            QuadOutcome partial;
            partial.value = val;
            partial.abs_error = std::exp(err.lg);
            partial.rel_error = std::exp(err.lg - scale);
            partial.converged = false;
            partial.evaluations = evals;
            throw QuadNonConvergence("quadrature did not reach the requested tolerance", partial);
        }
        const double mid = 0.5 * (p.seg.ta + p.seg.tb);
        Segment a{p.seg.map, p.seg.ta, mid, p.seg.depth + 1};
        Segment b{p.seg.map, mid, p.seg.tb, p.seg.depth + 1};
        panels[worst] = {a, eval_panel(f, a, &evals)};
        panels.push_back({b, eval_panel(f, b, &evals)});
    }
}

void chop_into(std::vector<Segment>* out, MapKind map, double ta, double tb, double max_width) {
    if (!(tb > ta)) return;
    const int pieces = std::max(1, static_cast<int>(std::ceil((tb - ta) / max_width)));
    for (int i = 0; i < pieces; ++i) {
        const double a = ta + (tb - ta) * i / pieces;
        const double b = ta + (tb - ta) * (i + 1) / pieces;
        out->push_back({map, a, b, 0});
    }
}

// Segments for an integral over c in [lo, hi] subset (-1, 1): exponential
// endpoint maps outside |c| = 1 - eps0, linear panels with breakpoints tuned
// to the O(1/sqrt(d)) concentration width in the middle.
std::vector<Segment> c_segments(double lo, double hi, int d, const QuadConfig& cfg) {
    const double eps0 = 1.0 / 16.0;
    // endpoint distances handled in (1 -+ c) space: 1 - (1 - inset) is not
    // representable in a double, so the clamping must happen on u, not on c
    const double u_lo = std::max(cfg.inset, lo <= -1.0 ? 0.0 : 1.0 + lo);   // dist of lo from -1
    const double u_hi = std::max(cfg.inset, hi >= 1.0 ? 0.0 : 1.0 - hi);    // dist of hi from +1
    std::vector<Segment> segs;
    const double left_edge = -1.0 + eps0, right_edge = 1.0 - eps0;
    if (lo < left_edge) {
        const double u_max = hi >= left_edge ? eps0 : 1.0 + hi;  // region [lo, min(hi, edge)]
        if (u_max > u_lo * (1.0 + 1e-12))
            chop_into(&segs, MapKind::left_exp, -std::log(u_max), -std::log(u_lo), 4.0);
    }
    if (hi > right_edge) {
        const double u_max = lo <= right_edge ? eps0 : 1.0 - lo;
        if (u_max > u_hi * (1.0 + 1e-12))
            chop_into(&segs, MapKind::right_exp, -std::log(u_max), -std::log(u_hi), 4.0);
    }
    const double clo = std::max(lo, left_edge), chi = std::min(hi, right_edge);
    if (chi > clo) {
        std::vector<double> bps{clo, chi};
        const double c0 = std::min(10.0 / std::sqrt(static_cast<double>(d)), 0.12);
        const double fixed[] = {-0.8, -0.6, -0.4, -0.25, -0.15, 0.0,
                                0.15, 0.25, 0.4,  0.6,   0.8};
        for (double b : fixed)
            if (b > clo && b < chi) bps.push_back(b);
        for (double m : {0.5, 1.0, 2.0, 4.0, 8.0}) {
            for (double s : {-1.0, 1.0}) {
                const double b = s * m * c0;
                if (std::fabs(b) < 0.15 && b > clo && b < chi) bps.push_back(b);
            }
        }
        std::sort(bps.begin(), bps.end());
        bps.erase(std::unique(bps.begin(), bps.end(),
                              [](double a, double b) { return std::fabs(a - b) < 1e-300; }),
                  bps.end());
        for (size_t i = 0; i + 1 < bps.size(); ++i)
            if (bps[i + 1] > bps[i]) segs.push_back({MapKind::linear, bps[i], bps[i + 1], 0});
    }
    return segs;
}

// Segments for y in [lo, hi] subset (0, 1/2].
std::vector<Segment> y_segments(double lo, double hi, int d, const QuadConfig& cfg) {
    const double eps0 = 1.0 / 16.0;
    lo = std::max(lo, cfg.inset);
    hi = std::min(hi, 0.5);
    std::vector<Segment> segs;
    if (!(hi > lo)) return segs;
    if (lo < eps0) {
        const double t_lo = -std::log(std::min(hi, eps0));
        const double t_hi = -std::log(lo);
        chop_into(&segs, MapKind::low_exp, t_lo, t_hi, 4.0);
    }
    const double ylo = std::max(lo, eps0);
    if (hi > ylo) {
        std::vector<double> bps{ylo, hi};
        const double w = std::min(2.5 / std::sqrt(static_cast<double>(d)), 0.05);
        const double fixed[] = {0.1, 0.15, 0.2, 0.3, 0.4, 0.45};
        for (double b : fixed)
            if (b > ylo && b < hi) bps.push_back(b);
        for (double m : {8.0, 4.0, 2.0, 1.0, 0.5}) {
            const double b = 0.5 - m * w;
            if (b > ylo && b < hi) bps.push_back(b);
        }
        std::sort(bps.begin(), bps.end());
        bps.erase(std::unique(bps.begin(), bps.end(),
                              [](double a, double b) { return std::fabs(a - b) < 1e-300; }),
                  bps.end());
        for (size_t i = 0; i + 1 < bps.size(); ++i)
            if (bps[i + 1] > bps[i]) segs.push_back({MapKind::linear, bps[i], bps[i + 1], 0});
    }
    return segs;
}

// (g^n - 1) from log g, sign tracked, safe for |n log g| far beyond 709.
SignedLog pow_minus_one(double log_g, double n) {
    const double d = n * log_g;
    if (d > 700.0) return SignedLog(1, d + std::log1p(-std::exp(-d)));
    return SignedLog::from_linear(std::expm1(d));
}

struct BinomialSum {
    SignedLog total;
    std::vector<SignedLog> terms;
    double log_err_total = -std::numeric_limits<double>::infinity();
};

// sum_t C(n,t) * I_t for a family of per-degree quadratures.
BinomialSum sum_binomial_terms(long long n, int k,
                               const std::function<QuadOutcome(int)>& integral_for_t) {
    BinomialSum out;
    out.terms.reserve(k);
    SignedLogSum tot;
    for (int t = 1; t <= k; ++t) {
        const QuadOutcome o = integral_for_t(t);
        const double lb = log_binomial(n, t);
        SignedLog term = o.value;
        term.lg += lb;
        out.terms.push_back(term);
        tot.add(term);
        if (o.abs_error > 0.0) {
            const double le = lb + std::log(o.abs_error);
            const double m = std::max(out.log_err_total, le);
            out.log_err_total =
                m + std::log(std::exp(out.log_err_total - m) + std::exp(le - m));
        }
    }
    out.total = tot.total();
    return out;
}

}  // namespace

double log_binomial(long long n, long long t) {
    if (t < 0 || t > n) throw std::invalid_argument("log_binomial: need 0 <= t <= n");
    if (t > n - t) t = n - t;
    if (t <= 4096) {
        // direct product: the lgamma difference loses ~1e-3 absolute at n ~ 1e12
        double s = 0.0;
        for (long long i = 0; i < t; ++i) s += std::log(static_cast<double>(n - i));
        return s - log_gamma(static_cast<double>(t) + 1.0);
    }
    const double nd = static_cast<double>(n);
    const double td = static_cast<double>(t);
    return log_gamma(nd + 1.0) - log_gamma(td + 1.0) - log_gamma(nd - td + 1.0);
}

OverlapLaw::OverlapLaw(int d) : d_(d) {
    if (d < 2) throw std::invalid_argument("OverlapLaw: d must be >= 2");
    log_norm_ = log_beta(alpha(), alpha());
}

double OverlapLaw::log_pdf(const Overlap& pt) const {
    if (!(pt.one_minus_c > 0.0) || !(pt.one_plus_c > 0.0))
        throw std::domain_error("overlap_log_pdf: |c| must be < 1");
    const double a = alpha();
    return (a - 1.0) * (std::log(pt.one_minus_c) + std::log(pt.one_plus_c) - std::log(4.0)) -
           log_norm_ - std::log(2.0);
}

double OverlapLaw::cdf(double c) const {
    if (c <= -1.0) return 0.0;
    if (c >= 1.0) return 1.0;
    return reg_inc_beta(alpha(), alpha(), 0.5 * (1.0 + c));
}

double OverlapLaw::two_sided_tail_quantile_log(double log_p) const {
    if (log_p >= 0.0) return 0.0;
    const double w = inv_reg_inc_beta_log(alpha(), alpha(), log_p - std::log(2.0));
    return std::max(0.0, 1.0 - 2.0 * w);
}

QuadOutcome integrate_overlap_range(const OverlapFn& f, int d, double lo, double hi,
                                    const QuadConfig& cfg) {
    const OverlapLaw law(d);
    const TriFn tri = [&](double x, double omx, double opx) {
        const Overlap pt{x, omx, opx};
        SignedLog v = f(pt);
        v.lg += law.log_pdf(pt);
        return v;
    };
    return integrate_segments(tri, c_segments(lo, hi, d, cfg), cfg);
}

QuadOutcome expect_overlap_functional(const OverlapFn& f, int d, const QuadConfig& cfg) {
    return integrate_overlap_range(f, d, -1.0, 1.0, cfg);
}

LdlrEstimate ldlr_norm_sq(const ModelParams& params, int k, const QuadConfig& cfg) {
    params.validate();
    if (k < 1 || static_cast<long long>(k) > params.n)
        throw std::invalid_argument("ldlr_norm_sq: need 1 <= k <= n");
    if (params.sigma == 0.0 && k >= params.d - 1)
        throw std::domain_error("ldlr_norm_sq: k >= d-1 with sigma=0, (g-1)^k not integrable");
    const LikelihoodKernel kernel(params.rho, params.sigma);
    const int d = params.d;
    const auto bs = sum_binomial_terms(params.n, k, [&](int t) {
        return integrate_overlap_range(
            [&](const Overlap& pt) { return kernel.mixture_overlap_minus_one(pt).pow_int(t); }, d,
            -1.0, 1.0, cfg);
    });
    LdlrEstimate est;
    est.total = bs.total;
    est.terms = bs.terms;
    est.k = k;
    est.params = params;
    est.rel_error = bs.total.is_zero() || bs.log_err_total == -INFINITY
                        ? 0.0
                        : std::exp(bs.log_err_total - bs.total.abs().lg);
    return est;
}

Lr2Estimate lr_second_moment(const ModelParams& params, const QuadConfig& cfg) {
    params.validate();
    if (params.sigma == 0.0 && params.n >= params.d - 1)
        throw std::domain_error("lr_second_moment: n >= d-1 with sigma=0, g^n not integrable");
    Lr2Estimate est;
    est.params = params;
    if (params.n == 0) {
        est.minus_one = SignedLog::zero();
        est.rel_error = 0.0;
        return est;
    }
    const LikelihoodKernel kernel(params.rho, params.sigma);
    const double n = static_cast<double>(params.n);
    const QuadOutcome o = integrate_overlap_range(
        [&](const Overlap& pt) { return pow_minus_one(kernel.log_mixture_overlap(pt), n); },
        params.d, -1.0, 1.0, cfg);
    est.minus_one = o.value;
    est.rel_error = o.rel_error;
    return est;
}

namespace {
// Unnormalized y-form integral sum_t C(n,t) int_lo^hi (g_y - 1)^t [4y(1-y)]^{(d-3)/2} dy.
SignedLog yform_integral(const ModelParams& params, int k, double lo, double hi,
                         const QuadConfig& cfg) {
    const double half_exp = 0.5 * (params.d - 3);
    const double rho = params.rho;
    const auto bs = sum_binomial_terms(params.n, k, [&](int t) {
        const TriFn tri = [&](double y, double omy, double) {
            const YPoint pt{y, omy};
            SignedLog v = mixture_overlap_limit_minus_one(pt, rho).pow_int(t);
            v.lg += half_exp * (std::log(4.0) + std::log(y) + std::log(omy));
            return v;
        };
        return integrate_segments(tri, y_segments(lo, hi, params.d, cfg), cfg);
    });
    return bs.total;
}
}  // namespace

std::pair<SignedLog, SignedLog> split_diagnostics_noiseless(const ModelParams& params, int k,
                                                            double epsilon,
                                                            const QuadConfig& cfg) {
    params.validate();
    if (params.sigma != 0.0)
        throw std::invalid_argument("split_diagnostics_noiseless: requires sigma = 0");
    if (!(epsilon > 0.0) || !(epsilon < 1.0))
        throw std::invalid_argument("split_diagnostics_noiseless: epsilon in (0,1)");
    if (k >= params.d - 1)
        throw std::domain_error("split_diagnostics_noiseless: k >= d-1 not integrable");
    const double ystar = 0.5 - 0.5 * epsilon;
    const SignedLog s1 =
        ystar > cfg.inset ? yform_integral(params, k, cfg.inset, ystar, cfg) : SignedLog::zero();
    const SignedLog s2 = yform_integral(params, k, std::max(ystar, cfg.inset), 0.5, cfg);
    return {s1, s2};
}

SignedLog ldlr_yform_half(const ModelParams& params, int k, const QuadConfig& cfg) {
    params.validate();
    if (params.sigma != 0.0) throw std::invalid_argument("ldlr_yform_half: requires sigma = 0");
    if (k >= params.d - 1) throw std::domain_error("ldlr_yform_half: k >= d-1 not integrable");
    return yform_integral(params, k, cfg.inset, 0.5, cfg);
}

std::pair<SignedLog, SignedLog> split_diagnostics_noisy(const ModelParams& params, int k,
                                                        double k_sigma, const QuadConfig& cfg) {
    params.validate();
    if (!(params.sigma > 0.0))
        throw std::invalid_argument("split_diagnostics_noisy: requires sigma > 0");
    if (!(k_sigma >= 0.0)) throw std::invalid_argument("split_diagnostics_noisy: k_sigma >= 0");
    const double cstar = 1.0 - std::pow(static_cast<double>(params.d), -k_sigma);
    const LikelihoodKernel kernel(params.rho, params.sigma);
    auto half = [&](double lo, double hi) -> SignedLog {
        if (!(hi > lo)) return SignedLog::zero();
        const auto bs = sum_binomial_terms(params.n, k, [&](int t) {
            return integrate_overlap_range(
                [&](const Overlap& pt) { return kernel.mixture_overlap_minus_one(pt).pow_int(t); },
                params.d, lo, hi, cfg);
        });
        return bs.total;
    };
    return {half(0.0, cstar), half(cstar, 1.0)};
}

std::pair<SignedLog, SignedLog> it_split_diagnostics(const ModelParams& params, ItSplitMode mode,
                                                     double split, const QuadConfig& cfg) {
    params.validate();
    if (params.sigma == 0.0 && params.n >= params.d - 1)
        throw std::domain_error("it_split_diagnostics: n >= d-1 with sigma=0 not integrable");
    const LikelihoodKernel kernel(params.rho, params.sigma);
    const double n = static_cast<double>(params.n);
    auto mass = [&](double lo, double hi) -> SignedLog {
        if (!(hi > lo)) return SignedLog::zero();
        const QuadOutcome o = integrate_overlap_range(
            [&](const Overlap& pt) {
                return SignedLog::from_log(n * kernel.log_mixture_overlap(pt));
            },
            params.d, lo, hi, cfg);
        SignedLog v = o.value;
        v.lg += std::log(2.0);  // even-symmetry factor so the two halves sum to E[g^n]
        return v;
    };
    if (mode == ItSplitMode::noiseless_p) {
        if (params.sigma != 0.0)
            throw std::invalid_argument("it_split_diagnostics: P mode requires sigma = 0");
        if (!(split > 0.0) || split > 0.5)
            throw std::invalid_argument("it_split_diagnostics: P split is y* in (0, 1/2]");
        const double cstar = 2.0 * split - 1.0;  // in (-1, 0]
        return {mass(cstar, 0.0), mass(-1.0, cstar)};
    }
    if (!(split > 0.0) || !(split < 1.0))
        throw std::invalid_argument("it_split_diagnostics: Q split is c* in (0, 1)");
    return {mass(0.0, split), mass(split, 1.0)};
}

}  // namespace spv
