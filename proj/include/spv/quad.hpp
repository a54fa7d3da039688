#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "spv/kernel.hpp"
#include "spv/model.hpp"
#include "spv/signed_log.hpp"

namespace spv {

// Distribution of c = u.v for independent uniform unit vectors in R^d:
// y = (c+1)/2 ~ Beta((d-1)/2,(d-1)/2). Exact log-gamma normalization.
class OverlapLaw {
public:
    explicit OverlapLaw(int d);
    int d() const { return d_; }
    double alpha() const { return 0.5 * (d_ - 1); }
    double log_normalizer() const { return log_norm_; }  // log B(alpha,alpha)

    double log_pdf(const Overlap& pt) const;  // density of c
    double log_pdf(double c) const { return log_pdf(Overlap::from_c(c)); }
    double cdf(double c) const;               // P(C <= c)
    // P(|C| >= t) = p solved for t, p passed as log(p).
    double two_sided_tail_quantile_log(double log_p) const;

private:
    int d_;
    double log_norm_;
};

inline double overlap_log_pdf(double c, int d) { return OverlapLaw(d).log_pdf(c); }

struct QuadConfig {
    int nodes_per_panel = 15;     // Gauss-Kronrod 7-15
    double rel_tol = 1e-11;       // relative to the L1 mass of the integrand
    double inset = 1e-22;         // open-interval endpoint margin
    int max_depth = 60;
    int max_panels = 6000;

    void validate() const {
        if (nodes_per_panel != 15)
            throw std::invalid_argument("quad: only the 7-15 Gauss-Kronrod rule is built in");
        if (!(rel_tol > 0.0)) throw std::invalid_argument("quad: tolerance must be > 0");
        if (!(inset > 0.0) || inset > 1e-3)
            throw std::invalid_argument("quad: inset must be in (0, 1e-3]");
        if (max_depth < 1 || max_panels < 4) throw std::invalid_argument("quad: bad budget");
    }
};

struct QuadOutcome {
    SignedLog value;
    double abs_error;   // estimated, linear scale (may be 0 for exact zeros)
    double rel_error;   // abs_error / max(|value|, L1 mass)
    bool converged;
    long long evaluations;
};

class QuadNonConvergence : public std::runtime_error {
public:
    QuadNonConvergence(const std::string& what, const QuadOutcome& partial)
        : std::runtime_error(what), partial_(partial) {}
    const QuadOutcome& partial() const { return partial_; }

private:
    QuadOutcome partial_;
};

// E_c[f(c)] under OverlapLaw(d). Throws QuadNonConvergence (carrying the
// partial value) when the budget is exhausted before the tolerance is met.
using OverlapFn = std::function<SignedLog(const Overlap&)>;
QuadOutcome expect_overlap_functional(const OverlapFn& f, int d, const QuadConfig& cfg);

// Partial-range form: int_lo^hi f(c) pdf_d(c) dc with the same engine.
QuadOutcome integrate_overlap_range(const OverlapFn& f, int d, double lo, double hi,
                                    const QuadConfig& cfg);

struct LdlrEstimate {
    SignedLog total;                  // sum of the per-degree terms
    std::vector<SignedLog> terms;     // t = 1..k: C(n,t) E_c[(g-1)^t]
    double rel_error;
    int k = 0;
    ModelParams params;

    double value() const { return total.linear(); }
    double log_value() const { return total.lg; }
};

// || E_u (D̄_u^{⊗n})^{<=inf,k} - 1 ||^2 = E_c sum_t C(n,t)(g_sigma(c)-1)^t.
// Requires k < d-1 when sigma = 0 (endpoint integrability).
LdlrEstimate ldlr_norm_sq(const ModelParams& params, int k, const QuadConfig& cfg);

struct Lr2Estimate {
    SignedLog minus_one;   // E_c[g^n] - 1, the precision-carrying part
    double rel_error;
    ModelParams params;

    SignedLog total() const { return SignedLog::one() + minus_one; }
    double value() const { return total().linear(); }
    double log_value() const { return total().lg; }
};

// E_c[g_sigma(c)^n]; requires n < d-1 when sigma = 0.
Lr2Estimate lr_second_moment(const ModelParams& params, const QuadConfig& cfg);

// Noiseless y-form split at y* = 1/2 - eps/2 with the unnormalized weight
// [4y(1-y)]^{(d-3)/2}: S1 over (0, y*), S2 over (y*, 1/2).
std::pair<SignedLog, SignedLog> split_diagnostics_noiseless(const ModelParams& params, int k,
                                                            double epsilon, const QuadConfig& cfg);
// The matching un-split y-form half integral over (0, 1/2), for additivity checks.
SignedLog ldlr_yform_half(const ModelParams& params, int k, const QuadConfig& cfg);

// Noisy c-form split at c* = 1 - d^{-k_sigma} against the exact overlap pdf:
// T1 over (0, c*), T2 over (c*, 1). 2(T1+T2) = ldlr_norm_sq.
std::pair<SignedLog, SignedLog> split_diagnostics_noisy(const ModelParams& params, int k,
                                                        double k_sigma, const QuadConfig& cfg);

enum class ItSplitMode { noiseless_p, noisy_q };

// Halves of E_c[g^n] under the companion split (P: y* = 1/2 - 0.001 rho by
// convention, passed explicitly; Q: c* = 1 - d^{-k}). Both halves carry the
// even-symmetry factor 2 so that first + second = lr_second_moment.
std::pair<SignedLog, SignedLog> it_split_diagnostics(const ModelParams& params, ItSplitMode mode,
                                                     double split, const QuadConfig& cfg);

// log C(n,t) via log-gamma (n may be as large as 1e12).
double log_binomial(long long n, long long t);

}  // namespace spv
