#pragma once

#include <Eigen/Dense>

#include "spv/signed_log.hpp"

namespace spv {

// A point on the overlap line c in (-1,1) carrying exact complements, so that
// endpoint evaluations keep full precision when 1-|c| underflows in c itself.
struct Overlap {
    double c;
    double one_minus_c;
    double one_plus_c;

    static Overlap from_c(double c) { return {c, 1.0 - c, 1.0 + c}; }
};

// Likelihood-ratio overlap kernel at (rho, sigma); theta = 1 - sigma^2 is
// recomputed on access, never stored.
class LikelihoodKernel {
public:
    LikelihoodKernel(double rho, double sigma);

    double rho() const { return rho_; }
    double sigma() const { return sigma_; }
    double theta() const { return 1.0 - sigma_ * sigma_; }

    // <D̄_{x_u,u,σ}, D̄_{x_v,v,σ}> as a function of c = u·v. Log-domain
    // internally; conditional_overlap exponentiates.
    double log_conditional_overlap(double x_u, double x_v, double c) const;
    double conditional_overlap(double x_u, double x_v, double c) const;

    // g_σ(c) = <D̄_{u,σ}, D̄_{v,σ}>, the BR-mixture overlap.
    double log_mixture_overlap(const Overlap& pt) const;
    double log_mixture_overlap(double c) const { return log_mixture_overlap(Overlap::from_c(c)); }
    double mixture_overlap(double c) const;

    // g_σ(c) - 1 with the cancellation done analytically (weights sum to 1),
    // falling back to the log route when linear terms overflow.
    SignedLog mixture_overlap_minus_one(const Overlap& pt) const;
    SignedLog mixture_overlap_minus_one(double c) const {
        return mixture_overlap_minus_one(Overlap::from_c(c));
    }

private:
    void stable_theta_factors(const Overlap& pt, double* one_minus_thc,
                              double* one_plus_thc) const;
    double rho_;
    double sigma_;
};

struct YPoint {
    double y;
    double one_minus_y;
    static YPoint from_y(double y) { return {y, 1.0 - y}; }
};

// σ→0 kernel in y = (c+1)/2 coordinates (independent algebraic route from
// LikelihoodKernel with sigma=0; the two are cross-checked in tests).
double log_mixture_overlap_limit(const YPoint& pt, double rho);
double mixture_overlap_limit(double y, double rho);
SignedLog mixture_overlap_limit_minus_one(const YPoint& pt, double rho);

// |g_σ(c) - g_0(c)|; decays as O(sigma^2) on any fixed c grid.
double sigma_continuity_gap(double c, double rho, double sigma, double margin = 1e-9);

// Pointwise σ→0 limit of the single-sample mixture density E_u[D_{x0,u,σ}(z)].
// Includes the first-principles normalizer sqrt(2)Γ(d/2)/Γ((d-1)/2)·e^{x0²/2};
// integrates to 1 over R^d. Zero when ||z||^2 <= x0^2 (for d >= 3).
double limiting_density(const Eigen::VectorXd& z, double x0, int d);

// log D_{x0,u,σ}(z) - log D_∅(z), derived from the multivariate normal with
// covariance I - uu^T + σ²uu^T. Requires σ > 0.
double single_sample_log_ratio(const Eigen::VectorXd& z, double x0, const Eigen::VectorXd& u,
                               double sigma);

namespace kernel_test_hooks {
// Fault injection for the verification suite: additive perturbation of
// log g. Must be 0 in production use.
void set_log_overlap_perturbation(double eps);
double log_overlap_perturbation();
}  // namespace kernel_test_hooks

}  // namespace spv
