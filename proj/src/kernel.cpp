#include "spv/kernel.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "spv/special.hpp"

namespace spv {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

double g_log_perturb = 0.0;

// log(e^a + e^b + e^c + e^d) with -inf entries allowed.
double lse4(double a, double b, double c, double d) {
    double m = a;
    if (b > m) m = b;
    if (c > m) m = c;
    if (d > m) m = d;
    if (m == -kInf) return -kInf;
    return m + std::log(std::exp(a - m) + std::exp(b - m) + std::exp(c - m) + std::exp(d - m));
}
}  // namespace

namespace kernel_test_hooks {
void set_log_overlap_perturbation(double eps) { g_log_perturb = eps; }
double log_overlap_perturbation() { return g_log_perturb; }
}  // namespace kernel_test_hooks

LikelihoodKernel::LikelihoodKernel(double rho, double sigma) : rho_(rho), sigma_(sigma) {
    if (!(rho > 0.0) || rho > 1.0) throw std::invalid_argument("kernel: rho must be in (0,1]");
    if (!(sigma >= 0.0)) throw std::invalid_argument("kernel: sigma must be >= 0");
}

void LikelihoodKernel::stable_theta_factors(const Overlap& pt, double* one_minus_thc,
                                            double* one_plus_thc) const {
    const double th = theta();
    if (th >= 0.0) {
        const double s2 = sigma_ * sigma_;
        *one_minus_thc = s2 + th * pt.one_minus_c;
        *one_plus_thc = s2 + th * pt.one_plus_c;
    } else {
        *one_minus_thc = 1.0 - th * pt.c;
        *one_plus_thc = 1.0 + th * pt.c;
    }
    if (!(*one_minus_thc > 0.0) || !(*one_plus_thc > 0.0)) {
        std::ostringstream os;
        os << "kernel domain error: 1 - theta^2 c^2 <= 0 at theta=" << th << ", c=" << pt.c;
        if (sigma_ == 0.0 && std::fabs(pt.c) >= 1.0) os << " (sigma=0 endpoint singularity)";
        throw std::domain_error(os.str());
    }
}

double LikelihoodKernel::log_conditional_overlap(double x_u, double x_v, double c) const {
    const Overlap pt = Overlap::from_c(c);
    double umc, upc;
    stable_theta_factors(pt, &umc, &upc);
    const double a = umc * upc;  // 1 - theta^2 c^2
    const double th = theta();
    const double num = 2.0 * x_u * x_v * c - th * (x_u * x_u + x_v * x_v) * c * c;
    return num / (2.0 * a) - 0.5 * (std::log(umc) + std::log(upc));
}

double LikelihoodKernel::conditional_overlap(double x_u, double x_v, double c) const {
    return std::exp(log_conditional_overlap(x_u, x_v, c));
}

double LikelihoodKernel::log_mixture_overlap(const Overlap& pt) const {
    double umc, upc;
    stable_theta_factors(pt, &umc, &upc);
    const double half_log_a = 0.5 * (std::log(umc) + std::log(upc));
    const double a = umc * upc;
    const double th = theta();
    const double r = rho_;

    const double l1 = (r == 1.0) ? -kInf : 2.0 * std::log1p(-r);
    const double l2 = (r == 1.0) ? -kInf
                                 : std::log(2.0 * r * (1.0 - r)) - th * pt.c * pt.c / (2.0 * r * a);
    const double lw = 2.0 * std::log(r) - std::log(2.0);
    const double l3 = lw + pt.c / (r * upc);
    const double l4 = lw - pt.c / (r * umc);
    return lse4(l1, l2, l3, l4) - half_log_a + g_log_perturb;
}

double LikelihoodKernel::mixture_overlap(double c) const {
    return std::exp(log_mixture_overlap(Overlap::from_c(c)));
}

SignedLog LikelihoodKernel::mixture_overlap_minus_one(const Overlap& pt) const {
    double umc, upc;
    stable_theta_factors(pt, &umc, &upc);
    if (g_log_perturb == 0.0) {
        const double half_log_a = 0.5 * (std::log(umc) + std::log(upc));
        const double a = umc * upc;
        const double th = theta();
        const double r = rho_;
        const double inv_sqrt_a = std::exp(-half_log_a);
        const double e2 = -th * pt.c * pt.c / (2.0 * r * a);
        const double b3 = pt.c / (r * upc);
        const double b4 = -pt.c / (r * umc);
        if (b3 < 700.0 && b4 < 700.0 && e2 < 700.0 && half_log_a > -700.0) {
            double bracket = 0.5 * r * r * (std::expm1(b3) + std::expm1(b4));
            if (r < 1.0) bracket += 2.0 * r * (1.0 - r) * std::expm1(e2);
            const double gm1 = std::expm1(-half_log_a) + inv_sqrt_a * bracket;
            if (std::isfinite(gm1) && std::fabs(gm1) > 1e-290)
                return SignedLog::from_linear(gm1);
            if (gm1 == 0.0 || std::fabs(gm1) <= 1e-290) return SignedLog::from_linear(gm1);
        }
    }
    // log route for extreme exponents (or when the test perturbation is on)
    const double lg = log_mixture_overlap(pt);
    if (lg == 0.0) return SignedLog::zero();
    if (lg > 0.0) return SignedLog(1, lg + std::log1p(-std::exp(-lg)));
    return SignedLog(-1, std::log(-std::expm1(lg)));
}

double log_mixture_overlap_limit(const YPoint& pt, double rho) {
    if (!(pt.y > 0.0) || !(pt.one_minus_y > 0.0))
        throw std::domain_error("mixture_overlap_limit: y at endpoint");
    if (!(rho > 0.0) || rho > 1.0)
        throw std::invalid_argument("mixture_overlap_limit: rho must be in (0,1]");
    const double y = pt.y, omy = pt.one_minus_y;
    const double log_pref = -std::log(2.0) - 0.5 * (std::log(y) + std::log(omy));
    const double tw = y - omy;  // 2y - 1
    const double l1 = (rho == 1.0) ? -kInf : 2.0 * std::log1p(-rho);
    const double l2 = (rho == 1.0)
                          ? -kInf
                          : std::log(2.0 * rho * (1.0 - rho)) - tw * tw / (8.0 * rho * y * omy);
    const double lw = 2.0 * std::log(rho) - std::log(2.0);
    const double l3 = lw + (1.0 - 1.0 / (2.0 * y)) / rho;
    const double l4 = lw + (1.0 - 1.0 / (2.0 * omy)) / rho;
    return lse4(l1, l2, l3, l4) + log_pref;
}

double mixture_overlap_limit(double y, double rho) {
    return std::exp(log_mixture_overlap_limit(YPoint::from_y(y), rho));
}

SignedLog mixture_overlap_limit_minus_one(const YPoint& pt, double rho) {
    if (!(pt.y > 0.0) || !(pt.one_minus_y > 0.0))
        throw std::domain_error("mixture_overlap_limit: y at endpoint");
    const double y = pt.y, omy = pt.one_minus_y;
    const double log_pref = -std::log(2.0) - 0.5 * (std::log(y) + std::log(omy));
    const double tw = y - omy;
    const double e2 = -tw * tw / (8.0 * rho * y * omy);
    const double b3 = (1.0 - 1.0 / (2.0 * y)) / rho;
    const double b4 = (1.0 - 1.0 / (2.0 * omy)) / rho;
    if (b3 < 700.0 && b4 < 700.0 && log_pref > -700.0 && log_pref < 700.0) {
        const double pref = std::exp(log_pref);
        double bracket = 0.5 * rho * rho * (std::expm1(b3) + std::expm1(b4));
        if (rho < 1.0) bracket += 2.0 * rho * (1.0 - rho) * std::expm1(e2);
        const double gm1 = std::expm1(log_pref) + pref * bracket;
        if (std::isfinite(gm1)) return SignedLog::from_linear(gm1);
    }
    const double lg = log_mixture_overlap_limit(pt, rho);
    if (lg == 0.0) return SignedLog::zero();
    if (lg > 0.0) return SignedLog(1, lg + std::log1p(-std::exp(-lg)));
    return SignedLog(-1, std::log(-std::expm1(lg)));
}

double sigma_continuity_gap(double c, double rho, double sigma, double margin) {
    if (!(std::fabs(c) < 1.0 - margin))
        throw std::domain_error("sigma_continuity_gap: |c| must be < 1 - margin");
    const LikelihoodKernel noisy(rho, sigma);
    const LikelihoodKernel clean(rho, 0.0);
    const Overlap pt = Overlap::from_c(c);
    const SignedLog diff =
        noisy.mixture_overlap_minus_one(pt) - clean.mixture_overlap_minus_one(pt);
    return diff.abs().linear();
}

double limiting_density(const Eigen::VectorXd& z, double x0, int d) {
    if (d < 2) throw std::invalid_argument("limiting_density: d must be >= 2");
    const double r2 = z.squaredNorm();
    if (r2 <= 0.0) throw std::domain_error("limiting_density: z must be nonzero");
    if (r2 <= x0 * x0) return 0.0;
    const double log_c = 0.5 * std::log(2.0) + log_gamma(0.5 * d) - log_gamma(0.5 * (d - 1));
    const double lg = log_c + 0.5 * x0 * x0 - 0.5 * d * std::log(2.0 * M_PI) - 0.5 * r2 +
                      0.5 * (d - 3) * std::log1p(-x0 * x0 / r2) - 0.5 * std::log(r2);
    return std::exp(lg);
}

double single_sample_log_ratio(const Eigen::VectorXd& z, double x0, const Eigen::VectorXd& u,
                               double sigma) {
    if (!(sigma > 0.0))
        throw std::invalid_argument("single_sample_log_ratio: sigma=0 unsupported (singular "
                                    "density); use limiting_density");
    if (std::fabs(u.norm() - 1.0) > 1e-9)
        throw std::invalid_argument("single_sample_log_ratio: u must be a unit vector");
    const double s = z.dot(u);
    const double is2 = 1.0 / (sigma * sigma);
    return -std::log(sigma) - 0.5 * ((is2 - 1.0) * s * s - 2.0 * is2 * x0 * s + is2 * x0 * x0);
}

}  // namespace spv
