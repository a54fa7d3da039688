#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

namespace spv {

struct McEstimate {
    double value = 0.0;
    double stderror = 0.0;   // sample sd / sqrt(count)
    long long count = 0;
    uint64_t seed = 0;
    bool unreliable = false;  // stderr/|value| > 10%
};

// E_{z~N(0,I_d)}[ exp(logratio(z;x_u,u,sigma) + logratio(z;x_v,v,sigma)) ],
// the brute-force Gaussian-integral oracle for conditional_overlap.
McEstimate mc_conditional_overlap(double x_u, double x_v, const Eigen::VectorXd& u,
                                  const Eigen::VectorXd& v, double sigma, long long count,
                                  uint64_t seed);

// Same but with x_u, x_v ~ BR(rho) resampled per draw: oracle for g_sigma(c).
McEstimate mc_mixture_overlap(const Eigen::VectorXd& u, const Eigen::VectorXd& v, double rho,
                              double sigma, long long count, uint64_t seed);

struct KsReport {
    double ks = 0.0;
    long long pairs = 0;
    uint64_t seed = 0;
};

// KS distance of sampled (u.v+1)/2 against Beta((d-1)/2,(d-1)/2).
KsReport mc_overlap_law(int d, long long pairs, uint64_t seed);

struct DensityConvergenceRow {
    double sigma;
    double estimate;
    double stderror;
    double gap;  // |estimate - limiting_density|
};

struct DensityConvergenceTable {
    std::vector<DensityConvergenceRow> rows;  // in the given sigma order
    double limit = 0.0;                       // limiting_density(z, x0, d)
    bool inconclusive = false;                // noise swamps the gap at the smallest sigma
};

// Sphere-average oracle for the sigma->0 density limit: for each sigma,
// E_u[D_{x0,u,sigma}(z)] by uniform sphere draws.
DensityConvergenceTable mc_density_limit(const Eigen::VectorXd& z, double x0, int d,
                                         const std::vector<double>& sigma_list, long long draws,
                                         uint64_t seed);

}  // namespace spv
