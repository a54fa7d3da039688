#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace spv {

// log Gamma / log Beta
double log_gamma(double x);
double log_beta(double a, double b);

// Regularized incomplete beta I_x(a,b) and its log (usable for tail values far
// below double range). continued-fraction evaluation, NR-style.
double reg_inc_beta(double a, double b, double x);
double log_reg_inc_beta(double a, double b, double x);

// Solve I_x(a,b) = p for x, with p given as log(p) so that tiny tails work.
double inv_reg_inc_beta_log(double a, double b, double log_p);

// Regularized incomplete gamma P(a,x) (lower) and Q(a,x) = 1-P (upper).
double reg_inc_gamma_p(double a, double x);
double reg_inc_gamma_q(double a, double x);

// Standard normal CDF.
double normal_cdf(double x);

// Chi-square upper tail P(X > x) with k degrees of freedom.
double chi_square_tail(double k, double x);

// One-sample Kolmogorov-Smirnov statistic; samples need not be sorted.
double ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf);

// Stirling form of Beta((d-1)/2,(d-1)/2) with its constant included:
// 2^{1/2-(d-1)} * sqrt(2*pi*2/(d-1)), returned as a log.
double log_beta_half_stirling(int d);

}  // namespace spv
