#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>

#include "spv/lattice.hpp"
#include "spv/model.hpp"

namespace spv {

struct RecoveryResult {
    Eigen::VectorXd estimate;   // x-hat in R^n (zero vector on failure)
    bool found = false;         // a candidate was produced at all
    double correlation = 0.0;   // |<x-hat, x>| / (||x-hat|| ||x||), filled by recovery_score
    bool exact = false;         // x-hat == +-x after BR-grid rounding
    double in_span_residual = 0.0;  // ||P x-hat|| / ||x-hat|| for the lattice route
    double millis = 0.0;
    bool degenerate_score = false;  // zero vector handed to recovery_score
};

// Score an estimate against the ground truth: global sign alignment, BR-grid
// rounding for the exact-match flag.
RecoveryResult recovery_score(const Eigen::VectorXd& estimate, const Eigen::VectorXd& truth,
                              double rho);

// Lattice route: embeds the search for w = sqrt(rho) x in {0,+-1}^n with
// P w ~ 0 (P the projector onto the orthogonal complement of span(observation))
// as the integer lattice spanned by (e_i | round(2^scale_bits P e_i)), reduces
// with LLL, and scans the reduced basis for a BR-consistent in-span block.
// Requires n >= d+1 and sigma <= 2^-precision_bits.
RecoveryResult recover_lll(const Eigen::MatrixXd& observation, double rho, int scale_bits,
                           int precision_bits, double declared_sigma = 0.0,
                           double lovasz_delta = 0.99);

// Spectral baseline: M = sum_i (||z_i||^2 - d) z_i z_i^T, direction taken as
// the eigenvector whose eigenvalue sits farthest from the spectral median
// (the planted direction is a bottom outlier for rho > 1/3, top for rho < 1/3).
RecoveryResult recover_spectral(const Eigen::MatrixXd& observation, double rho);

enum class TestDecision { planted, null };

struct EstimationTestConfig {
    double tau;  // declare planted iff T <= tau
    double rho;
};

// Testing-to-estimation reduction: project the estimate onto the column span,
// then threshold the BR-grid distance statistic T = sum_i min_g (x_p,i - g)^2.
TestDecision estimation_to_test(const Eigen::MatrixXd& observation, const Eigen::VectorXd& estimate,
                                const EstimationTestConfig& cfg);
double estimation_test_statistic(const Eigen::MatrixXd& observation,
                                 const Eigen::VectorXd& estimate, double rho);

// Calibration run: tau = (empirical 1st percentile of the null statistic) x
// safety factor, over `trials` null instances with independent seeds.
double calibrate_estimation_threshold(const ModelParams& params, int trials, uint64_t seed,
                                      double estimator_error_norm, double safety = 0.9);

// || (sigma^2 uu^T + (I-uu^T))^{1/2} - (I-uu^T)^{1/2} ||_F^2, by explicit
// eigendecomposition; equals sigma^2 identically.
double wasserstein_gap(const Eigen::VectorXd& u, double sigma);

}  // namespace spv
