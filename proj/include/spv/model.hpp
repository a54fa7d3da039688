#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "spv/rng.hpp"

namespace spv {

struct ModelParams {
    int d = 2;
    long long n = 1;
    double rho = 1.0;
    double sigma = 0.0;

    double theta() const { return 1.0 - sigma * sigma; }
    void validate() const;
};

enum class Provenance { model1, model2, null_dist };

std::string provenance_name(Provenance p);
Provenance provenance_from_name(const std::string& s);

struct PlantedInstance {
    ModelParams params;
    Provenance provenance = Provenance::null_dist;
    uint64_t seed = 0;
    std::optional<Eigen::VectorXd> u;        // model2 ground truth direction
    std::optional<Eigen::MatrixXd> rotation; // model1 ground truth R (row 0 plays u's role)
    Eigen::VectorXd x;                       // hidden BR vector (empty for null)
    Eigen::MatrixXd observation;             // n x d

    // Hypothesis-testing consumers must only see this.
    const Eigen::MatrixXd& blind() const { return observation; }
};

Eigen::VectorXd sample_br_vector(long long n, double rho, Rng& rng);
Eigen::VectorXd sample_unit_sphere(int d, Rng& rng);
Eigen::MatrixXd sample_haar_rotation(int d, Rng& rng);

PlantedInstance generate_model1(const ModelParams& params, uint64_t seed);
PlantedInstance generate_model2(const ModelParams& params, uint64_t seed);
Eigen::MatrixXd generate_null(const ModelParams& params, uint64_t seed);

// Relative least-squares residual of x against the column span of Z.
double span_residual(const Eigen::VectorXd& x, const Eigen::MatrixXd& z);

struct MomentRow {
    std::string name;
    double mean1, se1;
    double mean2, se2;
    double zscore() const;
};

struct EquivalenceReport {
    std::vector<MomentRow> rows;
    long long trials = 0;
    bool pass = false;
    double max_abs_z = 0.0;
};

// First and second mixed moments of the observation entries under the two
// generators, plus the <z_i,u> marginal moments; pass iff all agree within
// 4 Monte-Carlo standard errors.
EquivalenceReport equivalence_check(const ModelParams& params, long long trials, uint64_t seed);

// Deliberate-mismatch variant used to show the report catches differences.
EquivalenceReport equivalence_check_mismatched(const ModelParams& params, double sigma2,
                                               long long trials, uint64_t seed);

// Serialization: <base>.csv (observation, 17 significant digits),
// <base>.json ({d,n,rho,sigma,seed,provenance}), <base>.truth.json (x,u/R).
void save_instance(const PlantedInstance& inst, const std::string& base_path);

struct BlindInstance {
    ModelParams params;
    Provenance provenance;
    uint64_t seed;
    Eigen::MatrixXd observation;
};

// Loads observation + sidecar only; never reads the truth file.
BlindInstance load_blind_instance(const std::string& base_path);

// Loads ground truth (x and u or R) from <base>.truth.json.
PlantedInstance load_instance_with_truth(const std::string& base_path);

}  // namespace spv
