#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "spv/model.hpp"
#include "spv/quad.hpp"
#include "spv/rng.hpp"

namespace spv {

struct SdaCertificate {
    double q = 0.0;                  // certified query-count lower bound (may be inf sentinel)
    double m = 0.0;                  // the VSTAT sample parameter it certifies
    std::optional<int> k;            // present for the LDLR translation
    std::optional<double> epsilon;   // present for the LDLR translation
    std::string method;              // "definition-tail" or "ldlr-translation"
    std::vector<std::string> flags;

    std::string to_json() const;
};

struct SdaOptions {
    double p_min = 1e-30;      // smallest event probability probed
    double p_rel_tol = 1e-3;   // bisection resolution on p
    int monotone_grid = 256;   // points for the h-monotonicity certificate
};

// SDA(S, mu, m) for the symmetric kernel family, h(c) = |g_sigma(c) - 1|,
// events restricted to superlevel sets of h under the overlap law (exact when
// h is monotone in |c|, which is certified per call; otherwise a discrete
// rearrangement fallback is taken and flagged).
SdaCertificate sda_lower_bound(const ModelParams& params, double m, const QuadConfig& cfg,
                               const SdaOptions& opt = {});

// Same machinery with a caller-supplied h (used for stubbed kernels in tests).
using OverlapStatistic = std::function<SignedLog(const Overlap&)>;  // h(c) >= 0 as signed-log
SdaCertificate sda_lower_bound_custom(const OverlapStatistic& h, int d, double m,
                                      const QuadConfig& cfg, const SdaOptions& opt = {});

// Theorem translation, high-degree part delta = 0 (l = infinity):
// SDA(S, m / (q^{2/k} k eps^{2/k})) >= q.
SdaCertificate sda_from_ldlr(double epsilon, int k, double m, double q);

struct QueryBudget {
    double queries;          // (1 - delta_fail) * sda_q
    double vstat_parameter;  // m / 3
};
QueryBudget queries_needed(const SdaCertificate& cert, double delta_fail);

// Formatted statement of the hardness regime with the polylog exponent kept
// configurable (the proofs pin only k >= log^2 d and a k^8 denominator).
std::string theorem_regime_echo(int d, double rho, double polylog_exponent = 4.0);

// ---- VSTAT oracle simulator ----

struct NullDist {
    int d;
};
struct ConditionalDist {
    Eigen::VectorXd u;
    double x0;
    double sigma;  // 0 allowed for sampling
};
struct MixtureDist {
    int d;
    double rho;
    double sigma;
};
using DistHandle = std::variant<NullDist, ConditionalDist, MixtureDist>;

Eigen::VectorXd sample_dist(const DistHandle& dist, Rng& rng);
int dist_dimension(const DistHandle& dist);

struct Query {
    std::string name;
    std::function<double(const Eigen::VectorXd&)> eval;               // range [0,1]
    std::function<double(const DistHandle&)> exact_mean;              // may be empty
};

Query make_constant_query(double v);
Query make_halfspace_query(const Eigen::VectorXd& a, double r);      // 1{<z,a> <= r}
Query make_norm_threshold_query(double r2);                          // 1{||z||^2 > r2}
Query make_clamped_quartic_query(int coordinate, double clamp);      // min(z_j^4, T)/T

// Exact N(0,1) mean of min(w^4, T)/T (null value of the clamped quartic).
double clamped_quartic_null_mean(double clamp);

enum class AdversaryPolicy { honest, bounded_random, adversarial_callback };

struct VstatAnswer {
    std::string query_name;
    double answer;
    double truth;      // backend ground truth used for the bound
    double bound;      // max(1/n, sqrt(truth(1-truth)/n))
    double mc_stderr;  // 0 for the closed-form backend
};

class ContractViolation : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class VstatOracle {
public:
    // Closed-form backend: queries must carry exact_mean.
    VstatOracle(DistHandle dist, double n, AdversaryPolicy policy, uint64_t seed);
    // Monte-Carlo backend with a per-query sample budget.
    VstatOracle(DistHandle dist, double n, AdversaryPolicy policy, uint64_t seed,
                long long mc_budget);

    void set_adversary(std::function<double(double truth, double bound)> cb);

    VstatAnswer query(const Query& q);

    const std::vector<VstatAnswer>& transcript() const { return transcript_; }
    std::string transcript_jsonl() const;
    double vstat_parameter() const { return n_; }
    const DistHandle& distribution() const { return dist_; }
    bool monte_carlo_backend() const { return mc_backend_; }

private:
    DistHandle dist_;
    double n_;
    AdversaryPolicy policy_;
    bool mc_backend_;
    long long mc_budget_ = 0;
    Rng rng_;
    std::function<double(double, double)> adversary_;
    std::vector<VstatAnswer> transcript_;
};

struct DemoDecision {
    bool declares_planted;  // true = P, false = Q
    double statistic;
    double threshold;
    int queries_used;
};

// Clamped fourth-moment query battery; distinguishes P from Q when the VSTAT
// parameter is far above the certified hardness threshold.
DemoDecision demo_sq_tester(VstatOracle& oracle, const ModelParams& params, int budget);

}  // namespace spv
