#include "spv/recovery.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace spv {

namespace {
double now_ms() {
    return std::chrono::duration<double, std::milli>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

double round_to_grid(double v, double g) {
    // nearest of {0, +g, -g}
    if (v > 0.5 * g) return g;
    if (v < -0.5 * g) return -g;
    return 0.0;
}

Eigen::MatrixXd thin_q(const Eigen::MatrixXd& z) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(z);
    return qr.householderQ() * Eigen::MatrixXd::Identity(z.rows(), std::min(z.rows(), z.cols()));
}
}  // namespace

RecoveryResult recovery_score(const Eigen::VectorXd& estimate, const Eigen::VectorXd& truth,
                              double rho) {
    if (estimate.size() != truth.size())
        throw std::invalid_argument("recovery_score: length mismatch");
    RecoveryResult r;
    r.estimate = estimate;
    r.found = true;
    const double ne = estimate.norm(), nt = truth.norm();
    if (ne == 0.0 || nt == 0.0) {
        r.degenerate_score = true;
        return r;
    }
    const double ip = estimate.dot(truth);
    r.correlation = std::fabs(ip) / (ne * nt);
    const double sign = ip >= 0.0 ? 1.0 : -1.0;
    const double g = 1.0 / std::sqrt(rho);
    bool exact = true;
    for (long long i = 0; i < truth.size(); ++i) {
        if (round_to_grid(sign * estimate[i], g) != truth[i]) {
            exact = false;
            break;
        }
    }
    r.exact = exact;
    return r;
}

RecoveryResult recover_lll(const Eigen::MatrixXd& observation, double rho, int scale_bits,
                           int precision_bits, double declared_sigma, double lovasz_delta) {
    const double t0 = now_ms();
    const long long n = observation.rows();
    const int d = static_cast<int>(observation.cols());
    if (n <= d) throw std::invalid_argument("recover_lll: needs n >= d+1");
    if (scale_bits < 8 || scale_bits > 62)
        throw std::invalid_argument("recover_lll: scale_bits in [8,62]");
    if (precision_bits < 1) throw std::invalid_argument("recover_lll: precision_bits >= 1");
    if (declared_sigma > std::ldexp(1.0, -precision_bits))
        throw std::invalid_argument("recover_lll: sigma exceeds 2^-precision_bits");
    if (!(rho > 0.0) || rho > 1.0) throw std::invalid_argument("recover_lll: rho in (0,1]");

    const Eigen::MatrixXd q = thin_q(observation);
    const Eigen::MatrixXd p =
        Eigen::MatrixXd::Identity(n, n) - q * q.transpose();  // kills span(observation)

    // basis rows (e_i | round(2^s P e_i)) in Z^{2n}
    std::vector<std::vector<mpz_class>> rows(n, std::vector<mpz_class>(2 * n, mpz_class(0)));
    for (long long i = 0; i < n; ++i) {
        rows[i][i] = 1;
        for (long long r = 0; r < n; ++r) {
            const double scaled = std::ldexp(p(r, i), scale_bits);
            rows[i][n + r] = mpz_class(static_cast<long>(std::llround(scaled)));
        }
    }
    LatticeBasis basis(std::move(rows));
    basis.lll_reduce(lovasz_delta);

    RecoveryResult res;
    res.estimate = Eigen::VectorXd::Zero(n);
    const double tol = std::max(std::ldexp(1.0, -scale_bits / 2), 1e-9);
    double best_residual = tol;
    for (int i = 0; i < basis.count(); ++i) {
        const auto& row = basis.row(i);
        Eigen::VectorXd w(n);
        bool grid_ok = false;
        for (long long j = 0; j < n; ++j) {
            const mpz_class& e = row[j];
            if (e < -1 || e > 1) {
                grid_ok = false;
                break;
            }
            w[j] = e.get_d();
            if (w[j] != 0.0) grid_ok = true;
        }
        if (!grid_ok) continue;
        const double residual = (p * w).norm() / w.norm();
        if (residual <= best_residual) {
            best_residual = residual;
            res.estimate = w / std::sqrt(rho);
            res.found = true;
            res.in_span_residual = residual;
        }
    }
    res.millis = now_ms() - t0;
    return res;
}

RecoveryResult recover_spectral(const Eigen::MatrixXd& observation, double rho) {
    const double t0 = now_ms();
    const long long n = observation.rows();
    const int d = static_cast<int>(observation.cols());
    if (n < d) throw std::invalid_argument("recover_spectral: needs n >= d");
    Eigen::VectorXd weights(n);
    for (long long i = 0; i < n; ++i) weights[i] = observation.row(i).squaredNorm() - d;
    const Eigen::MatrixXd m =
        observation.transpose() * weights.asDiagonal() * observation;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    if (es.info() != Eigen::Success)
        throw std::runtime_error("recover_spectral: eigensolver failed to converge");
    const Eigen::VectorXd ev = es.eigenvalues();
    std::vector<double> sorted(ev.data(), ev.data() + ev.size());
    std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
    const double median = sorted[sorted.size() / 2];
    int pick = 0;
    double best = -1.0;
    for (int i = 0; i < ev.size(); ++i) {
        const double dist = std::fabs(ev[i] - median);
        if (dist > best) {
            best = dist;
            pick = i;
        }
    }
    const Eigen::VectorXd u_hat = es.eigenvectors().col(pick);
    const Eigen::VectorXd proj = observation * u_hat;
    const double g = 1.0 / std::sqrt(rho);
    RecoveryResult res;
    res.estimate.resize(n);
    for (long long i = 0; i < n; ++i) res.estimate[i] = round_to_grid(proj[i], g);
    res.found = res.estimate.norm() > 0.0;
    res.millis = now_ms() - t0;
    return res;
}

double estimation_test_statistic(const Eigen::MatrixXd& observation,
                                 const Eigen::VectorXd& estimate, double rho) {
    if (estimate.size() != observation.rows())
        throw std::invalid_argument("estimation_to_test: estimate length != n");
    const Eigen::MatrixXd q = thin_q(observation);
    const Eigen::VectorXd xp = q * (q.transpose() * estimate);
    const double g = 1.0 / std::sqrt(rho);
    double t = 0.0;
    for (long long i = 0; i < xp.size(); ++i) {
        const double dev = xp[i] - round_to_grid(xp[i], g);
        t += dev * dev;
    }
    return t;
}

TestDecision estimation_to_test(const Eigen::MatrixXd& observation, const Eigen::VectorXd& estimate,
                                const EstimationTestConfig& cfg) {
    const double t = estimation_test_statistic(observation, estimate, cfg.rho);
    return t <= cfg.tau ? TestDecision::planted : TestDecision::null;
}

double calibrate_estimation_threshold(const ModelParams& params, int trials, uint64_t seed,
                                      double estimator_error_norm, double safety) {
    params.validate();
    if (trials < 50) throw std::invalid_argument("calibration needs >= 50 trials");
    std::vector<double> stats;
    stats.reserve(trials);
    for (int t = 0; t < trials; ++t) {
        Rng rng = Rng::substream(seed, t);
        const Eigen::MatrixXd z = generate_null(params, rng.next_u64());
        Eigen::VectorXd fake = sample_br_vector(params.n, params.rho, rng);
        fake += estimator_error_norm * sample_unit_sphere(static_cast<int>(params.n), rng);
        stats.push_back(estimation_test_statistic(z, fake, params.rho));
    }
    std::sort(stats.begin(), stats.end());
    const size_t idx = std::max<size_t>(0, stats.size() / 100);  // 1st percentile
    return stats[idx] * safety;
}

double wasserstein_gap(const Eigen::VectorXd& u, double sigma) {
    if (std::fabs(u.norm() - 1.0) > 1e-9)
        throw std::invalid_argument("wasserstein_gap: u must be a unit vector");
    if (!(sigma >= 0.0)) throw std::invalid_argument("wasserstein_gap: sigma >= 0");
    const long long d = u.size();
    const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(d, d);
    const Eigen::MatrixXd proj = id - u * u.transpose();
    const Eigen::MatrixXd a = sigma * sigma * u * u.transpose() + proj;

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ea(a);
    const Eigen::MatrixXd sqrt_a = ea.eigenvectors() *
                                   ea.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
                                   ea.eigenvectors().transpose();
    // an orthogonal projector is its own square root; taking a numeric sqrt
    // instead would turn its zero eigenvalues into O(sqrt(eps)) noise
    const Eigen::MatrixXd& sqrt_p = proj;
    return (sqrt_a - sqrt_p).squaredNorm();
}

}  // namespace spv
