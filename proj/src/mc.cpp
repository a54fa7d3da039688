#include "spv/mc.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "spv/kernel.hpp"
#include "spv/model.hpp"
#include "spv/rng.hpp"
#include "spv/special.hpp"

namespace spv {

namespace {
constexpr long long kBatch = 1 << 16;

// Streaming mean/M2 merged batch-by-batch in a fixed order, so results are
// independent of any worker schedule.
struct Welford {
    long long n = 0;
    double mean = 0.0;
    double m2 = 0.0;

    void add(double x) {
        ++n;
        const double d1 = x - mean;
        mean += d1 / n;
        m2 += d1 * (x - mean);
    }
    void merge(const Welford& o) {
        if (o.n == 0) return;
        const double delta = o.mean - mean;
        const long long tot = n + o.n;
        m2 += o.m2 + delta * delta * (static_cast<double>(n) * o.n / tot);
        mean += delta * o.n / tot;
        n = tot;
    }
    double stderror() const {
        if (n < 2) return 0.0;
        return std::sqrt(m2 / (n - 1) / n);
    }
};

McEstimate finish(const Welford& w, uint64_t seed) {
    McEstimate e;
    e.value = w.mean;
    e.stderror = w.stderror();
    e.count = w.n;
    e.seed = seed;
    e.unreliable = !(std::fabs(e.value) > 0.0) || e.stderror > 0.1 * std::fabs(e.value);
    return e;
}
}  // namespace

McEstimate mc_conditional_overlap(double x_u, double x_v, const Eigen::VectorXd& u,
                                  const Eigen::VectorXd& v, double sigma, long long count,
                                  uint64_t seed) {
    if (count < 1000) throw std::invalid_argument("mc: count must be >= 1e3");
    if (!(sigma > 0.0)) throw std::invalid_argument("mc_conditional_overlap: sigma must be > 0");
    const int d = static_cast<int>(u.size());
    if (v.size() != d) throw std::invalid_argument("mc: u and v dimension mismatch");
    Welford total;
    Eigen::VectorXd z(d);
    for (long long b = 0, done = 0; done < count; ++b) {
        const long long m = std::min(kBatch, count - done);
        Rng rng = Rng::substream(seed, b);
        Welford w;
        for (long long i = 0; i < m; ++i) {
            for (int j = 0; j < d; ++j) z[j] = rng.normal();
            w.add(std::exp(single_sample_log_ratio(z, x_u, u, sigma) +
                           single_sample_log_ratio(z, x_v, v, sigma)));
        }
        total.merge(w);
        done += m;
    }
    return finish(total, seed);
}

McEstimate mc_mixture_overlap(const Eigen::VectorXd& u, const Eigen::VectorXd& v, double rho,
                              double sigma, long long count, uint64_t seed) {
    if (count < 1000) throw std::invalid_argument("mc: count must be >= 1e3");
    if (!(sigma > 0.0)) throw std::invalid_argument("mc_mixture_overlap: sigma must be > 0");
    if (!(rho > 0.0) || rho > 1.0) throw std::invalid_argument("mc: rho in (0,1]");
    const int d = static_cast<int>(u.size());
    const double br = 1.0 / std::sqrt(rho);
    Welford total;
    Eigen::VectorXd z(d);
    for (long long b = 0, done = 0; done < count; ++b) {
        const long long m = std::min(kBatch, count - done);
        Rng rng = Rng::substream(seed, b);
        Welford w;
        for (long long i = 0; i < m; ++i) {
            for (int j = 0; j < d; ++j) z[j] = rng.normal();
            const double r1 = rng.uniform();
            const double r2 = rng.uniform();
            const double xu = r1 < 0.5 * rho ? br : (r1 < rho ? -br : 0.0);
            const double xv = r2 < 0.5 * rho ? br : (r2 < rho ? -br : 0.0);
            w.add(std::exp(single_sample_log_ratio(z, xu, u, sigma) +
                           single_sample_log_ratio(z, xv, v, sigma)));
        }
        total.merge(w);
        done += m;
    }
    return finish(total, seed);
}

KsReport mc_overlap_law(int d, long long pairs, uint64_t seed) {
    if (pairs < 10000) throw std::invalid_argument("mc_overlap_law: pairs must be >= 1e4");
    std::vector<double> y;
    y.reserve(pairs);
    for (long long b = 0, done = 0; done < pairs; ++b) {
        const long long m = std::min(kBatch, pairs - done);
        Rng rng = Rng::substream(seed, b);
        for (long long i = 0; i < m; ++i) {
            const Eigen::VectorXd u = sample_unit_sphere(d, rng);
            const Eigen::VectorXd v = sample_unit_sphere(d, rng);
            y.push_back(0.5 * (u.dot(v) + 1.0));
        }
        done += m;
    }
    const double a = 0.5 * (d - 1);
    KsReport rep;
    rep.ks = ks_statistic(std::move(y), [a](double t) { return reg_inc_beta(a, a, t); });
    rep.pairs = pairs;
    rep.seed = seed;
    return rep;
}

DensityConvergenceTable mc_density_limit(const Eigen::VectorXd& z, double x0, int d,
                                         const std::vector<double>& sigma_list, long long draws,
                                         uint64_t seed) {
    if (draws < 1000) throw std::invalid_argument("mc_density_limit: draws must be >= 1e3");
    for (size_t i = 0; i + 1 < sigma_list.size(); ++i)
        if (!(sigma_list[i] > sigma_list[i + 1]))
            throw std::invalid_argument("mc_density_limit: sigma list must decrease");
    for (double s : sigma_list)
        if (!(s > 0.0)) throw std::invalid_argument("mc_density_limit: sigmas must be > 0");

    DensityConvergenceTable table;
    table.limit = limiting_density(z, x0, d);
    const double r2 = z.squaredNorm();
    const double log_base = -0.5 * d * std::log(2.0 * M_PI) - 0.5 * r2;
    uint64_t stream = 0;
    for (double sigma : sigma_list) {
        const double is2 = 1.0 / (sigma * sigma);
        Welford total;
        for (long long b = 0, done = 0; done < draws; ++b) {
            Rng rng = Rng::substream(seed, stream++);
            const long long m = std::min(kBatch, draws - done);
            Welford w;
            for (long long i = 0; i < m; ++i) {
                const Eigen::VectorXd u = sample_unit_sphere(d, rng);
                const double s = z.dot(u);
                const double lg = log_base - std::log(sigma) -
                                  0.5 * ((is2 - 1.0) * s * s - 2.0 * is2 * x0 * s + is2 * x0 * x0);
                w.add(std::exp(lg));
            }
            total.merge(w);
            done += m;
        }
        DensityConvergenceRow row;
        row.sigma = sigma;
        row.estimate = total.mean;
        row.stderror = total.stderror();
        row.gap = std::fabs(total.mean - table.limit);
        table.rows.push_back(row);
    }
    if (!table.rows.empty()) {
        const auto& last = table.rows.back();
        table.inconclusive = last.stderror > last.gap;
    }
    return table;
}

}  // namespace spv
