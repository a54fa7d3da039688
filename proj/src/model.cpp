#include "spv/model.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace spv {

using nlohmann::json;

void ModelParams::validate() const {
    if (d < 1) throw std::invalid_argument("params: d must be >= 1");
    if (n < 0) throw std::invalid_argument("params: n must be >= 0");
    if (!(rho > 0.0) || rho > 1.0) throw std::invalid_argument("params: rho must be in (0,1]");
    if (!(sigma >= 0.0)) throw std::invalid_argument("params: sigma must be >= 0");
}

std::string provenance_name(Provenance p) {
    switch (p) {
        case Provenance::model1: return "model1";
        case Provenance::model2: return "model2";
        default: return "null";
    }
}

Provenance provenance_from_name(const std::string& s) {
    if (s == "model1") return Provenance::model1;
    if (s == "model2") return Provenance::model2;
    if (s == "null") return Provenance::null_dist;
    throw std::invalid_argument("unknown provenance: " + s);
}

Eigen::VectorXd sample_br_vector(long long n, double rho, Rng& rng) {
    if (!(rho > 0.0) || rho > 1.0) throw std::invalid_argument("sample_br_vector: rho in (0,1]");
    if (n < 1) throw std::invalid_argument("sample_br_vector: n >= 1");
    const double v = 1.0 / std::sqrt(rho);
    Eigen::VectorXd x(n);
    for (long long i = 0; i < n; ++i) {
        const double r = rng.uniform();
        x[i] = r < 0.5 * rho ? v : (r < rho ? -v : 0.0);
    }
    return x;
}

Eigen::VectorXd sample_unit_sphere(int d, Rng& rng) {
    if (d < 1) throw std::invalid_argument("sample_unit_sphere: d >= 1");
    Eigen::VectorXd u(d);
    double nrm2 = 0.0;
    do {
        for (int i = 0; i < d; ++i) u[i] = rng.normal();
        nrm2 = u.squaredNorm();
    } while (nrm2 == 0.0);
    u /= std::sqrt(nrm2);
    u /= u.norm();  // second pass tightens ||u|| to 1 ulp
    return u;
}

Eigen::MatrixXd sample_haar_rotation(int d, Rng& rng) {
    if (d < 1) throw std::invalid_argument("sample_haar_rotation: d >= 1");
    Eigen::MatrixXd a(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) a(i, j) = rng.normal();
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
    Eigen::MatrixXd q = qr.householderQ();
    const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
    // sign-fix the R diagonal so the result is exactly Haar
    for (int j = 0; j < d; ++j)
        if (r(j, j) < 0.0) q.col(j) = -q.col(j);
    return q;
}

PlantedInstance generate_model1(const ModelParams& params, uint64_t seed) {
    params.validate();
    Rng rng(seed);
    PlantedInstance inst;
    inst.params = params;
    inst.provenance = Provenance::model1;
    inst.seed = seed;
    const long long n = params.n;
    const int d = params.d;
    inst.x = sample_br_vector(n, params.rho, rng);
    Eigen::MatrixXd z(n, d);
    for (long long i = 0; i < n; ++i) z(i, 0) = inst.x[i] + params.sigma * rng.normal();
    for (int j = 1; j < d; ++j)
        for (long long i = 0; i < n; ++i) z(i, j) = rng.normal();
    inst.rotation = sample_haar_rotation(d, rng);
    inst.observation = z * (*inst.rotation);
    return inst;
}

PlantedInstance generate_model2(const ModelParams& params, uint64_t seed) {
    params.validate();
    Rng rng(seed);
    PlantedInstance inst;
    inst.params = params;
    inst.provenance = Provenance::model2;
    inst.seed = seed;
    const long long n = params.n;
    const int d = params.d;
    inst.u = sample_unit_sphere(d, rng);
    inst.x = sample_br_vector(n, params.rho, rng);
    const Eigen::VectorXd& u = *inst.u;
    Eigen::MatrixXd obs(n, d);
    Eigen::VectorXd g(d);
    for (long long i = 0; i < n; ++i) {
        for (int j = 0; j < d; ++j) g[j] = rng.normal();
        const double s = g.dot(u);
        // g - s u + sigma s u has covariance I - uu^T + sigma^2 uu^T
        obs.row(i) = (g + (inst.x[i] + (params.sigma - 1.0) * s) * u).transpose();
    }
    inst.observation = obs;
    return inst;
}

Eigen::MatrixXd generate_null(const ModelParams& params, uint64_t seed) {
    params.validate();
    if (params.n < 1) throw std::invalid_argument("generate_null: n must be >= 1");
    Rng rng(seed);
    Eigen::MatrixXd z(params.n, params.d);
    for (long long i = 0; i < params.n; ++i)
        for (int j = 0; j < params.d; ++j) z(i, j) = rng.normal();
    return z;
}

double span_residual(const Eigen::VectorXd& x, const Eigen::MatrixXd& z) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(z);
    const Eigen::MatrixXd q =
        qr.householderQ() * Eigen::MatrixXd::Identity(z.rows(), std::min(z.rows(), z.cols()));
    const Eigen::VectorXd res = x - q * (q.transpose() * x);
    return res.norm() / (x.norm() + 1e-300);
}

double MomentRow::zscore() const {
    const double se = std::sqrt(se1 * se1 + se2 * se2);
    if (se == 0.0) return mean1 == mean2 ? 0.0 : std::numeric_limits<double>::infinity();
    return (mean1 - mean2) / se;
}

namespace {

struct MomentAccumulator {
    std::vector<std::string> names;
    std::vector<double> sum, sumsq;
    long long count = 0;

    void init(const std::vector<std::string>& nm) {
        names = nm;
        sum.assign(nm.size(), 0.0);
        sumsq.assign(nm.size(), 0.0);
    }
    void add(const std::vector<double>& v) {
        for (size_t i = 0; i < v.size(); ++i) {
            sum[i] += v[i];
            sumsq[i] += v[i] * v[i];
        }
        ++count;
    }
    double mean(size_t i) const { return sum[i] / count; }
    double se(size_t i) const {
        const double m = mean(i);
        const double var = std::max(0.0, sumsq[i] / count - m * m);
        return std::sqrt(var / count);
    }
};

std::vector<std::string> moment_names(int n, int d, bool full_pairs) {
    std::vector<std::string> nm;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) nm.push_back("E[Z_" + std::to_string(i) + std::to_string(j) + "]");
    const int nd = n * d;
    if (full_pairs) {
        for (int a = 0; a < nd; ++a)
            for (int b = a; b < nd; ++b)
                nm.push_back("E[Z_" + std::to_string(a / d) + std::to_string(a % d) + " Z_" +
                             std::to_string(b / d) + std::to_string(b % d) + "]");
    } else {
        for (int a = 0; a < nd; ++a)
            nm.push_back("E[Z_" + std::to_string(a / d) + std::to_string(a % d) + "^2]");
    }
    nm.push_back("E[<z,u>]");
    nm.push_back("E[<z,u>^2]");
    nm.push_back("E[<z,u>^4]");
    return nm;
}

void collect_moments(const PlantedInstance& inst, bool full_pairs, std::vector<double>* out) {
    const auto& z = inst.observation;
    const int n = static_cast<int>(z.rows()), d = static_cast<int>(z.cols());
    out->clear();
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) out->push_back(z(i, j));
    const int nd = n * d;
    if (full_pairs) {
        for (int a = 0; a < nd; ++a)
            for (int b = a; b < nd; ++b) out->push_back(z(a / d, a % d) * z(b / d, b % d));
    } else {
        for (int a = 0; a < nd; ++a) out->push_back(z(a / d, a % d) * z(a / d, a % d));
    }
    Eigen::VectorXd u;
    if (inst.u)
        u = *inst.u;
    else
        u = inst.rotation->row(0).transpose();
    double s1 = 0.0, s2 = 0.0, s4 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double s = z.row(i).dot(u);
        s1 += s;
        s2 += s * s;
        s4 += s * s * s * s;
    }
    out->push_back(s1 / n);
    out->push_back(s2 / n);
    out->push_back(s4 / n);
}

EquivalenceReport run_equivalence(const ModelParams& p1, const ModelParams& p2, long long trials,
                                  uint64_t seed) {
    if (trials < 10000)
        throw std::invalid_argument(
            "equivalence_check: trials must be >= 1e4 to resolve the tolerance");
    const bool full_pairs = p1.n * p1.d <= 40;
    const auto names = moment_names(static_cast<int>(p1.n), p1.d, full_pairs);
    MomentAccumulator acc1, acc2;
    acc1.init(names);
    acc2.init(names);
    std::vector<double> buf;
    for (long long t = 0; t < trials; ++t) {
        const auto i1 = generate_model1(p1, Rng::substream(seed, 2 * t).next_u64());
        collect_moments(i1, full_pairs, &buf);
        acc1.add(buf);
        const auto i2 = generate_model2(p2, Rng::substream(seed, 2 * t + 1).next_u64());
        collect_moments(i2, full_pairs, &buf);
        acc2.add(buf);
    }
    EquivalenceReport rep;
    rep.trials = trials;
    rep.pass = true;
    for (size_t i = 0; i < names.size(); ++i) {
        MomentRow row{names[i], acc1.mean(i), acc1.se(i), acc2.mean(i), acc2.se(i)};
        const double z = std::fabs(row.zscore());
        rep.max_abs_z = std::max(rep.max_abs_z, z);
        if (z > 4.0) rep.pass = false;
        rep.rows.push_back(std::move(row));
    }
    return rep;
}

}  // namespace

EquivalenceReport equivalence_check(const ModelParams& params, long long trials, uint64_t seed) {
    params.validate();
    return run_equivalence(params, params, trials, seed);
}

EquivalenceReport equivalence_check_mismatched(const ModelParams& params, double sigma2,
                                               long long trials, uint64_t seed) {
    params.validate();
    ModelParams p2 = params;
    p2.sigma = sigma2;
    p2.validate();
    return run_equivalence(params, p2, trials, seed);
}

namespace {
json vector_to_json(const Eigen::VectorXd& v) {
    json arr = json::array();
    for (long long i = 0; i < v.size(); ++i) arr.push_back(v[i]);
    return arr;
}
json matrix_to_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (long long i = 0; i < m.rows(); ++i) {
        json r = json::array();
        for (long long j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
        rows.push_back(std::move(r));
    }
    return rows;
}
Eigen::VectorXd vector_from_json(const json& arr) {
    Eigen::VectorXd v(arr.size());
    for (size_t i = 0; i < arr.size(); ++i) v[i] = arr[i].get<double>();
    return v;
}
Eigen::MatrixXd matrix_from_json(const json& rows) {
    const size_t n = rows.size();
    const size_t d = n ? rows[0].size() : 0;
    Eigen::MatrixXd m(n, d);
    for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < d; ++j) m(i, j) = rows[i][j].get<double>();
    return m;
}
}  // namespace

void save_instance(const PlantedInstance& inst, const std::string& base_path) {
    {
        std::ofstream csv(base_path + ".csv");
        if (!csv) throw std::runtime_error("cannot write " + base_path + ".csv");
        char buf[64];
        for (long long i = 0; i < inst.observation.rows(); ++i) {
            for (long long j = 0; j < inst.observation.cols(); ++j) {
                std::snprintf(buf, sizeof buf, "%.17g", inst.observation(i, j));
                csv << (j ? "," : "") << buf;
            }
            csv << "\n";
        }
    }
    {
        json side{{"d", inst.params.d},        {"n", inst.params.n},
                  {"rho", inst.params.rho},    {"sigma", inst.params.sigma},
                  {"seed", inst.seed},         {"provenance", provenance_name(inst.provenance)}};
        std::ofstream js(base_path + ".json");
        js << side.dump(2) << "\n";
    }
    {
        json truth;
        truth["x"] = vector_to_json(inst.x);
        if (inst.u) truth["u"] = vector_to_json(*inst.u);
        if (inst.rotation) truth["R"] = matrix_to_json(*inst.rotation);
        std::ofstream js(base_path + ".truth.json");
        js << truth.dump(2) << "\n";
    }
}

BlindInstance load_blind_instance(const std::string& base_path) {
    std::ifstream js(base_path + ".json");
    if (!js) throw std::runtime_error("cannot read " + base_path + ".json");
    json side;
    js >> side;
    BlindInstance b;
    b.params.d = side.at("d").get<int>();
    b.params.n = side.at("n").get<long long>();
    b.params.rho = side.at("rho").get<double>();
    b.params.sigma = side.at("sigma").get<double>();
    b.seed = side.at("seed").get<uint64_t>();
    b.provenance = provenance_from_name(side.at("provenance").get<std::string>());

    std::ifstream csv(base_path + ".csv");
    if (!csv) throw std::runtime_error("cannot read " + base_path + ".csv");
    b.observation.resize(b.params.n, b.params.d);
    std::string line;
    for (long long i = 0; i < b.params.n; ++i) {
        if (!std::getline(csv, line)) throw std::runtime_error("csv truncated: " + base_path);
        std::stringstream ss(line);
        std::string cell;
        for (int j = 0; j < b.params.d; ++j) {
            if (!std::getline(ss, cell, ',')) throw std::runtime_error("csv row short");
            b.observation(i, j) = std::stod(cell);
        }
    }
    return b;
}

PlantedInstance load_instance_with_truth(const std::string& base_path) {
    const BlindInstance b = load_blind_instance(base_path);
    PlantedInstance inst;
    inst.params = b.params;
    inst.provenance = b.provenance;
    inst.seed = b.seed;
    inst.observation = b.observation;
    std::ifstream js(base_path + ".truth.json");
    if (!js) throw std::runtime_error("cannot read " + base_path + ".truth.json");
    json truth;
    js >> truth;
    inst.x = vector_from_json(truth.at("x"));
    if (truth.contains("u")) inst.u = vector_from_json(truth.at("u"));
    if (truth.contains("R")) inst.rotation = matrix_from_json(truth.at("R"));
    return inst;
}

}  // namespace spv
