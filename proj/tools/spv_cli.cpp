// Experiment driver: parameter sweeps, verification suites, phase diagrams and
// recovery benchmarks, all emitting CSV with the run configuration echoed into
// header comments so every output is reproducible from its own file.

#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "spv/kernel.hpp"
#include "spv/lattice.hpp"
#include "spv/mc.hpp"
#include "spv/model.hpp"
#include "spv/quad.hpp"
#include "spv/recovery.hpp"
#include "spv/rng.hpp"
#include "spv/sq.hpp"
#include "spv/verify.hpp"

using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCheckFailure = 1;
constexpr int kExitConfigError = 2;

std::string g17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

template <typename T>
std::vector<T> parse_list(const std::string& s) {
    std::vector<T> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        if constexpr (std::is_same_v<T, int>)
            out.push_back(std::stoi(item));
        else if constexpr (std::is_same_v<T, long long>)
            out.push_back(std::stoll(item));
        else
            out.push_back(std::stod(item));
    }
    return out;
}

struct CommonOpts {
    std::string config_path;
    std::string out_path;
    uint64_t seed = 1;
    int threads = 1;
    std::string d_list, n_list, rho_list = "1", sigma_list = "0", k_list = "1";
    json config;  // merged file config (flags win)

    void load_config() {
        if (config_path.empty()) return;
        std::ifstream in(config_path);
        if (!in) throw std::invalid_argument("cannot open config " + config_path);
        in >> config;
        auto pull_str = [&](const char* key, std::string* dst, bool flag_set) {
            if (!flag_set && config.contains(key)) {
                if (config[key].is_string())
                    *dst = config[key].get<std::string>();
                else {
                    std::string joined;
                    for (const auto& v : config[key])
                        joined += (joined.empty() ? "" : ",") + v.dump();
                    *dst = joined;
                }
            }
        };
        // flags win: only fill fields still at their defaults
        if (config.contains("seed") && seed == 1) seed = config["seed"].get<uint64_t>();
        if (config.contains("threads") && threads == 1) threads = config["threads"].get<int>();
        if (config.contains("out") && out_path.empty()) out_path = config["out"].get<std::string>();
        pull_str("d", &d_list, !d_list.empty() && d_list != "");
        pull_str("n", &n_list, !n_list.empty());
        pull_str("rho", &rho_list, rho_list != "1");
        pull_str("sigma", &sigma_list, sigma_list != "0");
        pull_str("k", &k_list, k_list != "1");
    }

    json echo() const {
        json j{{"seed", seed},       {"threads", threads}, {"d", d_list},
               {"n", n_list},        {"rho", rho_list},    {"sigma", sigma_list},
               {"k", k_list}};
        return j;
    }
};

std::ofstream open_out(const CommonOpts& o, const std::string& subcommand,
                       std::ostream** stream, std::ofstream* file) {
    if (o.out_path.empty()) {
        *stream = &std::cout;
    } else {
        file->open(o.out_path);
        if (!*file) throw std::invalid_argument("cannot open output " + o.out_path);
        *stream = file;
    }
    **stream << "# spv " << subcommand << "\n# config: " << o.echo().dump() << "\n";
    return {};
}

struct GridCell {
    int d;
    long long n;
    double rho, sigma;
};

std::vector<GridCell> make_grid(const CommonOpts& o) {
    const auto ds = parse_list<int>(o.d_list);
    const auto ns = parse_list<long long>(o.n_list);
    const auto rhos = parse_list<double>(o.rho_list);
    const auto sigmas = parse_list<double>(o.sigma_list);
    if (ds.empty() || ns.empty() || rhos.empty() || sigmas.empty())
        throw std::invalid_argument("empty parameter grid (need --d and --n at least)");
    std::vector<GridCell> cells;
    for (int d : ds)
        for (long long n : ns)
            for (double rho : rhos)
                for (double sigma : sigmas) {
                    spv::ModelParams{d, n, rho, sigma}.validate();  // bad values are config errors
                    cells.push_back({d, n, rho, sigma});
                }
    return cells;
}

// Dispatch cells to a pool; rows come back in deterministic grid order.
template <typename Fn>
std::vector<std::string> run_cells(const std::vector<GridCell>& cells, int threads, Fn fn) {
    std::vector<std::string> rows(cells.size());
    std::atomic<size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            const size_t i = next.fetch_add(1);
            if (i >= cells.size()) return;
            rows[i] = fn(cells[i], i);
        }
    };
    const int nthreads = std::max(1, threads);
    std::vector<std::thread> pool;
    for (int t = 0; t < nthreads - 1; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    return rows;
}

// keep 2^-precision_bits above the cell's sigma so noisy sweeps run
int effective_precision_bits(int precision_bits, double sigma) {
    if (sigma <= 0.0) return precision_bits;
    const int cap = static_cast<int>(std::floor(-std::log2(sigma)));
    return std::max(1, std::min(precision_bits, cap));
}

std::string terms_json(const spv::LdlrEstimate& est) {
    json arr = json::array();
    for (const auto& t : est.terms)
        arr.push_back(json{{"sign", t.sign}, {"log_abs", t.lg}});
    return arr.dump();
}

int cmd_verify(CommonOpts& o, long long mc_samples, bool seed_given) {
    spv::VerifyConfig vc;
    vc.mc_samples = mc_samples;
    if (seed_given) vc.seed = o.seed;  // default stays the frozen release-gate seed
    vc.threads = o.threads;
    const auto results = spv::run_verification(vc);
    std::ostream* os = &std::cout;
    std::ofstream file;
    open_out(o, "verify", &os, &file);
    bool ok = true;
    for (const auto& r : results) {
        *os << (r.pass ? "[ok]   " : "[FAIL] ") << r.name << "  " << r.detail << "\n";
        ok = ok && r.pass;
    }
    *os << (ok ? "# all checks passed\n" : "# CHECK FAILURES PRESENT\n");
    return ok ? kExitOk : kExitCheckFailure;
}

int cmd_ldlr(CommonOpts& o) {
    const auto cells = make_grid(o);
    const auto ks = parse_list<int>(o.k_list);
    if (ks.empty()) throw std::invalid_argument("empty k list");
    spv::QuadConfig qc;
    std::vector<GridCell> expanded;
    std::vector<int> kcol;
    for (const auto& c : cells)
        for (int k : ks) {
            expanded.push_back(c);
            kcol.push_back(k);
        }
    auto rows = run_cells(expanded, o.threads, [&](const GridCell& c, size_t i) {
        const spv::ModelParams p{c.d, c.n, c.rho, c.sigma};
        std::ostringstream row;
        row << c.d << "," << c.n << "," << g17(c.rho) << "," << g17(c.sigma) << "," << kcol[i];
        try {
            const auto est = spv::ldlr_norm_sq(p, kcol[i], qc);
            row << "," << g17(est.value()) << "," << g17(est.log_value()) << ","
                << g17(est.rel_error) << ",\"" << terms_json(est) << "\",ok";
        } catch (const std::exception& e) {
            row << ",nan,nan,nan,\"[]\",\"" << e.what() << "\"";
        }
        return row.str();
    });
    std::ostream* os = &std::cout;
    std::ofstream file;
    open_out(o, "ldlr", &os, &file);
    *os << "d,n,rho,sigma,k,value,log_value,rel_error,terms,status\n";
    for (const auto& r : rows) *os << r << "\n";
    return kExitOk;
}

int cmd_lr2(CommonOpts& o) {
    const auto cells = make_grid(o);
    spv::QuadConfig qc;
    auto rows = run_cells(cells, o.threads, [&](const GridCell& c, size_t) {
        const spv::ModelParams p{c.d, c.n, c.rho, c.sigma};
        std::ostringstream row;
        row << c.d << "," << c.n << "," << g17(c.rho) << "," << g17(c.sigma);
        try {
            const auto est = spv::lr_second_moment(p, qc);
            row << "," << g17(est.value()) << "," << g17(est.log_value()) << ","
                << g17(est.minus_one.linear()) << "," << g17(est.rel_error) << ",ok";
        } catch (const std::exception& e) {
            row << ",nan,nan,nan,nan,\"" << e.what() << "\"";
        }
        return row.str();
    });
    std::ostream* os = &std::cout;
    std::ofstream file;
    open_out(o, "lr2", &os, &file);
    *os << "d,n,rho,sigma,value,log_value,minus_one,rel_error,status\n";
    for (const auto& r : rows) *os << r << "\n";
    return kExitOk;
}

int cmd_sda(CommonOpts& o, const std::string& m_list, bool echo_theorem) {
    const auto cells = make_grid(o);
    const auto ms = parse_list<double>(m_list);
    if (ms.empty()) throw std::invalid_argument("empty m list");
    spv::QuadConfig qc;
    std::vector<GridCell> expanded;
    std::vector<double> mcol;
    for (const auto& c : cells)
        for (double m : ms) {
            expanded.push_back(c);
            mcol.push_back(m);
        }
    auto rows = run_cells(expanded, o.threads, [&](const GridCell& c, size_t i) {
        const spv::ModelParams p{c.d, c.n, c.rho, c.sigma};
        std::ostringstream row;
        row << c.d << "," << c.n << "," << g17(c.rho) << "," << g17(c.sigma) << ","
            << g17(mcol[i]);
        try {
            const auto cert = spv::sda_lower_bound(p, mcol[i], qc);
            std::string flags;
            for (const auto& f : cert.flags) flags += (flags.empty() ? "" : ";") + f;
            row << "," << g17(cert.q) << "," << cert.method << "," << flags;
        } catch (const std::exception& e) {
            row << ",nan,error,\"" << e.what() << "\"";
        }
        return row.str();
    });
    std::ostream* os = &std::cout;
    std::ofstream file;
    open_out(o, "sda", &os, &file);
    if (echo_theorem)
        for (const auto& c : cells)
            *os << "# " << spv::theorem_regime_echo(c.d, c.rho) << "\n";
    *os << "d,n,rho,sigma,m,q,method,flags\n";
    for (const auto& r : rows) *os << r << "\n";
    return kExitOk;
}

int cmd_recover(CommonOpts& o, const std::string& algo, int trials, int scale_bits,
                int precision_bits) {
    const auto cells = make_grid(o);
    std::vector<GridCell> expanded;
    std::vector<int> trial_col;
    for (const auto& c : cells)
        for (int t = 0; t < trials; ++t) {
            expanded.push_back(c);
            trial_col.push_back(t);
        }
    if (algo != "lll" && algo != "spectral")
        throw std::invalid_argument("unknown --algo (use lll or spectral)");
    auto rows = run_cells(expanded, o.threads, [&](const GridCell& c, size_t i) {
        const spv::ModelParams p{c.d, c.n, c.rho, c.sigma};
        const uint64_t seed = spv::Rng::substream(o.seed, i).next_u64();
        const auto inst = spv::generate_model1(p, seed);
        std::ostringstream row;
        row << algo << "," << c.d << "," << c.n << "," << g17(c.rho) << "," << g17(c.sigma) << ","
            << seed;
        try {
            spv::RecoveryResult rec;
            if (algo == "lll") {
                rec = spv::recover_lll(inst.blind(), c.rho, scale_bits,
                                       effective_precision_bits(precision_bits, c.sigma),
                                       c.sigma);
            } else {
                rec = spv::recover_spectral(inst.blind(), c.rho);
            }
            spv::RecoveryResult scored = spv::recovery_score(rec.estimate, inst.x, c.rho);
            row << "," << g17(rec.found ? scored.correlation : 0.0) << ","
                << (rec.found && scored.exact ? 1 : 0) << "," << g17(rec.millis);
        } catch (const std::exception& e) {
            row << ",0,0,nan";
        }
        (void)trial_col[i];
        return row.str();
    });
    std::ostream* os = &std::cout;
    std::ofstream file;
    open_out(o, "recover", &os, &file);
    *os << "algo,d,n,rho,sigma,seed,correlation,exact,millis\n";
    for (const auto& r : rows) *os << r << "\n";
    // summary per cell
    size_t idx = 0;
    for (const auto& c : cells) {
        int exact = 0;
        double corr = 0.0;
        for (int t = 0; t < trials; ++t, ++idx) {
            std::stringstream ss(rows[idx]);
            std::string f;
            for (int j = 0; j <= 7; ++j) std::getline(ss, f, ',');
            exact += f == "1";
            std::stringstream s2(rows[idx]);
            for (int j = 0; j <= 6; ++j) std::getline(s2, f, ',');
            corr += std::stod(f);
        }
        *os << "# summary d=" << c.d << " n=" << c.n << " rho=" << c.rho << " sigma=" << c.sigma
            << ": exact " << exact << "/" << trials << ", mean correlation "
            << corr / trials << "\n";
    }
    return kExitOk;
}

int cmd_phase(CommonOpts& o, int k, double m, bool with_recovery, int rec_trials, int scale_bits,
              int precision_bits, double q_budget, double success_threshold) {
    const auto cells = make_grid(o);
    spv::QuadConfig qc;
    auto rows = run_cells(cells, o.threads, [&](const GridCell& c, size_t i) {
        const spv::ModelParams p{c.d, c.n, c.rho, c.sigma};
        std::ostringstream row;
        row << c.d << "," << c.n << "," << g17(c.rho) << "," << g17(c.sigma) << "," << k;
        // each column fails independently; infeasible quantities carry a
        // reason code while the rest of the cell still runs
        std::string reason;
        double ldlr_log = std::nan(""), lr2_log = std::nan(""), q = std::nan("");
        try {
            ldlr_log = spv::ldlr_norm_sq(p, k, qc).log_value();
        } catch (const std::exception& e) {
            reason += std::string("ldlr: ") + e.what() + "; ";
        }
        try {
            lr2_log = spv::lr_second_moment(p, qc).log_value();
        } catch (const std::exception& e) {
            reason += std::string("lr2: ") + e.what() + "; ";
        }
        try {
            q = spv::sda_lower_bound(p, m > 0 ? m : static_cast<double>(c.n), qc).q;
        } catch (const std::exception& e) {
            reason += std::string("sda: ") + e.what() + "; ";
        }
        if (reason.empty()) reason = "ok";
        double lll_rate = std::nan(""), spectral_rate = std::nan("");
        if (with_recovery) {
            int lll_ok = 0, spec_ok = 0;
            for (int t = 0; t < rec_trials; ++t) {
                const uint64_t seed = spv::Rng::substream(o.seed, i * 1000 + t).next_u64();
                const auto inst = spv::generate_model1(p, seed);
                try {
                    const auto rec = spv::recover_lll(
                        inst.blind(), c.rho, scale_bits,
                        effective_precision_bits(precision_bits, c.sigma), c.sigma);
                    if (rec.found && spv::recovery_score(rec.estimate, inst.x, c.rho).exact)
                        ++lll_ok;
                } catch (const std::exception&) {
                }
                try {
                    const auto rec = spv::recover_spectral(inst.blind(), c.rho);
                    if (spv::recovery_score(rec.estimate, inst.x, c.rho).correlation >= 0.9)
                        ++spec_ok;
                } catch (const std::exception&) {
                }
            }
            lll_rate = static_cast<double>(lll_ok) / rec_trials;
            spectral_rate = static_cast<double>(spec_ok) / rec_trials;
        }
        const bool hard = q >= q_budget;
        const bool gap = with_recovery && hard && lll_rate >= success_threshold;
        row << "," << g17(ldlr_log) << "," << g17(lr2_log) << "," << g17(q) << ","
            << g17(lll_rate) << "," << g17(spectral_rate) << "," << (gap ? 1 : 0) << ","
            << (reason == "ok" ? reason : "\"" + reason + "\"");
        return row.str();
    });
    std::ostream* os = &std::cout;
    std::ofstream file;
    open_out(o, "phase", &os, &file);
    *os << "d,n,rho,sigma,k,ldlr_log,lr2_log,sda_q,lll_exact_rate,spectral_rate,gap,reason\n";
    for (const auto& r : rows) *os << r << "\n";
    return kExitOk;
}

int cmd_vstat_demo(CommonOpts& o, double vstat_n, int budget, int trials,
                   const std::string& transcript_path) {
    const auto ds = parse_list<int>(o.d_list.empty() ? "10" : o.d_list);
    const auto rhos = parse_list<double>(o.rho_list);
    const auto sigmas = parse_list<double>(o.sigma_list);
    std::ostream* os = &std::cout;
    std::ofstream file;
    open_out(o, "vstat-demo", &os, &file);
    std::ofstream transcripts;
    if (!transcript_path.empty()) {
        transcripts.open(transcript_path);
        if (!transcripts)
            throw std::invalid_argument("cannot open transcript file " + transcript_path);
    }
    *os << "d,rho,sigma,side,trial,decision,statistic,threshold,queries\n";
    for (int d : ds)
        for (double rho : rhos)
            for (double sigma : sigmas) {
                const spv::ModelParams p{d, 1, rho, sigma};
                for (int side = 0; side < 2; ++side)
                    for (int t = 0; t < trials; ++t) {
                        const uint64_t seed = spv::Rng::substream(o.seed, side * trials + t).next_u64();
                        spv::DistHandle dist;
                        if (side == 0)
                            dist = spv::MixtureDist{d, rho, sigma};
                        else
                            dist = spv::NullDist{d};
                        spv::VstatOracle oracle(dist, vstat_n, spv::AdversaryPolicy::honest, seed,
                                                30000);
                        const auto dec = spv::demo_sq_tester(oracle, p, budget);
                        *os << d << "," << g17(rho) << "," << g17(sigma) << ","
                            << (side == 0 ? "P" : "Q") << "," << t << ","
                            << (dec.declares_planted ? "P" : "Q") << "," << g17(dec.statistic)
                            << "," << g17(dec.threshold) << "," << dec.queries_used << "\n";
                        if (transcripts) transcripts << oracle.transcript_jsonl();
                    }
            }
    return kExitOk;
}

int cmd_sample(CommonOpts& o, const std::string& model, const std::string& base) {
    const auto cells = make_grid(o);
    if (cells.size() != 1)
        throw std::invalid_argument("sample: give exactly one (d,n,rho,sigma) cell");
    const auto& c = cells[0];
    const spv::ModelParams p{c.d, c.n, c.rho, c.sigma};
    spv::PlantedInstance inst;
    if (model == "model1")
        inst = spv::generate_model1(p, o.seed);
    else if (model == "model2")
        inst = spv::generate_model2(p, o.seed);
    else if (model == "null") {
        inst.params = p;
        inst.provenance = spv::Provenance::null_dist;
        inst.seed = o.seed;
        inst.x = Eigen::VectorXd::Zero(p.n);
        inst.observation = spv::generate_null(p, o.seed);
    } else {
        throw std::invalid_argument("sample: --model must be model1|model2|null");
    }
    spv::save_instance(inst, base);
    std::cout << "wrote " << base << ".csv, " << base << ".json, " << base << ".truth.json\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"numerical laboratory for the sparse planted vector testing problem"};
    app.require_subcommand(1);

    CommonOpts o;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", o.config_path, "JSON config file (flags win)");
        sub->add_option("--seed", o.seed, "base RNG seed");
        sub->add_option("--out", o.out_path, "output path (default stdout)");
        sub->add_option("--threads", o.threads, "worker threads");
        sub->add_option("--d", o.d_list, "comma list of subspace dimensions");
        sub->add_option("--n", o.n_list, "comma list of sample counts");
        sub->add_option("--rho", o.rho_list, "comma list of sparsities");
        sub->add_option("--sigma", o.sigma_list, "comma list of noise levels");
        sub->add_option("--k", o.k_list, "comma list of LDLR degrees");
    };

    auto* verify = app.add_subcommand("verify", "run the release-gate check suites");
    long long mc_samples = 2'000'000;
    verify->add_option("--mc-samples", mc_samples, "MC samples per grid point");
    add_common(verify);

    auto* ldlr = app.add_subcommand("ldlr", "samplewise-degree-k LDLR norm squared");
    add_common(ldlr);

    auto* lr2 = app.add_subcommand("lr2", "likelihood-ratio second moment E[g^n]");
    add_common(lr2);

    auto* sda = app.add_subcommand("sda", "statistical-dimension lower bound");
    std::string m_list = "100";
    bool echo_theorem = false;
    sda->add_option("--m", m_list, "comma list of VSTAT sample parameters");
    sda->add_flag("--echo-theorem", echo_theorem, "print the hardness-regime statement");
    add_common(sda);

    auto* recover = app.add_subcommand("recover", "run recovery algorithms on fresh instances");
    std::string algo = "lll";
    int trials = 20, scale_bits = 60, precision_bits = 120;
    recover->add_option("--algo", algo, "lll or spectral");
    recover->add_option("--trials", trials, "seeded trials per cell");
    recover->add_option("--scale-bits", scale_bits, "lattice integer scaling");
    recover->add_option("--precision-bits", precision_bits, "noise budget exponent");
    add_common(recover);

    auto* phase = app.add_subcommand("phase", "phase diagram over the parameter grid");
    int phase_k = 2, rec_trials = 10;
    double phase_m = 0.0, q_budget = 1000.0, success_threshold = 0.8;
    bool with_recovery = false;
    phase->add_option("--ldlr-k", phase_k, "LDLR degree per cell");
    phase->add_option("--sda-m", phase_m, "SDA sample parameter (default: n)");
    phase->add_flag("--with-recovery", with_recovery, "run recovery success rates per cell");
    phase->add_option("--recovery-trials", rec_trials, "trials per cell");
    phase->add_option("--scale-bits", scale_bits, "lattice integer scaling");
    phase->add_option("--precision-bits", precision_bits, "noise budget exponent");
    phase->add_option("--q-budget", q_budget, "query budget proxy for the gap flag");
    phase->add_option("--success-threshold", success_threshold, "lattice success rate for gap");
    add_common(phase);

    auto* vstat = app.add_subcommand("vstat-demo", "SQ tester demo against the VSTAT oracle");
    double vstat_n = 1e6;
    int budget = 10, demo_trials = 20;
    std::string transcript_path;
    vstat->add_option("--vstat-n", vstat_n, "VSTAT sample parameter");
    vstat->add_option("--budget", budget, "query budget");
    vstat->add_option("--trials", demo_trials, "trials per side");
    vstat->add_option("--transcript", transcript_path, "JSON-lines query transcript output");
    add_common(vstat);

    auto* sample = app.add_subcommand("sample", "write an instance to CSV + JSON sidecars");
    std::string model = "model2", base = "instance";
    sample->add_option("--model", model, "model1|model2|null");
    sample->add_option("--base", base, "output base path");
    add_common(sample);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfigError;
    }

    try {
        o.load_config();
        if (verify->parsed())
            return cmd_verify(o, mc_samples,
                              verify->count("--seed") > 0 || o.config.contains("seed"));
        if (ldlr->parsed()) return cmd_ldlr(o);
        if (lr2->parsed()) return cmd_lr2(o);
        if (sda->parsed()) return cmd_sda(o, m_list, echo_theorem);
        if (recover->parsed()) return cmd_recover(o, algo, trials, scale_bits, precision_bits);
        if (phase->parsed())
            return cmd_phase(o, phase_k, phase_m, with_recovery, rec_trials, scale_bits,
                             precision_bits, q_budget, success_threshold);
        if (vstat->parsed())
            return cmd_vstat_demo(o, vstat_n, budget, demo_trials, transcript_path);
        if (sample->parsed()) return cmd_sample(o, model, base);
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfigError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitCheckFailure;
    }
    return kExitOk;
}
