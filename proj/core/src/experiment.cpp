#include "treeshadow/experiment.hpp"

#include "treeshadow/diagnostics.hpp"
#include "treeshadow/dual.hpp"
#include "treeshadow/fbm.hpp"
#include "treeshadow/market.hpp"
#include "treeshadow/primal.hpp"
#include "treeshadow/shadow.hpp"
#include "treeshadow/tree.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace treeshadow::experiment {

namespace fs = std::filesystem;

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

struct Fields {
    const Config& cfg;
    std::vector<std::string> errors;

    std::string str(const std::string& sec, const std::string& key,
                    const std::string& fallback) {
        return cfg.get(sec, key, fallback);
    }
    double num(const std::string& sec, const std::string& key, double fallback) {
        if (!cfg.has(sec, key)) return fallback;
        try {
            return std::stod(cfg.get(sec, key));
        } catch (...) {
            errors.push_back(sec + "." + key + ": not a number");
            return fallback;
        }
    }
    long integer(const std::string& sec, const std::string& key, long fallback) {
        if (!cfg.has(sec, key)) return fallback;
        try {
            return std::stol(cfg.get(sec, key));
        } catch (...) {
            errors.push_back(sec + "." + key + ": not an integer");
            return fallback;
        }
    }
    std::vector<double> list(const std::string& sec, const std::string& key,
                             std::vector<double> fallback) {
        if (!cfg.has(sec, key)) return fallback;
        std::vector<double> out;
        std::stringstream ss(cfg.get(sec, key));
        std::string item;
        while (std::getline(ss, item, ',')) {
            try {
                out.push_back(std::stod(trim(item)));
            } catch (...) {
                errors.push_back(sec + "." + key + ": bad list entry '" + item + "'");
            }
        }
        return out;
    }
};

struct Assertion {
    std::string name;
    bool pass = false;
    std::string detail;
};

struct Artifacts {
    std::vector<std::pair<std::string, std::string>> files;  // name -> content
    std::vector<Assertion> assertions;
    std::vector<std::string> summary;

    void file(const std::string& name, const std::string& content) {
        files.emplace_back(name, content);
    }
    void check(const std::string& name, bool pass, const std::string& detail) {
        assertions.push_back({name, pass, detail});
        summary.push_back(std::string(pass ? "PASS " : "FAIL ") + name + ": " + detail);
    }
    void note(const std::string& line) { summary.push_back(line); }
};

std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

primal::SolverConfig solver_config(Fields& f) {
    primal::SolverConfig sc;
    sc.tol = f.num("solver", "tol", 1e-9);
    sc.max_iters = static_cast<int>(f.integer("solver", "max_iters", 200000));
    sc.step0 = f.num("solver", "step0", 1.0);
    return sc;
}

market::CostSpec cost_spec(Fields& f) {
    market::CostSpec c;
    c.lambda = f.num("cost", "lambda", 0.0);
    c.initial_cash = f.num("cost", "x", 0.0);
    if (!(c.lambda >= 0.0 && c.lambda < 1.0))
        f.errors.push_back("cost.lambda: must lie in [0,1), got " + fmt(c.lambda));
    return c;
}

fbm::FbmSpec fbm_spec(Fields& f) {
    fbm::FbmSpec s;
    s.hurst = f.num("model", "hurst", 0.5);
    s.horizon = f.num("model", "horizon", 1.0);
    s.n_steps = static_cast<int>(f.integer("model", "steps", 6));
    s.mu = f.num("model", "mu", 0.0);
    s.sigma = f.num("model", "sigma", 1.0);
    if (!(s.hurst > 0.0 && s.hurst < 1.0))
        f.errors.push_back("model.hurst: must lie in (0,1)");
    if (!(s.horizon > 0.0)) f.errors.push_back("model.horizon: must be > 0");
    if (s.n_steps < 1) f.errors.push_back("model.steps: must be >= 1");
    if (!(s.sigma > 0.0)) f.errors.push_back("model.sigma: must be > 0");
    return s;
}

tree::ScenarioTree model_tree(Fields& f) {
    const std::string kind = f.str("model", "kind", "geometric-fbm");
    if (kind == "tree-file") {
        const std::string rel = f.str("model", "tree_file", "");
        if (rel.empty()) {
            f.errors.push_back("model.tree_file: required for kind tree-file");
            throw ValidationError(f.errors);
        }
        const fs::path p = fs::path(f.cfg.base_dir) / rel;
        std::ifstream in(p);
        if (!in) {
            f.errors.push_back("model.tree_file: cannot open " + p.string());
            throw ValidationError(f.errors);
        }
        return tree::from_json(in);
    }
    if (kind != "geometric-fbm")
        f.errors.push_back("model.kind: expected geometric-fbm or tree-file, got " + kind);
    const auto spec = fbm_spec(f);
    if (!f.errors.empty()) throw ValidationError(f.errors);
    return tree::fbm_quantization_tree(spec, spec.n_steps);
}

std::string strategy_csv(const market::Strategy& s) {
    std::ostringstream os;
    market::export_csv(s, os);
    return os.str();
}

std::string cps_csv(const dual::ConsistentPriceSystem& cps) {
    std::ostringstream os;
    dual::export_csv(cps, os);
    return os.str();
}

std::string conjugacy_json(const dual::ConjugacyReport& rep) {
    nlohmann::json doc{{"u", rep.u_x},
                       {"v_plus_xy", rep.v_plus_xy},
                       {"gap", rep.gap},
                       {"gap_rel", rep.gap_rel},
                       {"y_hat", rep.y_hat},
                       {"u_prime", rep.u_prime_x}};
    return doc.dump(2) + "\n";
}

primal::UtilitySpec utility_spec(Fields& f) {
    const std::string name = f.str("utility", "name", "exponential");
    if (name != "exponential")
        f.errors.push_back("utility.name: only 'exponential' is available, got " + name);
    return primal::exponential_utility();
}

// ---- experiment kinds ----------------------------------------------------

void run_solve(Fields& f, Artifacts& a) {
    const auto t = model_tree(f);
    const auto cost = cost_spec(f);
    const auto utility = utility_spec(f);
    const auto sc = solver_config(f);
    if (!f.errors.empty()) throw ValidationError(f.errors);

    const auto rep = dual::conjugacy_check(t, cost, utility, cost.initial_cash, sc);
    a.file("conjugacy.json", conjugacy_json(rep));
    a.file("strategy.csv", strategy_csv(rep.primal_solution.strategy));
    a.file("cps.csv", cps_csv(rep.dual_solution.cps));
    a.note("u(x) = " + fmt(rep.u_x));
    a.note("min_y v(y)+xy = " + fmt(rep.v_plus_xy) + " at y_hat = " + fmt(rep.y_hat));
    a.check("duality_gap", rep.gap_rel <= 1e-6,
            "relative gap " + fmt(rep.gap_rel) + " (tolerance 1e-6)");
}

void run_shadow_verify(Fields& f, Artifacts& a) {
    const auto t = model_tree(f);
    const auto cost = cost_spec(f);
    const auto utility = utility_spec(f);
    const auto sc = solver_config(f);
    if (!f.errors.empty()) throw ValidationError(f.errors);

    const auto rep = dual::conjugacy_check(t, cost, utility, cost.initial_cash, sc);
    const auto sp = shadow::extract_shadow(rep.dual_solution, t, cost);
    const auto verify =
        shadow::verify_shadow(t, cost, utility, rep.primal_solution, rep.dual_solution, sc);
    const double girsanov = shadow::girsanov_check(rep.dual_solution, sp, t);
    const auto touch = shadow::touching_stats(sp, t, cost);

    {
        std::ostringstream os;
        os << "node_id,s_hat,binding\n" << std::setprecision(17);
        for (int i = 0; i < t.size(); ++i) {
            const char* b = sp.binding[i] == shadow::Binding::Ask        ? "ask"
                            : sp.binding[i] == shadow::Binding::Bid      ? "bid"
                            : sp.binding[i] == shadow::Binding::Interior ? "interior"
                                                                         : "undefined";
            os << i << ',' << sp.s_hat[i] << ',' << b << '\n';
        }
        a.file("shadow.csv", os.str());
    }
    {
        std::ostringstream os;
        shadow::to_json(verify, os);
        a.file("verify.json", os.str());
    }
    a.file("conjugacy.json", conjugacy_json(rep));
    a.check("duality_gap", rep.gap_rel <= 1e-6, "relative gap " + fmt(rep.gap_rel));
    for (const auto& c : verify.checks)
        a.check(c.name, c.passing, "max violation " + fmt(c.max_violation));
    a.check("girsanov_martingale", girsanov <= 1e-8,
            "max residual " + fmt(girsanov) + " (tolerance 1e-8)");
    a.check("log_spread_containment", touch.containment_ok,
            "width -log(1-lambda) = " + fmt(touch.log_spread_width));
    a.note("touch fractions: ask " + fmt(touch.frac_paths_touch_ask) + ", bid " +
           fmt(touch.frac_paths_touch_bid) + ", both " + fmt(touch.frac_paths_touch_both));
}

void run_f_curve(Fields& f, Artifacts& a) {
    const auto spec = fbm_spec(f);
    const int depth = static_cast<int>(f.integer("model", "steps", 8));
    auto lambdas = f.list("fcurve", "lambdas", {0.005, 0.01, 0.05, 0.1, 0.3});
    const auto sc = solver_config(f);
    if (!f.errors.empty()) throw ValidationError(f.errors);

    std::sort(lambdas.begin(), lambdas.end());
    const auto curve = diagnostics::f_lambda_curve(spec, depth, lambdas, sc);
    std::ostringstream os;
    os << "lambda,f\n" << std::setprecision(17);
    for (const auto& p : curve) os << p.lambda << ',' << p.f << '\n';
    a.file("f_curve.csv", os.str());

    bool in_range = true, monotone = true;
    for (std::size_t i = 0; i < curve.size(); ++i) {
        in_range = in_range && curve[i].f > 0.0 && curve[i].f <= 1.0 + 1e-12;
        if (i > 0) monotone = monotone && curve[i].f >= curve[i - 1].f - 1e-9;
    }
    a.check("f_in_unit_interval", in_range, "f values in (0,1]");
    a.check("f_monotone_in_lambda", monotone, "non-decreasing across the grid (slack 1e-9)");
    a.check("f_strictly_smaller_at_min_lambda",
            curve.front().f < curve.back().f,
            "f(" + fmt(curve.front().lambda) + ") = " + fmt(curve.front().f) + " < f(" +
                fmt(curve.back().lambda) + ") = " + fmt(curve.back().f));
}

void run_stickiness(Fields& f, Artifacts& a, std::uint64_t seed, int jobs) {
    auto base = fbm_spec(f);
    const auto hursts = f.list("stickiness", "hursts", {0.25, 0.5, 0.75});
    const double delta = f.num("stickiness", "delta", 0.4);
    const double barrier = f.num("stickiness", "barrier", 0.4);
    const long n_paths = f.integer("stickiness", "n_paths", 100000);
    const int n_steps = static_cast<int>(f.integer("stickiness", "n_steps", 64));
    if (!(delta > 0.0)) f.errors.push_back("stickiness.delta: must be > 0");
    if (n_paths < 1) f.errors.push_back("stickiness.n_paths: must be >= 1");
    if (!f.errors.empty()) throw ValidationError(f.errors);

    std::ostringstream os;
    os << "hurst,delta,barrier,empirical_prob,standard_error,n_paths\n"
       << std::setprecision(17);
    for (double h : hursts) {
        fbm::FbmSpec spec = base;
        spec.hurst = h;
        spec.n_steps = n_steps;
        const auto grid = fbm::covariance(spec);
        const auto paths =
            fbm::sample_cholesky(grid, static_cast<int>(n_paths), seed, jobs);
        const auto rep =
            diagnostics::stickiness_estimate(paths, delta, {barrier});
        os << h << ',' << rep.delta << ',' << barrier << ',' << rep.empirical_prob << ','
           << rep.standard_error << ',' << rep.n_paths << '\n';
        a.check("stickiness_positive_H" + fmt(h), rep.positive_at_3se(),
                "p = " + fmt(rep.empirical_prob) + " +- " + fmt(rep.standard_error) +
                    " (3-sigma positivity)");
    }
    a.file("stickiness.csv", os.str());
}

void run_divergence(Fields& f, Artifacts& a) {
    const int n_min = static_cast<int>(f.integer("divergence", "n_min", 2));
    const int n_max = static_cast<int>(f.integer("divergence", "n_max", 8));
    const double tail = f.num("divergence", "tail_prob", 0.5);
    const double lambda = f.num("cost", "lambda", 0.1);
    const double x = f.num("cost", "x", 0.0);
    const auto sc = solver_config(f);
    if (n_min < 2) f.errors.push_back("divergence.n_min: must be >= 2");
    if (n_max < n_min) f.errors.push_back("divergence.n_max: must be >= n_min");
    if (!(lambda > 0.0 && lambda < 0.5))
        f.errors.push_back("cost.lambda: divergence requires lambda in (0, 1/2)");
    if (!f.errors.empty()) throw ValidationError(f.errors);

    std::vector<int> ns;
    for (int n = n_min; n <= n_max; ++n) ns.push_back(n);
    const auto rows = diagnostics::divergence_demo(ns, tail, lambda, x, sc);

    std::ostringstream os;
    os << "n,u_n,total_variation,head_mass\n" << std::setprecision(17);
    for (const auto& r : rows)
        os << r.n << ',' << r.u_n << ',' << r.total_variation << ',' << r.head_mass << '\n';
    a.file("divergence.csv", os.str());

    bool bounded = true, u_mono = true, tv_mono = true, mass_mono = true;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        bounded = bounded && rows[i].u_n > -1.0 && rows[i].u_n < 0.0;
        if (i > 0) {
            u_mono = u_mono && rows[i].u_n >= rows[i - 1].u_n - 1e-9;
            tv_mono = tv_mono && rows[i].total_variation >= rows[i - 1].total_variation - 1e-7;
            mass_mono = mass_mono && rows[i].head_mass <= rows[i - 1].head_mass + 1e-9;
        }
    }
    a.check("u_n_bounded", bounded, "u_n(x) in (-1, 0) for x = " + fmt(x));
    a.check("u_n_nondecreasing", u_mono, "slack 1e-9");
    a.check("total_variation_nondecreasing", tv_mono, "slack 1e-7");
    a.check("head_mass_nonincreasing", mass_mono, "slack 1e-9");
}

void run_arbitrage(Fields& f, Artifacts& a, std::uint64_t seed, int jobs) {
    auto spec = fbm_spec(f);
    const double lambda = f.num("cost", "lambda", 0.05);
    const double entry = f.num("arbitrage", "entry", 0.5);
    const double position = f.num("arbitrage", "position", 1.0);
    const double m = f.num("arbitrage", "m", 1.0);
    const long n_paths = f.integer("arbitrage", "n_paths", 100000);
    if (!std::isfinite(position))
        f.errors.push_back("arbitrage.position: must be finite");
    if (!f.errors.empty()) throw ValidationError(f.errors);

    const auto grid = fbm::covariance(spec);
    const auto paths = fbm::sample_cholesky(grid, static_cast<int>(n_paths), seed, jobs);
    const auto demo =
        diagnostics::arbitrage_demo(paths, lambda, {entry, position}, m);

    nlohmann::json doc{
        {"frictionless",
         {{"mean", demo.frictionless.mean},
          {"min", demo.frictionless.min},
          {"prob_geq_m", demo.frictionless.prob_geq_m},
          {"m", demo.frictionless.m},
          {"se_mean", demo.frictionless.se_mean}}},
        {"with_cost",
         {{"mean", demo.with_cost.mean},
          {"min", demo.with_cost.min},
          {"prob_geq_m", demo.with_cost.prob_geq_m},
          {"se_mean", demo.with_cost.se_mean}}},
        {"mean_gap", demo.mean_gap},
        {"expected_cost_bound", demo.expected_cost_bound}};
    a.file("arbitrage.json", doc.dump(2) + "\n");

    const double se_gain =
        std::sqrt(demo.frictionless.prob_geq_m * (1.0 - demo.frictionless.prob_geq_m) /
                  std::max<long>(n_paths, 1));
    a.check("frictionless_gain_positive",
            demo.frictionless.prob_geq_m > 3.0 * se_gain,
            "P(payoff >= " + fmt(m) + ") = " + fmt(demo.frictionless.prob_geq_m));
    const double se3 = 3.0 * (demo.frictionless.se_mean + demo.with_cost.se_mean);
    a.check("cost_erosion",
            demo.mean_gap >= demo.expected_cost_bound - se3 - 1e-12,
            "mean gap " + fmt(demo.mean_gap) + " vs traded-volume bound " +
                fmt(demo.expected_cost_bound) + " (3-sigma slack " + fmt(se3) + ")");
}

void run_fbm_validate(Fields& f, Artifacts& a, std::uint64_t seed, int jobs) {
    auto base = fbm_spec(f);
    const auto hursts = f.list("fbm-validate", "hursts", {0.25, 0.75});
    const double truncation = f.num("fbm-validate", "truncation", 50.0 * base.horizon);
    const int substeps = static_cast<int>(f.integer("fbm-validate", "substeps", 20));
    const long n_paths = f.integer("fbm-validate", "n_paths", 100000);
    if (!(truncation > 0.0)) f.errors.push_back("fbm-validate.truncation: must be > 0");
    if (substeps < 1) f.errors.push_back("fbm-validate.substeps: must be >= 1");
    if (!f.errors.empty()) throw ValidationError(f.errors);

    std::ostringstream os;
    os << "hurst,i,j,exact,sample,se,z\n" << std::setprecision(17);
    bool all_within = true;
    double worst_z = 0.0;
    for (double h : hursts) {
        fbm::FbmSpec spec = base;
        spec.hurst = h;
        const auto grid = fbm::covariance(spec);
        const auto paths =
            fbm::sample_mvn(spec, truncation, substeps, static_cast<int>(n_paths), seed, jobs);
        const int n = spec.n_steps;
        const long np = paths.n_paths();
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j <= i; ++j) {
                // mean-zero sample covariance with an empirical standard error
                double s1 = 0.0, s2 = 0.0;
                for (long p = 0; p < np; ++p) {
                    const double prod = paths.values(p, i) * paths.values(p, j);
                    s1 += prod;
                    s2 += prod * prod;
                }
                const double mean = s1 / np;
                const double var = std::max(s2 / np - mean * mean, 0.0);
                const double se = std::sqrt(var / np);
                const double z = (mean - grid.cov(i, j)) / std::max(se, 1e-300);
                worst_z = std::max(worst_z, std::abs(z));
                all_within = all_within && std::abs(z) <= 3.0;
                os << h << ',' << i << ',' << j << ',' << grid.cov(i, j) << ',' << mean
                   << ',' << se << ',' << z << '\n';
            }
        }
    }
    a.file("fbm_validate.csv", os.str());
    a.check("cross_validation_3se", all_within,
            "worst |z| = " + fmt(worst_z) + " across all covariance entries");

    // H = 1/2 must reduce to min(s,t) exactly
    fbm::FbmSpec bm = base;
    bm.hurst = 0.5;
    const auto grid = fbm::covariance(bm);
    double worst = 0.0;
    for (int i = 0; i < bm.n_steps; ++i)
        for (int j = 0; j <= i; ++j)
            worst = std::max(worst, std::abs(grid.cov(i, j) - std::min(grid.times[i],
                                                                       grid.times[j])));
    a.check("brownian_covariance_exact", worst <= 1e-14,
            "max |R - min(s,t)| = " + fmt(worst));
}

}  // namespace

bool Config::has(const std::string& section, const std::string& key) const {
    const auto s = sections.find(section);
    return s != sections.end() && s->second.count(key) > 0;
}

std::string Config::get(const std::string& section, const std::string& key,
                        const std::string& fallback) const {
    const auto s = sections.find(section);
    if (s == sections.end()) return fallback;
    const auto k = s->second.find(key);
    return k == s->second.end() ? fallback : k->second;
}

Config parse_config_text(const std::string& text, const std::string& base_dir) {
    Config cfg;
    cfg.raw = text;
    cfg.base_dir = base_dir;
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    std::vector<std::string> errors;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find_first_of("#;");
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') {
                errors.push_back("line " + std::to_string(lineno) + ": unterminated section");
                continue;
            }
            section = trim(line.substr(1, line.size() - 2));
            cfg.sections[section];
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            errors.push_back("line " + std::to_string(lineno) + ": expected key = value");
            continue;
        }
        cfg.sections[section][trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    if (!errors.empty()) throw ValidationError(errors);
    return cfg;
}

Config parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError({"config: cannot open " + path});
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str(), fs::path(path).parent_path().string());
}

std::string content_hash(const std::string& text, std::uint64_t seed) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&](unsigned char c) {
        h ^= c;
        h *= 0x100000001b3ULL;
    };
    for (unsigned char c : text) mix(c);
    for (int i = 0; i < 8; ++i) mix(static_cast<unsigned char>(seed >> (8 * i)));
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

RunResult run(const Config& config, const RunOverrides& overrides) {
    RunResult result;
    Fields f{config, {}};
    const std::string kind = config.get("experiment", "kind");
    static const std::vector<std::string> kinds = {
        "solve",      "shadow-verify", "f-curve",      "stickiness",
        "divergence", "arbitrage-demo", "fbm-validate"};
    if (std::find(kinds.begin(), kinds.end(), kind) == kinds.end()) {
        result.status = 2;
        result.message = "experiment.kind: expected one of solve|shadow-verify|f-curve|"
                         "stickiness|divergence|arbitrage-demo|fbm-validate, got '" +
                         kind + "'";
        return result;
    }

    const bool stochastic =
        kind == "stickiness" || kind == "arbitrage-demo" || kind == "fbm-validate";
    std::uint64_t seed = 0;
    if (overrides.seed) {
        seed = *overrides.seed;
    } else if (config.has("run", "seed")) {
        try {
            seed = std::stoull(config.get("run", "seed"));
        } catch (...) {
            result.status = 2;
            result.message = "run.seed: not an unsigned integer";
            return result;
        }
    } else if (stochastic) {
        result.status = 2;
        result.message = "run.seed: required for stochastic experiment '" + kind + "'";
        return result;
    }
    int jobs = overrides.jobs > 0
                   ? overrides.jobs
                   : static_cast<int>(f.integer("run", "jobs", 1));
    jobs = std::max(1, jobs);
    const std::string out_root =
        !overrides.out_dir.empty() ? overrides.out_dir : config.get("run", "out", "results");

    Artifacts a;
    try {
        if (kind == "solve") run_solve(f, a);
        else if (kind == "shadow-verify") run_shadow_verify(f, a);
        else if (kind == "f-curve") run_f_curve(f, a);
        else if (kind == "stickiness") run_stickiness(f, a, seed, jobs);
        else if (kind == "divergence") run_divergence(f, a);
        else if (kind == "arbitrage-demo") run_arbitrage(f, a, seed, jobs);
        else if (kind == "fbm-validate") run_fbm_validate(f, a, seed, jobs);
    } catch (const ValidationError& e) {
        result.status = 2;
        result.message = e.what();
        return result;
    } catch (const primal::SolverError& e) {
        result.status = 3;
        result.message = std::string("solver failure: ") + e.what();
        return result;
    } catch (const std::exception& e) {
        result.status = 3;
        result.message = std::string("solver failure: ") + e.what();
        return result;
    }

    const std::string hash = content_hash(config.raw, seed);
    const fs::path dir = fs::path(out_root) / hash.substr(0, 12);
    if (fs::exists(dir)) {
        result.status = 2;
        result.message = "output directory " + dir.string() +
                         " already exists; run directories are append-only";
        return result;
    }
    fs::create_directories(dir);
    result.run_dir = dir.string();

    std::ostringstream summary;
    summary << "experiment " << kind << "\n";
    summary << "seed " << seed << "\n";
    summary << "content_hash " << hash << "\n";
    for (const auto& line : a.summary) summary << line << '\n';
    a.file("summary.txt", summary.str());

    nlohmann::json manifest{{"kind", kind},
                            {"seed", seed},
                            {"content_hash", hash},
                            {"config", config.raw}};
    nlohmann::json outputs = nlohmann::json::array();
    for (const auto& [name, _] : a.files) outputs.push_back(name);
    outputs.push_back("manifest.json");
    manifest["outputs"] = outputs;
    a.file("manifest.json", manifest.dump(2) + "\n");

    for (const auto& [name, content] : a.files) {
        std::ofstream out(dir / name, std::ios::binary);
        out << content;
    }

    for (const auto& as : a.assertions)
        if (!as.pass) result.failed.push_back(as.name);
    result.status = result.failed.empty() ? 0 : 1;
    if (!result.failed.empty()) {
        result.message = "failed assertions:";
        for (const auto& n : result.failed) result.message += " " + n;
    }
    return result;
}

}  // namespace treeshadow::experiment
