#include "maplab/cli.hpp"

#include "maplab/errors.hpp"
#include "maplab/fixtures.hpp"
#include "maplab/fourier.hpp"
#include "maplab/io.hpp"
#include "maplab/limit_checks.hpp"
#include "maplab/mestim.hpp"
#include "maplab/montecarlo.hpp"

#include <CLI11.hpp>

#include <bit>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <functional>
#include <sstream>

namespace maplab::cli {

namespace {

using io::json;

struct Source {
    std::string spec_file;
    std::string fixture;

    void add_to(CLI::App* app) {
        app->add_option("--spec", spec_file, "spec JSON file")->check(CLI::ExistingFile);
        app->add_option("--fixture", fixture, "built-in fixture name");
    }
    json describe() const {
        return spec_file.empty() ? json{{"fixture", fixture}} : json{{"spec_file", spec_file}};
    }
};

struct Output {
    std::string out;
    std::string csv;
    int threads = 0;

    void add_to(CLI::App* app, bool csv_table = true) {
        app->add_option("--out", out, "report path (stdout when absent)");
        if (csv_table) app->add_option("--csv", csv, "per-record CSV path");
        app->add_option("--threads", threads, "worker cap (default MAPLAB_THREADS, else 1)");
    }
};

struct Loaded {
    std::optional<MapSpec> discrete;
    std::shared_ptr<const CtMapSpec> ct;
};

Loaded load(const Source& src) {
    if (src.spec_file.empty() == src.fixture.empty()) throw ConfigError("give exactly one of --spec and --fixture");
    Loaded l;
    if (!src.fixture.empty()) {
        if (!has_fixture(src.fixture)) throw ConfigError("unknown fixture '" + src.fixture + "'");
        const auto& info = *std::find_if(fixture_catalog().begin(), fixture_catalog().end(),
                                         [&](const FixtureInfo& f) { return f.name == src.fixture; });
        if (info.estimation_problem) throw ConfigError("'" + src.fixture + "' is an estimation problem; use mestimate");
        if (info.continuous_time) l.ct = ct_fixture(src.fixture);
        l.discrete = fixture(src.fixture);
        return l;
    }
    const json j = io::read_json_file(src.spec_file);
    if (io::is_ct_json(j)) {
        l.ct = io::ct_spec_from_json(j);
        l.discrete = ct_sample_skeleton(l.ct);
    } else {
        l.discrete = io::spec_from_json(j);
    }
    return l;
}

json vec_json(const Vector& v) {
    return io::to_json(v);
}

std::string iso_time() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    return buf;
}

std::string csv_of(const json& records) {
    if (!records.is_array() || records.empty()) return "";
    std::vector<std::string> keys;
    for (const auto& [k, v] : records.front().items()) {
        if (!v.is_structured()) keys.push_back(k);
    }
    std::ostringstream s;
    for (std::size_t i = 0; i < keys.size(); ++i) s << (i ? "," : "") << keys[i];
    s << "\n";
    for (const auto& r : records) {
        for (std::size_t i = 0; i < keys.size(); ++i) {
            s << (i ? "," : "");
            if (r.contains(keys[i]) && !r.at(keys[i]).is_null()) {
                const auto& v = r.at(keys[i]);
                s << (v.is_string() ? v.get<std::string>() : v.dump());
            }
        }
        s << "\n";
    }
    return s.str();
}

// Writes the report (atomically when a path is given), its CSV and a metadata
// sidecar carrying everything that may differ between identical runs.
int emit(json report, bool pass, const Output& o, std::ostream& out) {
    report["verdict"] = pass ? "pass" : "fail";
    const std::string text = report.dump(2) + "\n";
    if (o.out.empty()) {
        out << text;
    } else {
        io::write_atomic(o.out, text);
        const json meta = {{"generated_at", iso_time()},
                           {"threads", resolve_threads(o.threads)},
                           {"report_hash", io::content_hash(report)}};
        io::write_atomic(o.out + ".meta.json", meta.dump(2) + "\n");
    }
    if (!o.csv.empty() && report.contains("records")) io::write_atomic(o.csv, csv_of(report.at("records")));
    return pass ? 0 : 1;
}

json base_report(const std::string& command, const std::string& spec_hash, const json& config,
                 std::vector<std::uint64_t> seeds) {
    return {{"command", command}, {"spec_hash", spec_hash}, {"config", config}, {"seeds", seeds}};
}

json optional_json(const std::optional<double>& v) {
    return v ? json(*v) : json(nullptr);
}

json comparison_json(const GaussianComparison& r) {
    return {{"n", r.n},
            {"sample_size", r.sample_size},
            {"sigma_used", r.sigma_used},
            {"kolmogorov", r.kolmogorov},
            {"be_constant", r.be_constant},
            {"edgeworth_residual", optional_json(r.edgeworth_residual)},
            {"edgeworth_residual_no_bias", optional_json(r.edgeworth_residual_no_bias)},
            {"bias", r.bias},
            {"se", r.se},
            {"cdf_source", to_string(r.cdf_source)}};
}

json comparisons(const std::vector<GaussianComparison>& rs) {
    json a = json::array();
    for (const auto& r : rs) a.push_back(comparison_json(r));
    return a;
}

std::optional<Vector> parse_init(const std::string& text) {
    if (text.empty()) return std::nullopt;
    try {
        return io::vector_from_json(json::parse(text));
    } catch (const json::exception& e) {
        throw ConfigError(std::string("--init is not a JSON vector: ") + e.what());
    }
}

// ---------------------------------------------------------------------------

struct Analyze {
    Source src;
    Output o;
    int t_max = 10;

    int run(std::ostream& out) {
        const auto l = load(src);
        const MapSpec& spec = *l.discrete;
        const auto table = spectral_gap_report(spec.kernel(), std::max(2, t_max));
        json r = base_report("analyze", io::spec_hash(spec), json{{"source", src.describe()}, {"t_max", t_max}}, {});
        r["pi"] = vec_json(spec.kernel().pi());
        r["reversible"] = check_reversible(spec.kernel());
        r["mixing_bound"] = table.bound;
        r["gap_present"] = table.gap_present;
        r["rate_fit"] = table.fit ? json{{"C", table.fit->C}, {"epsilon", table.fit->epsilon}} : json(nullptr);
        r["centering_shift"] = vec_json(spec.centering_shift());
        const auto lat = detect_lattice(spec);
        r["lattice"] = {{"verdict", lat.verdict == LatticeReport::Verdict::Lattice      ? "lattice"
                                    : lat.verdict == LatticeReport::Verdict::Nonlattice ? "nonlattice"
                                                                                        : "undetermined"},
                        {"shift", lat.shift},
                        {"span", lat.span}};
        if (table.gap_present) {
            r["Sigma"] = io::to_json(variance_series(spec));
            if (spec.dim() == 1) {
                r["sigma2"] = variance_series_scalar(spec);
                r["mu3"] = third_cumulant_rate(spec);
                const auto dv = derivatives_at_zero(spec);
                r["derivatives"] = {{"sigma2", dv.sigma2}, {"mu3", optional_json(dv.mu3)}};
            }
        }
        if (l.ct) r["continuous_time"] = {{"pi", vec_json(l.ct->pi())}, {"drift", l.ct->drift()}};
        return emit(r, table.gap_present, o, out);
    }
};

struct ScanLambda {
    Source src;
    Output o;
    double zmin = -1.0, zmax = 1.0;
    int points = 41;
    double kmin = 0.1, kmax = 10.0;
    int kpoints = 400;

    int run(std::ostream& out) {
        const auto l = load(src);
        const MapSpec& spec = *l.discrete;
        if (points < 2 || kpoints < 2) throw ConfigError("grids need at least two points");
        std::vector<double> grid;
        for (int i = 0; i < points; ++i) grid.push_back(zmin + (zmax - zmin) * i / (points - 1));
        if (std::find(grid.begin(), grid.end(), 0.0) == grid.end()) grid.push_back(0.0);
        std::sort(grid.begin(), grid.end());
        const auto summary = lambda_branch(spec, grid);
        json recs = json::array();
        for (const auto& p : summary.points) {
            recs.push_back({{"zeta", p.zeta(0)},
                            {"lambda_re", p.lambda.real()},
                            {"lambda_im", p.lambda.imag()},
                            {"lambda_abs", std::abs(p.lambda)},
                            {"kappa", p.kappa},
                            {"separation", p.separation}});
        }
        std::vector<double> K;
        for (int i = 0; i < kpoints; ++i) K.push_back(kmin + (kmax - kmin) * i / (kpoints - 1));
        const auto scan = nonlattice_scan(spec, K);
        const json config = {{"source", src.describe()}, {"zeta_min", zmin}, {"zeta_max", zmax}, {"points", points},
                             {"k_min", kmin}, {"k_max", kmax}, {"k_points", kpoints}};
        json r = base_report("scan-lambda", io::spec_hash(spec), config, {});
        r["records"] = recs;
        r["kappa_hat"] = summary.kappa_hat;
        r["min_separation"] = summary.min_separation;
        r["nonlattice_scan"] = {{"rho_hat", scan.rho_hat}, {"worst_zeta", scan.worst_zeta(0)}, {"nonlattice", scan.nonlattice}};
        return emit(r, true, o, out);
    }
};

struct Simulate {
    Source src;
    Output o;
    long n = 0;
    double t = 0.0;
    long paths = 0;
    std::uint64_t seed = 0;
    std::string init;

    int run(std::ostream&) {
        if (o.out.empty()) throw ConfigError("simulate needs --out");
        if ((n > 0) == (t > 0.0)) throw ConfigError("give exactly one of --n and --t");
        const auto l = load(src);
        const auto mu = parse_init(init);
        SimulationOptions opt;
        opt.threads = o.threads;
        TrajectoryBatch batch;
        if (t > 0.0) {
            if (!l.ct) throw ConfigError("--t needs a continuous-time spec");
            batch = simulate_ct(*l.ct, t, paths, seed, mu, opt);
        } else {
            batch = simulate_discrete(*l.discrete, n, paths, seed, mu, opt);
        }
        std::string bytes(batch.terminal_y.size() * sizeof(double), '\0');
        for (std::size_t i = 0; i < batch.terminal_y.size(); ++i) {
            auto bits = std::bit_cast<std::uint64_t>(batch.terminal_y[i]);
            if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
            std::memcpy(bytes.data() + i * sizeof(double), &bits, sizeof bits);
        }
        io::write_atomic(o.out, bytes);
        json side = {{"command", "simulate"},
                     {"spec_hash", batch.spec_id},
                     {"config", {{"source", src.describe()}, {"init", mu ? vec_json(*mu) : json(nullptr)}}},
                     {"n_steps", t > 0.0 ? json(nullptr) : json(batch.n_steps)},
                     {"t_horizon", batch.t_horizon},
                     {"n_paths", batch.n_paths},
                     {"seed", batch.seed},
                     {"d", batch.d},
                     {"format", "float64 little-endian, n_paths x d row-major"}};
        Output side_out = o;
        side_out.out = o.out + ".json";
        side_out.csv.clear();
        return emit(side, true, side_out, std::cout);
    }
};

struct Verify {
    std::string command;
    Source src;
    Output o;
    std::vector<long> n_list = {256, 1024, 4096};
    std::vector<double> t_list = {64, 256, 1024};
    long paths = 100000;
    std::uint64_t seed = 0;
    double clt_constant = 1.0;
    std::string init;
    std::string cdf_source = "monte_carlo";
    bool allow_lattice = false;
    double center = 0.0, half_width = 1.0, height = 1.0;
    int lags = 10;

    json config() const {
        json c = {{"source", src.describe()}, {"paths", paths}, {"seed", seed}};
        if (command == "verify-ct") {
            c["t_list"] = t_list;
        } else if (command == "mixing-bound") {
            c["lags"] = lags;
        } else {
            c["n_list"] = n_list;
        }
        if (command == "verify-clt" || command == "verify-ct") c["clt_constant"] = clt_constant;
        if (command == "verify-edgeworth") {
            c["init"] = init.empty() ? json(nullptr) : json::parse(init);
            c["cdf_source"] = cdf_source;
            c["allow_lattice"] = allow_lattice;
        }
        if (command == "verify-llt") {
            c["bump"] = {{"center", center}, {"half_width", half_width}, {"height", height}};
            c["allow_lattice"] = allow_lattice;
        }
        return c;
    }

    int run(std::ostream& out) {
        const auto l = load(src);
        CheckOptions co;
        co.threads = o.threads;
        co.clt_constant = clt_constant;
        if (command == "verify-ct") {
            if (!l.ct) throw ConfigError("verify-ct needs a continuous-time spec");
            const auto rep = ct_limit_check(*l.ct, t_list, paths, seed, co);
            json r = base_report(command, io::spec_hash(*l.ct), config(), {seed});
            r["records"] = comparisons(rep.records);
            json frac = json::array();
            for (const auto& f : rep.fractional) {
                frac.push_back({{"t", f.t}, {"second_moment", f.second_moment}, {"bound", f.bound}, {"se", f.se}, {"within", f.within}});
            }
            r["fractional_part"] = frac;
            r["monotone_trend"] = rep.monotone_trend;
            r["final_within_bound"] = rep.final_within_bound;
            r["no_growth"] = rep.no_growth;
            return emit(r, rep.verdict, o, out);
        }
        const MapSpec& spec = *l.discrete;
        json r = base_report(command, io::spec_hash(spec), config(), {seed});
        if (command == "verify-clt") {
            const auto rep = clt_check(spec, n_list, paths, seed, co);
            r["records"] = comparisons(rep.records);
            r["monotone_trend"] = rep.monotone_trend;
            r["final_within_bound"] = rep.final_within_bound;
            return emit(r, rep.verdict, o, out);
        }
        if (command == "verify-be") {
            const auto rep = berry_esseen_check(spec, n_list, paths, seed, co);
            r["records"] = comparisons(rep.records);
            r["B_hat"] = rep.B_hat;
            r["flatness_ratio"] = std::isfinite(rep.flatness_ratio) ? json(rep.flatness_ratio) : json(nullptr);
            r["no_growth"] = rep.no_growth;
            return emit(r, rep.verdict, o, out);
        }
        if (command == "verify-edgeworth") {
            EdgeworthOptions eo;
            eo.mu = parse_init(init);
            if (cdf_source == "fourier_inversion") {
                eo.cdf_source = CdfSource::FourierInversion;
            } else if (cdf_source != "monte_carlo") {
                throw ConfigError("--cdf-source must be monte_carlo or fourier_inversion");
            }
            eo.allow_lattice = allow_lattice;
            eo.threads = o.threads;
            const auto rep = edgeworth_check(spec, n_list, paths, seed, eo);
            r["records"] = comparisons(rep.records);
            r["sigma"] = rep.sigma;
            r["mu3"] = rep.mu3;
            r["b_mu"] = rep.b_mu;
            r["lattice"] = rep.lattice;
            r["decreasing"] = rep.decreasing;
            r["correction_helps"] = rep.correction_helps;
            r["note"] = rep.note;
            return emit(r, rep.verdict, o, out);
        }
        if (command == "verify-llt") {
            LltOptions lo;
            lo.bump = {center, half_width, height};
            lo.allow_lattice = allow_lattice;
            lo.threads = o.threads;
            const auto rep = llt_check(spec, n_list, paths, seed, lo);
            json recs = json::array();
            for (const auto& x : rep.records) {
                recs.push_back({{"n", x.n}, {"estimate", x.estimate}, {"target", x.target}, {"se", x.se},
                                {"ratio", optional_json(x.ratio)}, {"ratio_se", x.ratio_se}, {"covers_one", x.covers_one}});
            }
            r["records"] = recs;
            return emit(r, rep.verdict, o, out);
        }
        // mixing-bound
        const auto rep = rho_mixing_check(spec, lags, paths, seed, o.threads);
        json recs = json::array();
        for (const auto& x : rep.records) {
            recs.push_back({{"lag", x.lag}, {"empirical", x.empirical}, {"bound", x.bound}, {"se", x.se}, {"within", x.within}});
        }
        r["records"] = recs;
        r["skipped"] = rep.skipped;
        r["vacuous"] = rep.vacuous;
        return emit(r, rep.verdict, o, out);
    }
};

MEstimationProblem problem_from_json(const json& j) {
    const std::string family = j.value("family", "mean_contrast");
    if (family != "mean_contrast") throw ConfigError("unknown contrast family '" + family + "'");
    if (!j.contains("xi") || !j.contains("theta_grid") || !j.contains("alpha_domain")) {
        throw ConfigError("problem needs xi, alpha_domain and theta_grid");
    }
    const auto dom = j.at("alpha_domain").get<std::vector<double>>();
    if (dom.size() != 2) throw ConfigError("alpha_domain must be [lo, hi]");
    std::vector<std::pair<double, StochasticKernel>> grid;
    for (const auto& t : j.at("theta_grid")) {
        grid.emplace_back(t.at("theta").get<double>(), StochasticKernel(io::matrix_from_json(t.at("P"))));
    }
    auto problem = build_problem(mean_contrast_family(io::matrix_from_json(j.at("xi")), dom[0], dom[1],
                                                      j.value("scale", 1.0)),
                                 grid);
    if (j.contains("start")) {
        for (auto& pt : problem.points) pt.start = io::vector_from_json(j.at("start"));
    }
    return problem;
}

struct Mestimate {
    std::string problem_file;
    std::string fixture;
    Output o;
    std::vector<long> n_list = {256, 1024, 4096};
    long reps = 100000;
    std::uint64_t seed = 0;
    std::vector<std::size_t> thetas;

    int run(std::ostream& out) {
        if (problem_file.empty() == fixture.empty()) throw ConfigError("give exactly one of --problem and --fixture");
        json source;
        MEstimationProblem problem = [&] {
            if (!fixture.empty()) {
                if (fixture != "mean_contrast_problem") throw ConfigError("unknown estimation problem '" + fixture + "'");
                source = {{"fixture", fixture}};
                return mean_contrast_problem();
            }
            const json j = io::read_json_file(problem_file);
            source = {{"problem", j}};
            return problem_from_json(j);
        }();
        const auto rep = estimator_be_check(problem, thetas, n_list, reps, seed, o.threads);

        json table = json::array();
        for (const auto& pt : problem.points) {
            table.push_back({{"theta", pt.theta}, {"alpha0", pt.alpha0}, {"m", pt.m}, {"sigma1", pt.sigma1},
                             {"sigma2", pt.sigma2}, {"tau", pt.tau}, {"eq16_max", pt.eq16_max},
                             {"eq16_at_1024", pt.eq16_at_1024}, {"eq16_bounded", pt.eq16_bounded}});
        }
        json recs = json::array();
        for (const auto& x : rep.records) {
            recs.push_back({{"theta_index", x.theta_index}, {"theta", problem.points[x.theta_index].theta},
                            {"n", x.n}, {"replications", x.replications}, {"failures", x.failures},
                            {"distance", x.distance}, {"scaled_distance", std::sqrt(static_cast<double>(x.n)) * x.distance},
                            {"se", x.se}, {"gamma_hat", x.gamma_hat}});
        }
        const json config = {{"source", source}, {"n_list", n_list}, {"reps", reps}, {"seed", seed}, {"thetas", thetas}};
        json r = base_report("mestimate", io::content_hash(source), config, {seed});
        r["theta_table"] = table;
        r["records"] = recs;
        r["max_scaled_distance"] = rep.max_scaled_distance;
        r["gap"] = {{"C", problem.gap_C}, {"kappa", problem.gap_kappa}};
        r["d"] = problem.d;
        r["no_growth"] = rep.no_growth;
        r["gamma_nonincreasing"] = rep.gamma_nonincreasing;
        r["C_hat"] = rep.C_hat;
        r["note"] = "C_hat is the empirical max of sqrt(n) distance / (1 + sqrt(n) gamma_hat), not a bound on the true constant";
        return emit(r, rep.verdict, o, out);
    }
};

std::optional<json> manifest_entry(const std::string& name) {
#ifdef MAPLAB_FIXTURE_MANIFEST
    std::error_code ec;
    if (std::filesystem::exists(MAPLAB_FIXTURE_MANIFEST, ec)) {
        const json m = io::read_json_file(MAPLAB_FIXTURE_MANIFEST);
        if (m.contains(name)) return m.at(name);
    }
#endif
    (void)name;
    return std::nullopt;
}

json fixture_document(const std::string& name) {
    if (!has_fixture(name)) throw ConfigError("unknown fixture '" + name + "'");
    const auto& info = *std::find_if(fixture_catalog().begin(), fixture_catalog().end(),
                                     [&](const FixtureInfo& f) { return f.name == name; });
    if (info.continuous_time) return io::ct_spec_to_json(*ct_fixture(name, false));
    if (info.estimation_problem) {
        json grid = json::array();
        for (double a : {0.2, 0.25, 0.3, 0.35, 0.4}) {
            grid.push_back({{"theta", a}, {"P", {{1.0 - a, a}, {0.2, 0.8}}}});
        }
        return {{"family", "mean_contrast"}, {"xi", {{0.0, 1.0}, {0.0, 1.0}}}, {"alpha_domain", {-1.0, 2.0}},
                {"theta_grid", grid}};
    }
    return io::spec_to_json(fixture(name, true));
}

}  // namespace

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Markov additive process limit-theorem laboratory", "maplab"};
    app.require_subcommand(1);

    auto* fx = app.add_subcommand("fixtures", "built-in fixture registry");
    fx->require_subcommand(1);
    auto* fx_list = fx->add_subcommand("list", "print fixture names");
    std::string fx_name, fx_out;
    auto* fx_show = fx->add_subcommand("show", "print a fixture document and its oracle values");
    fx_show->add_option("name", fx_name)->required();
    auto* fx_export = fx->add_subcommand("export", "write a fixture document usable with --spec or --problem");
    fx_export->add_option("name", fx_name)->required();
    fx_export->add_option("--out", fx_out)->required();

    Analyze analyze;
    auto* an = app.add_subcommand("analyze", "spectral gap, asymptotic variance, lattice structure");
    analyze.src.add_to(an);
    analyze.o.add_to(an, false);
    an->add_option("--t-max", analyze.t_max, "mixing table length");

    ScanLambda scan;
    auto* sl = app.add_subcommand("scan-lambda", "dominant eigenvalue branch and nonlattice scan (d = 1)");
    scan.src.add_to(sl);
    scan.o.add_to(sl);
    sl->add_option("--zeta-min", scan.zmin);
    sl->add_option("--zeta-max", scan.zmax);
    sl->add_option("--points", scan.points);
    sl->add_option("--k-min", scan.kmin);
    sl->add_option("--k-max", scan.kmax);
    sl->add_option("--k-points", scan.kpoints);

    Simulate sim;
    auto* sm = app.add_subcommand("simulate", "terminal values as raw float64 plus a JSON sidecar");
    sim.src.add_to(sm);
    sm->add_option("--out", sim.o.out, "binary output path")->required();
    sm->add_option("--threads", sim.o.threads);
    sm->add_option("--n", sim.n, "discrete horizon");
    sm->add_option("--t", sim.t, "continuous horizon");
    sm->add_option("--paths", sim.paths)->required()->check(CLI::PositiveNumber);
    sm->add_option("--seed", sim.seed)->required();
    sm->add_option("--init", sim.init, "initial law as a JSON vector");

    std::vector<std::unique_ptr<Verify>> verifiers;
    std::map<CLI::App*, Verify*> verify_of;
    for (const char* name : {"verify-clt", "verify-be", "verify-edgeworth", "verify-llt", "verify-ct", "mixing-bound"}) {
        auto v = std::make_unique<Verify>();
        v->command = name;
        auto* sc = app.add_subcommand(name, std::string(name) + " check");
        v->src.add_to(sc);
        v->o.add_to(sc);
        sc->add_option("--paths", v->paths)->check(CLI::PositiveNumber);
        sc->add_option("--seed", v->seed)->required();
        const std::string cmd = name;
        if (cmd == "verify-ct") {
            sc->add_option("--t-list", v->t_list)->delimiter(',');
        } else if (cmd == "mixing-bound") {
            sc->add_option("--lags", v->lags);
        } else {
            sc->add_option("--n-list", v->n_list)->delimiter(',');
        }
        if (cmd == "verify-clt" || cmd == "verify-ct") sc->add_option("--clt-constant", v->clt_constant);
        if (cmd == "verify-edgeworth") {
            sc->add_option("--init", v->init, "initial law as a JSON vector");
            sc->add_option("--cdf-source", v->cdf_source, "monte_carlo or fourier_inversion");
        }
        if (cmd == "verify-edgeworth" || cmd == "verify-llt") sc->add_flag("--allow-lattice", v->allow_lattice);
        if (cmd == "verify-llt") {
            sc->add_option("--center", v->center);
            sc->add_option("--half-width", v->half_width);
            sc->add_option("--height", v->height);
        }
        verify_of[sc] = v.get();
        verifiers.push_back(std::move(v));
    }

    Mestimate mest;
    auto* me = app.add_subcommand("mestimate", "M-estimator Berry-Esseen check over a parameter grid");
    me->add_option("--problem", mest.problem_file)->check(CLI::ExistingFile);
    me->add_option("--fixture", mest.fixture);
    mest.o.add_to(me);
    me->add_option("--n-list", mest.n_list)->delimiter(',');
    me->add_option("--reps", mest.reps)->check(CLI::PositiveNumber);
    me->add_option("--seed", mest.seed)->required();
    me->add_option("--theta", mest.thetas, "parameter indices (all when absent)")->delimiter(',');

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << json{{"error", "usage"}, {"message", e.what()}}.dump() << "\n";
        return 2;
    }

    try {
        if (fx_list->parsed()) {
            for (const auto& f : fixture_catalog()) out << f.name << "\n";
            return 0;
        }
        if (fx_show->parsed()) {
            json doc = {{"name", fx_name}, {"document", fixture_document(fx_name)}};
            if (auto m = manifest_entry(fx_name)) doc["oracle"] = *m;
            out << doc.dump(2) << "\n";
            return 0;
        }
        if (fx_export->parsed()) {
            io::write_atomic(fx_out, fixture_document(fx_name).dump(2) + "\n");
            return 0;
        }
        if (an->parsed()) return analyze.run(out);
        if (sl->parsed()) return scan.run(out);
        if (sm->parsed()) return sim.run(out);
        if (me->parsed()) return mest.run(out);
        for (auto& [sc, v] : verify_of) {
            if (sc->parsed()) return v->run(out);
        }
    } catch (const Error& e) {
        err << json{{"error", std::string(to_string(e.kind()))}, {"message", e.what()}}.dump() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << json{{"error", "config"}, {"message", e.what()}}.dump() << "\n";
        return 2;
    }
    return 2;
}

}  // namespace maplab::cli
