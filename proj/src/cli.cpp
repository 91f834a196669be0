#include "workdmd/cli.hpp"

#include "workdmd/embed.hpp"
#include "workdmd/io.hpp"
#include "workdmd/tune.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <numbers>
#include <optional>
#include <ostream>
#include <sstream>

namespace workdmd::cli {

namespace fs = std::filesystem;

namespace {

class UsageError : public Error {
public:
    using Error::Error;
};

struct Options {
    std::optional<std::string> data;
    std::optional<std::string> synth;
    std::optional<Index> T;
    std::string timestamp = "auto";
    std::optional<Index> w, d, s, r, H, decoder_period, pod_period, refresh_period;
    std::optional<double> gamma, warmup_ratio;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> metrics_space, rff_scale, out, method, config;

    // tune
    Index budget = 20;
    Index folds = 3;
    std::vector<Index> w_values, d_values, s_values, r_values;
    std::optional<double> gamma_min, gamma_max;
    unsigned threads = 0;

    // sweep
    std::string param;
    std::vector<double> values;
    std::vector<Index> horizons{1, 24, 48};

    // compare-oracle
    Index slides = 200;
    bool adversarial = false;
    std::optional<double> epsilon_scale;
    std::optional<double> singular_guard;
    Index period = 0;
};

// Values resolved from --config, before flags are applied.
struct FileConfig {
    std::optional<std::string> data, synth, out, method;
    std::optional<Index> T;
    Json run = Json::object();
};

FileConfig read_config_file(const std::string& path)
{
    if (!fs::exists(path)) {
        throw UsageError("config file not found: " + path);
    }
    Json j;
    try {
        j = read_json(path);
    } catch (const Error& e) {
        throw UsageError(e.what());
    }
    if (!j.is_object()) {
        throw UsageError(path + ": config must be a JSON object");
    }
    FileConfig fc;
    for (const auto& [key, value] : j.items()) {
        if (key == "data" || key == "synth" || key == "out" || key == "method") {
            if (!value.is_string()) {
                throw UsageError(path + ": '" + key + "' must be a string");
            }
            auto& slot = key == "data" ? fc.data : key == "synth" ? fc.synth : key == "out" ? fc.out : fc.method;
            slot = value.get<std::string>();
        } else if (key == "T") {
            if (!value.is_number_integer()) {
                throw UsageError(path + ": 'T' must be an integer");
            }
            fc.T = value.get<Index>();
        } else if (key == "config") {
            fc.run = value;
        } else {
            throw UsageError(path + ": unknown key '" + key + "'");
        }
    }
    return fc;
}

struct Resolved {
    RunConfig config;
    std::optional<std::string> data;
    std::optional<std::string> synth;
    Index T = 2000;
    std::string out = "workdmd_out";
    std::string method = "workdmd";
};

Resolved resolve(const Options& o, const RunConfig& defaults = {})
{
    Resolved r;
    r.config = defaults;
    if (o.config) {
        const auto fc = read_config_file(*o.config);
        r.config = run_config_from_json(fc.run, r.config);
        r.data = fc.data;
        r.synth = fc.synth;
        if (fc.T) r.T = *fc.T;
        if (fc.out) r.out = *fc.out;
        if (fc.method) r.method = *fc.method;
    }
    auto& c = r.config;
    if (o.data) r.data = o.data;
    if (o.synth) r.synth = o.synth;
    if (o.T) r.T = *o.T;
    if (o.out) r.out = *o.out;
    if (o.method) r.method = *o.method;
    if (o.w) c.w = *o.w;
    if (o.d) c.d = *o.d;
    if (o.s) c.s = *o.s;
    if (o.gamma) c.gamma = *o.gamma;
    if (o.r) c.r_requested = *o.r;
    if (o.H) c.H = *o.H;
    if (o.decoder_period) c.decoder_period = *o.decoder_period;
    if (o.pod_period) c.pod_period = *o.pod_period;
    if (o.refresh_period) c.refresh_period = *o.refresh_period;
    if (o.seed) c.seed = *o.seed;
    if (o.warmup_ratio) c.warmup_ratio = *o.warmup_ratio;
    if (o.metrics_space) c.metrics_space = parse_metrics_space(*o.metrics_space);
    if (o.rff_scale) c.rff_scale = parse_frequency_scale(*o.rff_scale);
    c.validate();
    if (r.method != "workdmd" && r.method != "batch_dmd") {
        throw UsageError("unknown method '" + r.method + "' (expected workdmd or batch_dmd)");
    }
    if (r.data && r.synth) {
        throw UsageError("--data and --synth are mutually exclusive");
    }
    if (!r.data && !r.synth) {
        throw UsageError("one of --data or --synth is required");
    }
    if (r.T < 2) {
        throw UsageError("--T must be >= 2");
    }
    return r;
}

bool first_field_is_number(const std::string& path)
{
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    if (!std::getline(in, line)) {
        return false;
    }
    const auto fields = split_csv_line(line);
    try {
        parse_double(fields.front(), path);
        return true;
    } catch (const ParseError&) {
        return false;
    }
}

RawSeries load_source(const Resolved& r, const std::string& timestamp_mode)
{
    if (r.synth) {
        return synthetic_preset(*r.synth, r.T, r.config.seed);
    }
    const std::string& path = *r.data;
    if (!fs::exists(path)) {
        throw UsageError("dataset file not found: " + path);
    }
    bool has_ts = false;
    if (timestamp_mode == "yes") {
        has_ts = true;
    } else if (timestamp_mode == "auto") {
        has_ts = !first_field_is_number(path);
    } else if (timestamp_mode != "no") {
        throw UsageError("--timestamp must be auto, yes or no");
    }
    return load_csv(path, has_ts);
}

Json source_json(const Resolved& r)
{
    return r.data ? Json{{"data", *r.data}} : Json{{"synth", *r.synth}, {"T", r.T}};
}

BatchDmdConfig batch_config(const RunConfig& c)
{
    BatchDmdConfig b;
    b.w = c.w;
    b.d = c.d;
    b.r = c.r_requested;
    b.H = c.H;
    b.warmup_ratio = c.warmup_ratio;
    b.metrics_space = c.metrics_space;
    b.validate();
    return b;
}

int cmd_run(const Options& o, std::ostream& out)
{
    const auto r = resolve(o);
    const auto series = load_source(r, o.timestamp);
    EvalReport report;
    Json echo;
    if (r.method == "batch_dmd") {
        const auto b = batch_config(r.config);
        echo = to_json(b);
        report = run_batch_dmd(series, b);
    } else {
        echo = to_json(r.config);
        report = run_online(series, r.config);
    }
    const auto artifacts = write_run_artifacts(r.out, report, echo);
    auto summary = read_json(artifacts.summary);
    summary["source"] = source_json(r);
    write_json(artifacts.summary, summary);
    out << summary.dump(2) << '\n';
    return kSuccess;
}

int cmd_tune(const Options& o, std::ostream& out)
{
    const auto r = resolve(o);
    const auto series = load_source(r, o.timestamp);
    auto space = SearchSpace::defaults();
    space.base = r.config;
    space.budget = o.budget;
    space.folds = o.folds;
    space.seed = r.config.seed;
    space.threads = o.threads;
    if (!o.w_values.empty()) space.w_choices = o.w_values;
    if (!o.d_values.empty()) space.d_choices = o.d_values;
    if (!o.s_values.empty()) space.s_choices = o.s_values;
    if (!o.r_values.empty()) space.r_choices = o.r_values;
    if (o.gamma_min) space.gamma_min = *o.gamma_min;
    if (o.gamma_max) space.gamma_max = *o.gamma_max;
    space.validate();

    const auto [warmup, online] = split_warmup(series, r.config.warmup_ratio);
    const auto result = random_search(warmup, space);
    fs::create_directories(r.out);
    write_score_table(fs::path(r.out) / "score_table.csv", result.table);
    const Json best = to_json(result.best);
    write_json(fs::path(r.out) / "best_config.json", best);
    out << best.dump(2) << '\n';
    return kSuccess;
}

int cmd_sweep(const Options& o, std::ostream& out)
{
    const auto r = resolve(o);
    if (!is_sweep_parameter(o.param)) {
        throw UsageError("--param must be one of w, s, gamma, r (got '" + o.param + "')");
    }
    if (o.values.empty()) {
        throw UsageError("--values is required");
    }
    SweepSpec spec;
    spec.parameter = o.param;
    spec.values = o.values;
    spec.baseline = r.config;
    spec.horizons = o.horizons;
    spec.threads = o.threads;
    spec.validate();
    const auto series = load_source(r, o.timestamp);
    const auto grid = sensitivity_sweep(series, spec);
    const auto path = fs::path(r.out) / ("sweep_" + o.param + ".csv");
    write_sweep_grid(path, grid);

    Json cells = Json::array();
    bool any_ok = false;
    for (const auto& cell : grid) {
        any_ok = any_ok || !cell.failed;
        Json c{{"value", cell.value}, {"H", cell.H}, {"failed", cell.failed}};
        if (cell.failed) {
            c["error"] = cell.error;
        } else {
            c["mse"] = cell.mse;
            c["mae"] = cell.mae;
        }
        cells.push_back(std::move(c));
    }
    out << Json{{"parameter", o.param}, {"grid", path.string()}, {"cells", cells}}.dump(2) << '\n';
    if (!any_ok) {
        throw NumericalError("sweep: every cell failed");
    }
    return kSuccess;
}

int cmd_compare_oracle(const Options& o, std::ostream& out)
{
    RunConfig defaults;
    defaults.w = 60;
    defaults.d = 10;
    defaults.s = 64;
    defaults.gamma = 1e-3;
    Options opts = o;
    if (!opts.data && !opts.synth) {
        opts.synth = o.adversarial ? "spike" : "sinusoid_mix";
    }
    const auto r = resolve(opts, defaults);
    if (o.slides < 1) {
        throw UsageError("--slides must be >= 1");
    }
    OperatorOptions options;
    options.refresh_period = r.config.refresh_period;
    options.epsilon_scale = o.epsilon_scale.value_or(options.epsilon_scale);
    options.singular_guard = o.singular_guard.value_or(o.adversarial ? 1e-4 : options.singular_guard);

    RawSeries series;
    const Index needed = r.config.w + o.slides;
    if (r.synth) {
        const Index period = o.period > 0 ? o.period : r.config.w + r.config.d / 2 + 1;
        series = synthetic_preset(*r.synth, std::max(needed, r.T), r.config.seed, period);
    } else {
        series = load_source(r, o.timestamp);
    }
    const auto cmp = compare_with_oracle(series, r.config, o.slides, options);
    constexpr double threshold = 1e-6;
    const double worst = std::max(cmp.max_p_deviation, cmp.max_a_deviation);
    Json report{{"slides", cmp.slides},
                {"max_p_deviation", cmp.max_p_deviation},
                {"max_a_deviation", cmp.max_a_deviation},
                {"worst_step", cmp.worst_step},
                {"reinit_count", cmp.reinit_count},
                {"refresh_count", cmp.refresh_count},
                {"epsilon", cmp.epsilon},
                {"epsilon_scale", options.epsilon_scale},
                {"singular_guard", options.singular_guard},
                {"threshold", threshold},
                {"passed", worst <= threshold},
                {"config", to_json(r.config)},
                {"source", source_json(r)}};
    if (o.out) {
        write_json(fs::path(*o.out) / "compare_oracle.json", report);
    }
    out << report.dump(2) << '\n';
    if (!(worst <= threshold)) {
        throw NumericalError("oracle deviation " + format_double(worst) + " exceeds "
                             + format_double(threshold) + " at step " + std::to_string(cmp.worst_step));
    }
    return kSuccess;
}

void add_common(CLI::App* app, Options& o)
{
    app->add_option("--data", o.data, "CSV dataset (one header row)");
    app->add_option("--synth", o.synth, "synthetic stream: sinusoid, sinusoid_mix, rotation, regime_shift, spike");
    app->add_option("--T", o.T, "synthetic stream length (default 2000)");
    app->add_option("--timestamp", o.timestamp, "first CSV column is a timestamp: auto, yes, no");
    app->add_option("--config", o.config, "JSON config file; flags override its values");
    app->add_option("--w", o.w, "window length");
    app->add_option("--d", o.d, "delay-embedding depth");
    app->add_option("--s", o.s, "random feature count");
    app->add_option("--gamma", o.gamma, "kernel bandwidth");
    app->add_option("--r", o.r, "POD rank, 0 = numerical rank");
    app->add_option("--H", o.H, "forecast horizon");
    app->add_option("--decoder-period", o.decoder_period, "slides between decoder refits, 0 = never");
    app->add_option("--pod-period", o.pod_period, "slides between POD refits, 0 = never");
    app->add_option("--refresh-period", o.refresh_period, "slides between batch rebuilds, 0 = never");
    app->add_option("--seed", o.seed, "seed for every random draw (default 42)");
    app->add_option("--metrics-space", o.metrics_space, "normalized or raw");
    app->add_option("--warmup-ratio", o.warmup_ratio, "warm-up fraction (default 0.25)");
    app->add_option("--rff-scale", o.rff_scale, "frequency covariance: 2gamma or gamma");
    app->add_option("--out", o.out, "output directory");
    app->add_option("--method", o.method, "workdmd or batch_dmd");
    app->add_option("--threads", o.threads, "worker threads, 0 = hardware concurrency");
}

std::string error_json(int code, const std::string& kind, const std::string& message)
{
    return Json{{"error", {{"exit_code", code}, {"kind", kind}, {"message", message}}}}.dump();
}

} // namespace

RawSeries synthetic_preset(const std::string& name, Index T, std::uint64_t seed, Index period)
{
    const std::vector<Tone> two_tone{{1.0, 1.0 / 24.0, 0.0}, {0.5, 1.0 / 60.0, 0.3}};
    SyntheticSpec spec;
    spec.T = T;
    spec.seed = seed;
    if (name == "sinusoid") {
        spec.kind = SyntheticKind::SinusoidMix;
        spec.tones = {two_tone};
    } else if (name == "sinusoid_mix") {
        spec.kind = SyntheticKind::SinusoidMix;
        spec.p = 3;
        spec.tones = {two_tone};
        spec.noise_std = 0.1;
    } else if (name == "rotation") {
        const double phi = std::numbers::pi / 8.0;
        spec.kind = SyntheticKind::LinearSystem;
        spec.p = 2;
        spec.system.resize(2, 2);
        spec.system << std::cos(phi), -std::sin(phi), std::sin(phi), std::cos(phi);
        spec.x0 = VectorXd::Unit(2, 0);
    } else if (name == "regime_shift") {
        spec.kind = SyntheticKind::RegimeShift;
        spec.tones = {two_tone};
        spec.shift_time = T / 2;
        spec.shift_offset = 2.0;
    } else if (name == "spike") {
        detail::require(T >= 1, "synthetic_preset: T must be >= 1");
        const Index every = period > 0 ? period : 100;
        RawSeries series;
        series.values = MatrixXd::Zero(1, T);
        for (Index t = every - 1; t < T; t += every) {
            series.values(0, t) = 1.0;
        }
        series.feature_names = {"x0"};
        return series;
    } else {
        throw UsageError("unknown synthetic stream '" + name
                         + "' (expected sinusoid, sinusoid_mix, rotation, regime_shift or spike)");
    }
    return gen_synthetic(spec);
}

OracleComparison compare_with_oracle(const RawSeries& series, const RunConfig& config, Index slides,
                                     const OperatorOptions& options)
{
    config.validate();
    detail::require(slides >= 1, "compare_with_oracle: slides must be >= 1");
    if (series.length() < config.w + slides) {
        throw InvalidArgument("compare_with_oracle: need " + std::to_string(config.w + slides)
                              + " steps, series has " + std::to_string(series.length()));
    }
    const auto stats = fit_normalizer(series.slice(0, config.w));
    const MatrixXd z = apply_normalizer(stats, series.values);
    const auto pair = snapshot_pair(hankel_block(window_at(z, config.w, config.w), config.d));
    const auto map = RffMap<double>::sample(z.rows() * config.d, config.s, config.gamma, config.seed,
                                            config.rff_scale);
    auto state = init_batch(pair, map, options);

    OracleComparison cmp;
    for (Index k = 1; k <= slides; ++k) {
        const VectorXd column = new_hankel_column(z, config.w + k, config.d);
        try {
            slide(state, column, map, options);
        } catch (const ReinitRequired&) {
            rebuild(state, options);
            ++state.reinit_count;
        }
        const auto oracle = batch_oracle<double>(state.psi_x(), state.psi_y(), state.epsilon);
        const double dp = relative_frobenius(state.P, oracle.P);
        const double da = relative_frobenius(state.A, oracle.A);
        if (std::max(dp, da) > std::max(cmp.max_p_deviation, cmp.max_a_deviation) || k == 1) {
            cmp.worst_step = k;
        }
        cmp.max_p_deviation = std::max(cmp.max_p_deviation, dp);
        cmp.max_a_deviation = std::max(cmp.max_a_deviation, da);
        cmp.slides = k;
    }
    cmp.reinit_count = state.reinit_count;
    cmp.refresh_count = state.refresh_count;
    cmp.epsilon = state.epsilon;
    return cmp;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Online random-feature kernel DMD forecaster"};
    app.require_subcommand(1);
    Options o;
    auto* run_cmd = app.add_subcommand("run", "online evaluation with artifacts");
    auto* tune_cmd = app.add_subcommand("tune", "random search with rolling cross-validation on the warm-up");
    auto* sweep_cmd = app.add_subcommand("sweep", "one-parameter sensitivity sweep");
    auto* oracle_cmd = app.add_subcommand("compare-oracle", "rank-2 updates against batch recomputation");
    for (auto* cmd : {run_cmd, tune_cmd, sweep_cmd, oracle_cmd}) {
        add_common(cmd, o);
    }
    tune_cmd->add_option("--budget", o.budget, "sampled configurations (default 20)");
    tune_cmd->add_option("--folds", o.folds, "rolling folds (default 3)");
    tune_cmd->add_option("--w-values", o.w_values, "window choices")->delimiter(',');
    tune_cmd->add_option("--d-values", o.d_values, "depth choices")->delimiter(',');
    tune_cmd->add_option("--s-values", o.s_values, "feature-count choices")->delimiter(',');
    tune_cmd->add_option("--r-values", o.r_values, "rank choices")->delimiter(',');
    tune_cmd->add_option("--gamma-min", o.gamma_min, "lower gamma bound");
    tune_cmd->add_option("--gamma-max", o.gamma_max, "upper gamma bound");
    sweep_cmd->add_option("--param", o.param, "w, s, gamma or r")->required();
    sweep_cmd->add_option("--values", o.values, "comma-separated values")->delimiter(',')->required();
    sweep_cmd->add_option("--horizons", o.horizons, "comma-separated horizons (default 1,24,48)")
        ->delimiter(',');
    oracle_cmd->add_option("--slides", o.slides, "number of slides (default 200)");
    oracle_cmd->add_flag("--adversarial", o.adversarial, "isolated-spike stream with near-singular updates");
    oracle_cmd->add_option("--epsilon-scale", o.epsilon_scale, "eps / |G|_2 (default 1e-6)");
    oracle_cmd->add_option("--singular-guard", o.singular_guard,
                           "minimum rcond of the 2x2 update system (default 1e-12, 1e-4 adversarial)");
    oracle_cmd->add_option("--period", o.period, "spike period of the adversarial stream");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kSuccess;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kSuccess;
    } catch (const CLI::ParseError& e) {
        err << error_json(kUsageError, "usage", e.what()) << '\n';
        return kUsageError;
    }

    try {
        if (run_cmd->parsed()) return cmd_run(o, out);
        if (tune_cmd->parsed()) return cmd_tune(o, out);
        if (sweep_cmd->parsed()) return cmd_sweep(o, out);
        return cmd_compare_oracle(o, out);
    } catch (const UsageError& e) {
        err << error_json(kUsageError, "usage", e.what()) << '\n';
        return kUsageError;
    } catch (const InvalidArgument& e) {
        err << error_json(kUsageError, "config", e.what()) << '\n';
        return kUsageError;
    } catch (const std::exception& e) {
        err << error_json(kRuntimeFailure, "runtime", e.what()) << '\n';
        return kRuntimeFailure;
    }
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    std::vector<const char*> argv{"workdmd"};
    for (const auto& a : args) {
        argv.push_back(a.c_str());
    }
    return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

} // namespace workdmd::cli
