#include "workdmd/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace workdmd {

namespace fs = std::filesystem;

namespace {

std::ofstream open_out(const fs::path& path)
{
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    std::ofstream out(path);
    if (!out) {
        throw Error("cannot open " + path.string() + " for writing");
    }
    return out;
}

std::vector<std::vector<std::string>> read_csv_rows(const fs::path& path,
                                                    const std::vector<std::string>& expected_prefix)
{
    std::ifstream in(path);
    if (!in) {
        throw Error("cannot open " + path.string());
    }
    std::string line;
    if (!std::getline(in, line)) {
        throw ParseError(path.string() + ": empty file", 1, 0);
    }
    const auto header = split_csv_line(line);
    for (std::size_t i = 0; i < expected_prefix.size(); ++i) {
        if (i >= header.size() || header[i] != expected_prefix[i]) {
            throw ParseError(path.string() + ": unexpected header, column " + std::to_string(i + 1)
                                 + " should be '" + expected_prefix[i] + "'",
                             1, static_cast<long>(i + 1));
        }
    }
    std::vector<std::vector<std::string>> rows;
    rows.push_back(header);
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        auto fields = split_csv_line(line);
        if (fields.size() != header.size()) {
            throw ParseError(path.string() + ": line " + std::to_string(rows.size() + 1) + " has "
                                 + std::to_string(fields.size()) + " fields, header has "
                                 + std::to_string(header.size()),
                             static_cast<long>(rows.size() + 1), 0);
        }
        rows.push_back(std::move(fields));
    }
    return rows;
}

template <typename Int>
Int parse_int(const std::string& text, const std::string& context)
{
    Int value{};
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
        throw ParseError(context + ": '" + text + "' is not an integer", 0, 0);
    }
    return value;
}

bool parse_bool(const std::string& text, const std::string& context)
{
    if (text == "0" || text == "false") {
        return false;
    }
    if (text == "1" || text == "true") {
        return true;
    }
    throw ParseError(context + ": '" + text + "' is not a boolean", 0, 0);
}

Index get_index(const Json& j, const std::string& key)
{
    const auto& v = j.at(key);
    if (!v.is_number_integer()) {
        throw InvalidArgument("config key '" + key + "' must be an integer");
    }
    return v.get<Index>();
}

double get_double(const Json& j, const std::string& key)
{
    const auto& v = j.at(key);
    if (!v.is_number()) {
        throw InvalidArgument("config key '" + key + "' must be a number");
    }
    return v.get<double>();
}

std::string get_string(const Json& j, const std::string& key)
{
    const auto& v = j.at(key);
    if (!v.is_string()) {
        throw InvalidArgument("config key '" + key + "' must be a string");
    }
    return v.get<std::string>();
}

void reject_unknown(const Json& j, const std::set<std::string>& known, const std::string& what)
{
    if (!j.is_object()) {
        throw InvalidArgument(what + " must be a JSON object");
    }
    for (const auto& [key, value] : j.items()) {
        if (!known.count(key)) {
            throw InvalidArgument("unknown " + what + " key '" + key + "'");
        }
    }
}

template <typename T>
T field(const Json& j, const std::string& key)
{
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("field '" + key + "': " + e.what(), 0, 0);
    }
}

} // namespace

std::string format_double(double value)
{
    if (std::isnan(value)) {
        return "nan";
    }
    if (std::isinf(value)) {
        return value > 0 ? "inf" : "-inf";
    }
    char buffer[64];
    const auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof buffer, value);
    return std::string(buffer, ptr);
}

double parse_double(const std::string& text, const std::string& context)
{
    if (text == "nan") {
        return std::numeric_limits<double>::quiet_NaN();
    }
    if (text == "inf" || text == "-inf") {
        return text[0] == '-' ? -std::numeric_limits<double>::infinity()
                              : std::numeric_limits<double>::infinity();
    }
    double value = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
        throw ParseError(context + ": '" + text + "' is not a number", 0, 0);
    }
    return value;
}

std::vector<std::string> split_csv_line(const std::string& line)
{
    std::vector<std::string> fields;
    std::string current;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                current += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                current += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(current));
            current.clear();
        } else {
            current += c;
        }
    }
    fields.push_back(std::move(current));
    return fields;
}

std::string csv_quote(const std::string& field)
{
    if (field.find_first_of(",\"\n\r") == std::string::npos) {
        return field;
    }
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') {
            out += '"';
        }
        out += c == '\n' || c == '\r' ? ' ' : c;
    }
    return out + "\"";
}

Json to_json(const RunConfig& c)
{
    return Json{{"w", c.w},
                {"d", c.d},
                {"s", c.s},
                {"gamma", c.gamma},
                {"r", c.r_requested},
                {"H", c.H},
                {"decoder_period", c.decoder_period},
                {"pod_period", c.pod_period},
                {"refresh_period", c.refresh_period},
                {"seed", c.seed},
                {"metrics_space", to_string(c.metrics_space)},
                {"warmup_ratio", c.warmup_ratio},
                {"rff_scale", to_string(c.rff_scale)},
                {"first_exponent", c.first_exponent},
                {"imag_tolerance", c.imag_tolerance}};
}

RunConfig run_config_from_json(const Json& j, RunConfig c)
{
    reject_unknown(j,
                   {"w", "d", "s", "gamma", "r", "H", "decoder_period", "pod_period", "refresh_period",
                    "seed", "metrics_space", "warmup_ratio", "rff_scale", "first_exponent",
                    "imag_tolerance"},
                   "config");
    const auto has = [&](const char* key) { return j.contains(key); };
    if (has("w")) c.w = get_index(j, "w");
    if (has("d")) c.d = get_index(j, "d");
    if (has("s")) c.s = get_index(j, "s");
    if (has("gamma")) c.gamma = get_double(j, "gamma");
    if (has("r")) c.r_requested = get_index(j, "r");
    if (has("H")) c.H = get_index(j, "H");
    if (has("decoder_period")) c.decoder_period = get_index(j, "decoder_period");
    if (has("pod_period")) c.pod_period = get_index(j, "pod_period");
    if (has("refresh_period")) c.refresh_period = get_index(j, "refresh_period");
    if (has("seed")) {
        if (!j.at("seed").is_number_unsigned() && !(j.at("seed").is_number_integer() && j.at("seed").get<std::int64_t>() >= 0)) {
            throw InvalidArgument("config key 'seed' must be a non-negative integer");
        }
        c.seed = j.at("seed").get<std::uint64_t>();
    }
    if (has("metrics_space")) c.metrics_space = parse_metrics_space(get_string(j, "metrics_space"));
    if (has("warmup_ratio")) c.warmup_ratio = get_double(j, "warmup_ratio");
    if (has("rff_scale")) c.rff_scale = parse_frequency_scale(get_string(j, "rff_scale"));
    if (has("first_exponent")) c.first_exponent = get_index(j, "first_exponent");
    if (has("imag_tolerance")) c.imag_tolerance = get_double(j, "imag_tolerance");
    c.validate();
    return c;
}

Json to_json(const BatchDmdConfig& c)
{
    return Json{{"w", c.w},
                {"d", c.d},
                {"r", c.r},
                {"H", c.H},
                {"warmup_ratio", c.warmup_ratio},
                {"metrics_space", to_string(c.metrics_space)}};
}

BatchDmdConfig batch_config_from_json(const Json& j, BatchDmdConfig c)
{
    reject_unknown(j, {"w", "d", "r", "H", "warmup_ratio", "metrics_space"}, "batch config");
    if (j.contains("w")) c.w = get_index(j, "w");
    if (j.contains("d")) c.d = get_index(j, "d");
    if (j.contains("r")) c.r = get_index(j, "r");
    if (j.contains("H")) c.H = get_index(j, "H");
    if (j.contains("warmup_ratio")) c.warmup_ratio = get_double(j, "warmup_ratio");
    if (j.contains("metrics_space")) c.metrics_space = parse_metrics_space(get_string(j, "metrics_space"));
    c.validate();
    return c;
}

Json read_json(const fs::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw Error("cannot open " + path.string());
    }
    try {
        return Json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what(), 0, static_cast<long>(e.byte));
    }
}

void write_json(const fs::path& path, const Json& j)
{
    auto out = open_out(path);
    out << j.dump(2) << '\n';
}

Json summary_json(const EvalReport& report, const Json& config_echo, const std::string& telemetry_path)
{
    Json horizons = Json::array();
    for (const auto& h : report.per_horizon) {
        horizons.push_back({{"H", h.horizon}, {"mse", h.mse}, {"mae", h.mae}, {"count", h.count}});
    }
    return Json{{"method", report.method},
                {"config", config_echo},
                {"p", report.p},
                {"warmup_length", report.warmup_length},
                {"mse", report.mse},
                {"mae", report.mae},
                {"per_horizon", horizons},
                {"slides", report.slides},
                {"total_sample_exposures", report.total_sample_exposures},
                {"lift_evaluations", report.lift_evaluations},
                {"reinit_count", report.reinit_count},
                {"refresh_count", report.refresh_count},
                {"imag_warnings", report.imag_warnings},
                {"max_imag_residue", report.max_imag_residue},
                {"wall_time", report.wall_time},
                {"fixed_cost_ratio", report.fixed_cost_ratio},
                {"telemetry_path", telemetry_path}};
}

Json summary_json(const EvalReport& report, const std::string& telemetry_path)
{
    return summary_json(report, to_json(report.config), telemetry_path);
}

Summary summary_from_json(const Json& j)
{
    Summary s;
    s.method = field<std::string>(j, "method");
    s.config = j.at("config");
    s.p = field<Index>(j, "p");
    s.warmup_length = field<Index>(j, "warmup_length");
    s.mse = field<double>(j, "mse");
    s.mae = field<double>(j, "mae");
    for (const auto& h : j.at("per_horizon")) {
        s.per_horizon.push_back(
            {field<Index>(h, "H"), field<double>(h, "mse"), field<double>(h, "mae"), field<Index>(h, "count")});
    }
    s.slides = field<std::int64_t>(j, "slides");
    s.total_sample_exposures = field<std::int64_t>(j, "total_sample_exposures");
    s.lift_evaluations = field<std::int64_t>(j, "lift_evaluations");
    s.reinit_count = field<std::int64_t>(j, "reinit_count");
    s.refresh_count = field<std::int64_t>(j, "refresh_count");
    s.imag_warnings = field<std::int64_t>(j, "imag_warnings");
    s.max_imag_residue = field<double>(j, "max_imag_residue");
    s.wall_time = field<double>(j, "wall_time");
    s.fixed_cost_ratio = field<double>(j, "fixed_cost_ratio");
    s.telemetry_path = field<std::string>(j, "telemetry_path");
    return s;
}

void write_step_csv(const fs::path& path, const EvalReport& report)
{
    auto out = open_out(path);
    out << "step,horizon,feature,prediction,truth,sq_err,abs_err\n";
    for (const auto& rec : report.records) {
        for (Index h = 0; h < rec.matured; ++h) {
            for (Index j = 0; j < rec.prediction.rows(); ++j) {
                const double pred = rec.prediction(j, h);
                const double truth = rec.truth(j, h);
                const double diff = pred - truth;
                out << rec.step << ',' << h + 1 << ',' << j << ',' << format_double(pred) << ','
                    << format_double(truth) << ',' << format_double(diff * diff) << ','
                    << format_double(std::abs(diff)) << '\n';
            }
        }
    }
}

std::vector<StepRow> load_step_csv(const fs::path& path)
{
    const auto rows = read_csv_rows(path, {"step", "horizon", "feature", "prediction", "truth", "sq_err", "abs_err"});
    std::vector<StepRow> out;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& f = rows[i];
        const std::string ctx = path.string() + " line " + std::to_string(i + 1);
        out.push_back({parse_int<Index>(f[0], ctx), parse_int<Index>(f[1], ctx), parse_int<Index>(f[2], ctx),
                       parse_double(f[3], ctx), parse_double(f[4], ctx), parse_double(f[5], ctx),
                       parse_double(f[6], ctx)});
    }
    return out;
}

void write_cumulative_csv(const fs::path& path, const EvalReport& report)
{
    auto out = open_out(path);
    out << "step,cumulative_mse\n";
    for (std::size_t i = 0; i < report.cumulative_mse.size(); ++i) {
        out << report.records[i].step << ',' << format_double(report.cumulative_mse[i]) << '\n';
    }
}

std::vector<CumulativeRow> load_cumulative_csv(const fs::path& path)
{
    const auto rows = read_csv_rows(path, {"step", "cumulative_mse"});
    std::vector<CumulativeRow> out;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const std::string ctx = path.string() + " line " + std::to_string(i + 1);
        out.push_back({parse_int<Index>(rows[i][0], ctx), parse_double(rows[i][1], ctx)});
    }
    return out;
}

void write_telemetry_csv(const fs::path& path, const std::vector<EigenTelemetry>& telemetry)
{
    auto out = open_out(path);
    out << "step,rank,spectral_radius,w_condition,moduli\n";
    for (const auto& t : telemetry) {
        out << t.step << ',' << t.rank << ',' << format_double(t.spectral_radius) << ','
            << format_double(t.w_condition) << ',';
        for (std::size_t i = 0; i < t.moduli.size(); ++i) {
            out << (i ? ";" : "") << format_double(t.moduli[i]);
        }
        out << '\n';
    }
}

std::vector<EigenTelemetry> load_telemetry_csv(const fs::path& path)
{
    const auto rows = read_csv_rows(path, {"step", "rank", "spectral_radius", "w_condition", "moduli"});
    std::vector<EigenTelemetry> out;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& f = rows[i];
        const std::string ctx = path.string() + " line " + std::to_string(i + 1);
        EigenTelemetry t;
        t.step = parse_int<std::int64_t>(f[0], ctx);
        t.rank = parse_int<Index>(f[1], ctx);
        t.spectral_radius = parse_double(f[2], ctx);
        t.w_condition = parse_double(f[3], ctx);
        std::stringstream moduli(f[4]);
        std::string item;
        while (std::getline(moduli, item, ';')) {
            t.moduli.push_back(parse_double(item, ctx));
        }
        out.push_back(std::move(t));
    }
    return out;
}

RunArtifacts write_run_artifacts(const fs::path& dir, const EvalReport& report, const Json& config_echo)
{
    fs::create_directories(dir);
    RunArtifacts a{dir / "summary.json", dir / "steps.csv", dir / "cumulative.csv", dir / "telemetry.csv"};
    write_step_csv(a.steps, report);
    write_cumulative_csv(a.cumulative, report);
    write_telemetry_csv(a.telemetry, report.telemetry);
    write_json(a.summary, summary_json(report, config_echo, a.telemetry.filename().string()));
    return a;
}

void write_score_table(const fs::path& path, const std::vector<ScoreRow>& table)
{
    std::size_t folds = 0;
    for (const auto& row : table) {
        folds = std::max(folds, row.fold_mse.size());
    }
    auto out = open_out(path);
    out << "w,d,s,gamma,r,seed";
    for (std::size_t k = 0; k < folds; ++k) {
        out << ",fold_" << k + 1;
    }
    out << ",mean_mse,failed,error\n";
    for (const auto& row : table) {
        const auto& c = row.config;
        out << c.w << ',' << c.d << ',' << c.s << ',' << format_double(c.gamma) << ',' << c.r_requested
            << ',' << c.seed;
        for (std::size_t k = 0; k < folds; ++k) {
            out << ',' << (k < row.fold_mse.size() ? format_double(row.fold_mse[k]) : "nan");
        }
        out << ',' << (row.failed ? "nan" : format_double(row.mean_mse)) << ',' << (row.failed ? 1 : 0)
            << ',' << csv_quote(row.error) << '\n';
    }
}

std::vector<ScoreRow> load_score_table(const fs::path& path, const RunConfig& base)
{
    const auto rows = read_csv_rows(path, {"w", "d", "s", "gamma", "r", "seed"});
    const auto& header = rows.front();
    if (header.size() < 9 || header[header.size() - 3] != "mean_mse" || header[header.size() - 2] != "failed"
        || header.back() != "error") {
        throw ParseError(path.string() + ": score table must end with mean_mse,failed,error", 1, 0);
    }
    const std::size_t folds = header.size() - 9;
    std::vector<ScoreRow> out;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& f = rows[i];
        const std::string ctx = path.string() + " line " + std::to_string(i + 1);
        ScoreRow row;
        row.config = base;
        row.config.w = parse_int<Index>(f[0], ctx);
        row.config.d = parse_int<Index>(f[1], ctx);
        row.config.s = parse_int<Index>(f[2], ctx);
        row.config.gamma = parse_double(f[3], ctx);
        row.config.r_requested = parse_int<Index>(f[4], ctx);
        row.config.seed = parse_int<std::uint64_t>(f[5], ctx);
        for (std::size_t k = 0; k < folds; ++k) {
            const double v = parse_double(f[6 + k], ctx);
            if (!std::isnan(v)) {
                row.fold_mse.push_back(v);
            }
        }
        row.failed = parse_bool(f[6 + folds + 1], ctx);
        row.mean_mse = row.failed ? 0.0 : parse_double(f[6 + folds], ctx);
        row.error = f[6 + folds + 2];
        out.push_back(std::move(row));
    }
    return out;
}

void write_sweep_grid(const fs::path& path, const std::vector<SweepCell>& grid)
{
    auto out = open_out(path);
    out << "parameter,value,H,mse,mae,failed,error\n";
    for (const auto& cell : grid) {
        out << cell.parameter << ',' << format_double(cell.value) << ',' << cell.H << ','
            << (cell.failed ? "nan" : format_double(cell.mse)) << ','
            << (cell.failed ? "nan" : format_double(cell.mae)) << ',' << (cell.failed ? 1 : 0) << ','
            << csv_quote(cell.error) << '\n';
    }
}

std::vector<SweepCell> load_sweep_grid(const fs::path& path)
{
    const auto rows = read_csv_rows(path, {"parameter", "value", "H", "mse", "mae", "failed", "error"});
    std::vector<SweepCell> out;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& f = rows[i];
        const std::string ctx = path.string() + " line " + std::to_string(i + 1);
        SweepCell cell;
        cell.parameter = f[0];
        cell.value = parse_double(f[1], ctx);
        cell.H = parse_int<Index>(f[2], ctx);
        cell.failed = parse_bool(f[5], ctx);
        if (!cell.failed) {
            cell.mse = parse_double(f[3], ctx);
            cell.mae = parse_double(f[4], ctx);
        }
        cell.error = f[6];
        out.push_back(std::move(cell));
    }
    return out;
}

Json rff_sidecar(const RffMap<double>& map)
{
    return Json{{"input_dim", map.input_dim()},
                {"features", map.features()},
                {"gamma", map.gamma()},
                {"seed", map.seed()},
                {"scale", to_string(map.scale())}};
}

RffMap<double> rff_from_sidecar(const Json& j)
{
    reject_unknown(j, {"input_dim", "features", "gamma", "seed", "scale"}, "rff sidecar");
    return RffMap<double>::sample(field<Index>(j, "input_dim"), field<Index>(j, "features"),
                                  field<double>(j, "gamma"), field<std::uint64_t>(j, "seed"),
                                  parse_frequency_scale(field<std::string>(j, "scale")));
}

Json matrix_json(const MatrixXd& m)
{
    for (Index i = 0; i < m.size(); ++i) {
        if (!std::isfinite(m.data()[i])) {
            throw NumericalError("cannot serialise a matrix with non-finite entries");
        }
    }
    return Json{{"rows", m.rows()},
                {"cols", m.cols()},
                {"data", std::vector<double>(m.data(), m.data() + m.size())}};
}

MatrixXd matrix_from_json(const Json& j)
{
    const auto rows = field<Index>(j, "rows");
    const auto cols = field<Index>(j, "cols");
    const auto data = field<std::vector<double>>(j, "data");
    if (rows < 0 || cols < 0 || static_cast<Index>(data.size()) != rows * cols) {
        throw ParseError("matrix data has " + std::to_string(data.size()) + " entries, expected "
                             + std::to_string(rows * cols),
                         0, 0);
    }
    return Eigen::Map<const MatrixXd>(data.data(), rows, cols);
}

Json checkpoint_json(const KdmdState<double>& state, const RffMap<double>& map)
{
    return Json{{"rff", rff_sidecar(map)},
                {"epsilon", state.epsilon},
                {"step_count", state.step_count},
                {"slides_since_rebuild", state.slides_since_rebuild},
                {"reinit_count", state.reinit_count},
                {"refresh_count", state.refresh_count},
                {"lift_evaluations", state.lift_evaluations},
                {"P", matrix_json(state.P)},
                {"A", matrix_json(state.A)},
                {"lifted_window", matrix_json(state.lifted_window)},
                {"physical_window", matrix_json(state.physical_window)}};
}

KdmdState<double> state_from_checkpoint(const Json& j)
{
    KdmdState<double> state;
    state.epsilon = field<double>(j, "epsilon");
    state.step_count = field<std::int64_t>(j, "step_count");
    state.slides_since_rebuild = field<std::int64_t>(j, "slides_since_rebuild");
    state.reinit_count = field<std::int64_t>(j, "reinit_count");
    state.refresh_count = field<std::int64_t>(j, "refresh_count");
    state.lift_evaluations = field<std::int64_t>(j, "lift_evaluations");
    state.P = matrix_from_json(j.at("P"));
    state.A = matrix_from_json(j.at("A"));
    state.lifted_window = matrix_from_json(j.at("lifted_window"));
    state.physical_window = matrix_from_json(j.at("physical_window"));
    const Index s = state.P.rows();
    if (state.P.cols() != s || state.A.rows() != s || state.A.cols() != s || state.lifted_window.rows() != s
        || state.physical_window.cols() != state.lifted_window.cols()) {
        throw ParseError("checkpoint matrices have inconsistent shapes", 0, 0);
    }
    return state;
}

} // namespace workdmd
