#pragma once

// Artifact writers and their loaders. Doubles are written in shortest
// round-trip form, so every file parses back to the values that were written.

#include "workdmd/operator.hpp"
#include "workdmd/pipeline.hpp"
#include "workdmd/rff.hpp"
#include "workdmd/tune.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace workdmd {

using Json = nlohmann::ordered_json;

std::string format_double(double value);
double parse_double(const std::string& text, const std::string& context);

Json to_json(const RunConfig& config);

/// Overlays the keys of `j` onto `base`. Unknown keys and wrongly typed
/// values throw InvalidArgument; the result is validated.
RunConfig run_config_from_json(const Json& j, RunConfig base = {});

Json to_json(const BatchDmdConfig& config);
BatchDmdConfig batch_config_from_json(const Json& j, BatchDmdConfig base = {});

Json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const Json& j);

struct Summary {
    std::string method;
    Json config;
    Index p = 0;
    Index warmup_length = 0;
    double mse = 0;
    double mae = 0;
    std::vector<HorizonError> per_horizon;
    std::int64_t slides = 0;
    std::int64_t total_sample_exposures = 0;
    std::int64_t lift_evaluations = 0;
    std::int64_t reinit_count = 0;
    std::int64_t refresh_count = 0;
    std::int64_t imag_warnings = 0;
    double max_imag_residue = 0;
    double wall_time = 0;
    double fixed_cost_ratio = 0;
    std::string telemetry_path;
};

/// The summary record of a report. The config echo is the RunConfig for
/// online runs and the BatchDmdConfig fields for method "batch_dmd".
Json summary_json(const EvalReport& report, const Json& config_echo, const std::string& telemetry_path);
Json summary_json(const EvalReport& report, const std::string& telemetry_path);
Summary summary_from_json(const Json& j);

struct StepRow {
    Index step = 0;
    Index horizon = 0;
    Index feature = 0;
    double prediction = 0;
    double truth = 0;
    double sq_err = 0;
    double abs_err = 0;
};

/// One row per matured (step, horizon, feature) entry.
void write_step_csv(const std::filesystem::path& path, const EvalReport& report);
std::vector<StepRow> load_step_csv(const std::filesystem::path& path);

struct CumulativeRow {
    Index step = 0;
    double cumulative_mse = 0;
};

void write_cumulative_csv(const std::filesystem::path& path, const EvalReport& report);
std::vector<CumulativeRow> load_cumulative_csv(const std::filesystem::path& path);

/// step, rank, spectral_radius, w_condition, moduli (';'-separated, descending).
void write_telemetry_csv(const std::filesystem::path& path, const std::vector<EigenTelemetry>& telemetry);
std::vector<EigenTelemetry> load_telemetry_csv(const std::filesystem::path& path);

struct RunArtifacts {
    std::filesystem::path summary;
    std::filesystem::path steps;
    std::filesystem::path cumulative;
    std::filesystem::path telemetry;
};

/// summary.json, steps.csv, cumulative.csv and telemetry.csv under `dir`.
RunArtifacts write_run_artifacts(const std::filesystem::path& dir, const EvalReport& report,
                                 const Json& config_echo);

/// Columns: w, d, s, gamma, r, seed, fold_1..fold_k, mean_mse, failed, error.
void write_score_table(const std::filesystem::path& path, const std::vector<ScoreRow>& table);
std::vector<ScoreRow> load_score_table(const std::filesystem::path& path, const RunConfig& base = {});

/// Columns: parameter, value, H, mse, mae, failed, error.
void write_sweep_grid(const std::filesystem::path& path, const std::vector<SweepCell>& grid);
std::vector<SweepCell> load_sweep_grid(const std::filesystem::path& path);

/// Seed, dimensions, gamma and scale convention; enough to regenerate the map.
Json rff_sidecar(const RffMap<double>& map);
RffMap<double> rff_from_sidecar(const Json& j);

/// Full operator state. Matrices are stored column-major with their shape.
Json checkpoint_json(const KdmdState<double>& state, const RffMap<double>& map);
KdmdState<double> state_from_checkpoint(const Json& j);

Json matrix_json(const MatrixXd& m);
MatrixXd matrix_from_json(const Json& j);

/// Splits one CSV line on commas. Fields may be double-quoted; "" escapes a quote.
std::vector<std::string> split_csv_line(const std::string& line);
std::string csv_quote(const std::string& field);

} // namespace workdmd
