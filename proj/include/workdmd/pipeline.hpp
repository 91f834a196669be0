#pragma once

#include "workdmd/core.hpp"
#include "workdmd/forecast.hpp"
#include "workdmd/ingest.hpp"
#include "workdmd/rff.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace workdmd {

enum class MetricsSpace { Normalized, Raw };

std::string to_string(MetricsSpace space);
MetricsSpace parse_metrics_space(const std::string& name);

/// Hyperparameters and protocol settings of one online run.
///
/// Periods count slides; 0 means "never after initialisation". The default
/// refits the decoder and the POD basis after every slide and never forces a
/// batch rebuild of the operator.
struct RunConfig {
    Index w = 120;
    Index d = 30;
    Index s = 1024;
    double gamma = 1e-4;
    Index r_requested = 0; // 0 = full numerical rank of the lifted window
    Index H = 1;
    Index decoder_period = 1;
    Index pod_period = 1;
    Index refresh_period = 0;
    std::uint64_t seed = 42;
    MetricsSpace metrics_space = MetricsSpace::Normalized;
    double warmup_ratio = 0.25;
    FrequencyScale rff_scale = FrequencyScale::TwoGamma;
    Index first_exponent = 1;
    double imag_tolerance = 1e-4;

    Index m() const { return w - d; }
    void validate() const;

    bool operator==(const RunConfig&) const = default;
};

struct StepRecord {
    Index step = 0;      // 1-based time of the last observation when the forecast was issued
    MatrixXd prediction; // p x H, in the configured metric space
    MatrixXd truth;      // p x H, NaN for horizons beyond the end of the stream
    Index matured = 0;   // horizons 1..matured have ground truth

    double squared_error() const;
    double absolute_error() const;
    Index entries() const { return prediction.rows() * matured; }
};

struct HorizonError {
    Index horizon = 0;
    double mse = 0;
    double mae = 0;
    Index count = 0;
};

struct EvalReport {
    std::string method;
    RunConfig config;
    Index p = 0;
    Index warmup_length = 0;
    double mse = 0;
    double mae = 0;
    std::vector<double> cumulative_mse;
    std::vector<HorizonError> per_horizon;
    std::int64_t slides = 0;
    std::int64_t total_sample_exposures = 0;
    std::int64_t lift_evaluations = 0;
    std::int64_t reinit_count = 0;
    std::int64_t refresh_count = 0;
    std::int64_t imag_warnings = 0;
    double max_imag_residue = 0;
    double wall_time = 0;
    std::vector<double> slide_seconds;
    double fixed_cost_ratio = 0; // max / min median slide time over five equal blocks
    std::vector<StepRecord> records;
    std::vector<EigenTelemetry> telemetry; // one entry per record, same order
};

/// Mean over all entries of squared / absolute differences.
double mse(const MatrixXd& pred, const MatrixXd& truth);
double mae(const MatrixXd& pred, const MatrixXd& truth);

/// Element k is the squared error over records 1..k divided by their matured
/// entry count, so the last element equals the overall MSE.
std::vector<double> cumulative_error(const std::vector<StepRecord>& records);

/// Single-pass accounting: each warm-up sample once plus one per slide.
std::int64_t exposure_count(std::int64_t warmup_columns, std::int64_t slides);

/// max / min of the median per-slide time over `blocks` equal consecutive blocks.
double fixed_cost_ratio(const std::vector<double>& slide_seconds, int blocks = 5);

/// Warm-up of floor(warmup_ratio * T) steps, then the online loop.
EvalReport run_online(const RawSeries& series, const RunConfig& config);

/// Online loop with an explicit warm-up length.
///
/// The normaliser is fit on the warm-up, the operator is initialised on its
/// last w points, and each online step forecasts H steps from the current
/// state before the next observation is admitted by one slide.
EvalReport run_online_split(const RawSeries& series, Index warmup_length, const RunConfig& config);

struct BatchDmdConfig {
    Index w = 120;
    Index d = 30;
    Index r = 0; // 0 = numerical rank
    Index H = 1;
    double warmup_ratio = 0.25;
    MetricsSpace metrics_space = MetricsSpace::Normalized;

    void validate() const;
};

/// Reference baseline: refits batch DMD on the physical Hankel window at every step.
EvalReport run_batch_dmd(const RawSeries& series, const BatchDmdConfig& config);
EvalReport run_batch_dmd_split(const RawSeries& series, Index warmup_length,
                               const BatchDmdConfig& config);

} // namespace workdmd
