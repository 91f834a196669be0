#include "workdmd/pipeline.hpp"

#include "workdmd/dmd.hpp"
#include "workdmd/embed.hpp"
#include "workdmd/operator.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace workdmd {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start)
{
    return std::chrono::duration<double>(Clock::now() - start).count();
}

// Online kernel DMD model over a normalised p x T stream.
class KernelModel {
public:
    explicit KernelModel(const RunConfig& config) : config_(config)
    {
        options_.refresh_period = config.refresh_period;
        forecast_options_.first_exponent = config.first_exponent;
        forecast_options_.imag_tolerance = config.imag_tolerance;
    }

    void initialize(const MatrixXd& z, Index t)
    {
        const auto block = hankel_block(window_at(z, t, config_.w), config_.d);
        const auto pair = snapshot_pair(block);
        map_ = RffMap<double>::sample(z.rows() * config_.d, config_.s, config_.gamma,
                                      config_.seed, config_.rff_scale);
        state_ = init_batch(pair, map_, options_);
        refresh_basis_and_decoder(true, true);
    }

    MatrixXd forecast(EvalReport& report)
    {
        const auto result = forecast_h(state_, basis_, config_.H, decoder_, config_.d,
                                       forecast_options_);
        report.max_imag_residue = std::max(report.max_imag_residue,
                                           result.physical.max_imag_residue);
        if (result.physical.imag_warning) {
            ++report.imag_warnings;
        }
        report.telemetry.push_back(result.telemetry);
        return result.physical.values;
    }

    void advance(const MatrixXd& z, Index t)
    {
        const VectorXd column = new_hankel_column(z, t, config_.d);
        const auto lifts_before = state_.lift_evaluations;
        try {
            slide(state_, column, map_, options_);
        } catch (const ReinitRequired&) {
            rebuild(state_, options_);
            ++state_.reinit_count;
        }
        if (state_.lift_evaluations != lifts_before + 1) {
            throw std::logic_error("run_online: slide must lift exactly one new column");
        }
        ++slides_;
        const bool decoder_due = config_.decoder_period > 0 && slides_ % config_.decoder_period == 0;
        const bool pod_due = config_.pod_period > 0 && slides_ % config_.pod_period == 0;
        refresh_basis_and_decoder(pod_due, decoder_due);
    }

    const KdmdState<double>& state() const { return state_; }

private:
    void refresh_basis_and_decoder(bool pod, bool decoder)
    {
        if (!pod && !decoder) {
            return;
        }
        const MatrixXd psi_x = state_.psi_x();
        const auto svd = decompose_window<double>(psi_x);
        if (pod) {
            basis_ = pod_basis(svd, config_.r_requested);
        }
        if (decoder) {
            const MatrixXd physical_x = state_.physical_x();
            decoder_ = fit_decoder<double>(physical_x, psi_x, svd);
        }
    }

    RunConfig config_;
    OperatorOptions options_;
    ForecastOptions forecast_options_;
    RffMap<double> map_;
    KdmdState<double> state_;
    PodBasis<double> basis_;
    Decoder<double> decoder_;
    std::int64_t slides_ = 0;
};

// Reference batch DMD refit on the physical window at every step.
class BatchModel {
public:
    explicit BatchModel(const BatchDmdConfig& config) : config_(config) {}

    void initialize(const MatrixXd& z, Index t)
    {
        z_ = &z;
        t_ = t;
    }

    MatrixXd forecast(EvalReport& report)
    {
        const auto pair = snapshot_pair(hankel_block(window_at(*z_, t_, config_.w), config_.d));
        const auto fit = dmd_fit(pair.X, pair.Y, config_.r);
        const Index p = z_->rows();
        CMat<double> x_hat(pair.X.rows(), config_.H);
        for (Index h = 0; h < config_.H; ++h) {
            x_hat.col(h) = dmd_forecast(fit, h + 1);
        }
        const auto physical = extract_physical(x_hat, p, config_.d);
        report.max_imag_residue = std::max(report.max_imag_residue, physical.max_imag_residue);
        if (physical.imag_warning) {
            ++report.imag_warnings;
        }
        EigenTelemetry telemetry;
        telemetry.step = static_cast<std::int64_t>(t_);
        telemetry.rank = fit.rank;
        for (Index i = 0; i < fit.lambda.size(); ++i) {
            telemetry.moduli.push_back(std::abs(fit.lambda(i)));
        }
        telemetry.spectral_radius = telemetry.moduli.empty() ? 0.0 : telemetry.moduli.front();
        report.telemetry.push_back(std::move(telemetry));
        return physical.values;
    }

    void advance(const MatrixXd&, Index t) { t_ = t; }

private:
    BatchDmdConfig config_;
    const MatrixXd* z_ = nullptr;
    Index t_ = 0;
};

void score(EvalReport& report, Index H)
{
    double total_sq = 0.0;
    double total_abs = 0.0;
    Index total = 0;
    std::vector<double> sq(static_cast<std::size_t>(H), 0.0);
    std::vector<double> ab(static_cast<std::size_t>(H), 0.0);
    std::vector<Index> counts(static_cast<std::size_t>(H), 0);
    for (const auto& rec : report.records) {
        for (Index h = 0; h < rec.matured; ++h) {
            const auto diff = (rec.prediction.col(h) - rec.truth.col(h)).array();
            const auto k = static_cast<std::size_t>(h);
            sq[k] += diff.square().sum();
            ab[k] += diff.abs().sum();
            counts[k] += rec.prediction.rows();
        }
        total_sq += rec.squared_error();
        total_abs += rec.absolute_error();
        total += rec.entries();
    }
    if (total == 0) {
        throw NumericalError("run_online: no forecasts matured");
    }
    report.mse = total_sq / static_cast<double>(total);
    report.mae = total_abs / static_cast<double>(total);
    report.per_horizon.clear();
    for (Index h = 0; h < H; ++h) {
        const auto k = static_cast<std::size_t>(h);
        HorizonError e;
        e.horizon = h + 1;
        e.count = counts[k];
        if (counts[k] > 0) {
            e.mse = sq[k] / static_cast<double>(counts[k]);
            e.mae = ab[k] / static_cast<double>(counts[k]);
        }
        report.per_horizon.push_back(e);
    }
    report.cumulative_mse = cumulative_error(report.records);
}

template <typename Model>
void run_protocol(const RawSeries& series, Index warmup_length, Index w, Index H,
                  MetricsSpace space, Model& model, EvalReport& report)
{
    const Index T = series.length();
    const Index p = series.features();
    if (warmup_length < w + 1) {
        throw InvalidArgument("run_online: warm-up of " + std::to_string(warmup_length)
                              + " steps is shorter than w + 1 = " + std::to_string(w + 1));
    }
    if (warmup_length >= T) {
        throw InvalidArgument("run_online: no online steps after the warm-up");
    }

    const auto start = Clock::now();
    const NormalizationStats stats = fit_normalizer(series.slice(0, warmup_length));
    const MatrixXd z = apply_normalizer(stats, series.values);
    const MatrixXd& reference = space == MetricsSpace::Normalized ? z : series.values;

    report.p = p;
    report.warmup_length = warmup_length;
    model.initialize(z, warmup_length);

    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (Index t = warmup_length; t < T; ++t) {
        StepRecord rec;
        rec.step = t;
        MatrixXd prediction;
        try {
            prediction = model.forecast(report);
        } catch (const Error& e) {
            throw NumericalError("run_online: step " + std::to_string(t) + ": " + e.what());
        }
        rec.prediction = space == MetricsSpace::Normalized ? prediction
                                                           : invert_normalizer(stats, prediction);
        rec.matured = std::min(H, T - t);
        rec.truth = MatrixXd::Constant(p, H, nan);
        rec.truth.leftCols(rec.matured) = reference.middleCols(t, rec.matured);
        report.records.push_back(std::move(rec));

        if (t + 1 < T) {
            const auto slide_start = Clock::now();
            try {
                model.advance(z, t + 1);
            } catch (const Error& e) {
                throw NumericalError("run_online: step " + std::to_string(t + 1) + ": " + e.what());
            }
            report.slide_seconds.push_back(seconds_since(slide_start));
            ++report.slides;
        }
    }

    report.total_sample_exposures = exposure_count(warmup_length, report.slides);
    report.fixed_cost_ratio = fixed_cost_ratio(report.slide_seconds);
    score(report, H);
    report.wall_time = seconds_since(start);
}

} // namespace

std::string to_string(MetricsSpace space)
{
    return space == MetricsSpace::Normalized ? "normalized" : "raw";
}

MetricsSpace parse_metrics_space(const std::string& name)
{
    if (name == "normalized") {
        return MetricsSpace::Normalized;
    }
    if (name == "raw") {
        return MetricsSpace::Raw;
    }
    throw InvalidArgument("unknown metrics space '" + name + "' (expected normalized or raw)");
}

void RunConfig::validate() const
{
    detail::require(w >= 2, "RunConfig: w must be >= 2");
    detail::require(d >= 1 && d <= w, "RunConfig: need 1 <= d <= w");
    detail::require(m() >= 1, "RunConfig: m = w - d must be >= 1");
    detail::require(s >= 1, "RunConfig: s must be >= 1");
    detail::require(gamma > 0.0 && std::isfinite(gamma), "RunConfig: gamma must be > 0");
    detail::require(r_requested >= 0, "RunConfig: r must be >= 0");
    detail::require(H >= 1, "RunConfig: H must be >= 1");
    detail::require(decoder_period >= 0 && pod_period >= 0 && refresh_period >= 0,
                    "RunConfig: periods must be >= 0");
    detail::require(warmup_ratio > 0.0 && warmup_ratio < 1.0, "RunConfig: warmup_ratio must lie in (0, 1)");
    detail::require(first_exponent >= 0, "RunConfig: first_exponent must be >= 0");
    detail::require(imag_tolerance >= 0.0, "RunConfig: imag_tolerance must be >= 0");
}

void BatchDmdConfig::validate() const
{
    detail::require(d >= 1 && d < w, "BatchDmdConfig: need 1 <= d < w");
    detail::require(r >= 0, "BatchDmdConfig: r must be >= 0");
    detail::require(H >= 1, "BatchDmdConfig: H must be >= 1");
    detail::require(warmup_ratio > 0.0 && warmup_ratio < 1.0,
                    "BatchDmdConfig: warmup_ratio must lie in (0, 1)");
}

double StepRecord::squared_error() const
{
    if (matured == 0) {
        return 0.0;
    }
    return (prediction.leftCols(matured) - truth.leftCols(matured)).squaredNorm();
}

double StepRecord::absolute_error() const
{
    if (matured == 0) {
        return 0.0;
    }
    return (prediction.leftCols(matured) - truth.leftCols(matured)).cwiseAbs().sum();
}

double mse(const MatrixXd& pred, const MatrixXd& truth)
{
    detail::require(pred.size() > 0, "mse: empty input");
    detail::require(pred.rows() == truth.rows() && pred.cols() == truth.cols(), "mse: shapes differ");
    return (pred - truth).squaredNorm() / static_cast<double>(pred.size());
}

double mae(const MatrixXd& pred, const MatrixXd& truth)
{
    detail::require(pred.size() > 0, "mae: empty input");
    detail::require(pred.rows() == truth.rows() && pred.cols() == truth.cols(), "mae: shapes differ");
    return (pred - truth).cwiseAbs().sum() / static_cast<double>(pred.size());
}

std::vector<double> cumulative_error(const std::vector<StepRecord>& records)
{
    std::vector<double> curve;
    curve.reserve(records.size());
    double sum = 0.0;
    Index count = 0;
    for (const auto& rec : records) {
        sum += rec.squared_error();
        count += rec.entries();
        curve.push_back(count > 0 ? sum / static_cast<double>(count) : 0.0);
    }
    return curve;
}

std::int64_t exposure_count(std::int64_t warmup_columns, std::int64_t slides)
{
    detail::require(warmup_columns >= 0 && slides >= 0, "exposure_count: counts must be >= 0");
    return warmup_columns + slides;
}

double fixed_cost_ratio(const std::vector<double>& slide_seconds, int blocks)
{
    const auto n = static_cast<std::ptrdiff_t>(slide_seconds.size());
    if (blocks < 1 || n < blocks) {
        return 0.0;
    }
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0.0;
    for (int b = 0; b < blocks; ++b) {
        const auto begin = slide_seconds.begin() + n * b / blocks;
        const auto end = slide_seconds.begin() + n * (b + 1) / blocks;
        std::vector<double> block(begin, end);
        auto mid = block.begin() + static_cast<std::ptrdiff_t>(block.size() / 2);
        std::nth_element(block.begin(), mid, block.end());
        lo = std::min(lo, *mid);
        hi = std::max(hi, *mid);
    }
    return lo > 0.0 ? hi / lo : 0.0;
}

EvalReport run_online(const RawSeries& series, const RunConfig& config)
{
    config.validate();
    const auto warmup = static_cast<Index>(
        std::floor(config.warmup_ratio * static_cast<double>(series.length())));
    return run_online_split(series, warmup, config);
}

EvalReport run_online_split(const RawSeries& series, Index warmup_length, const RunConfig& config)
{
    config.validate();
    EvalReport report;
    report.method = "workdmd";
    report.config = config;
    KernelModel model(config);
    run_protocol(series, warmup_length, config.w, config.H, config.metrics_space, model, report);
    report.lift_evaluations = model.state().lift_evaluations;
    report.reinit_count = model.state().reinit_count;
    report.refresh_count = model.state().refresh_count;
    return report;
}

EvalReport run_batch_dmd(const RawSeries& series, const BatchDmdConfig& config)
{
    config.validate();
    const auto warmup = static_cast<Index>(
        std::floor(config.warmup_ratio * static_cast<double>(series.length())));
    return run_batch_dmd_split(series, warmup, config);
}

EvalReport run_batch_dmd_split(const RawSeries& series, Index warmup_length,
                               const BatchDmdConfig& config)
{
    config.validate();
    EvalReport report;
    report.method = "batch_dmd";
    report.config.w = config.w;
    report.config.d = config.d;
    report.config.r_requested = config.r;
    report.config.H = config.H;
    report.config.warmup_ratio = config.warmup_ratio;
    report.config.metrics_space = config.metrics_space;
    BatchModel model(config);
    run_protocol(series, warmup_length, config.w, config.H, config.metrics_space, model, report);
    return report;
}

} // namespace workdmd
