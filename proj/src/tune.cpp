#include "workdmd/tune.hpp"

#include "workdmd/rng.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

namespace workdmd {

namespace {

// Runs task(i) for i in [0, n) on up to `threads` workers. Results are
// written by index, so the outcome does not depend on scheduling.
template <typename Task>
void parallel_for(std::size_t n, unsigned threads, Task&& task)
{
    if (threads == 0) {
        threads = std::max(1u, std::thread::hardware_concurrency());
    }
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) {
            task(i);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> workers;
    workers.reserve(threads);
    for (unsigned w = 0; w < threads; ++w) {
        workers.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                task(i);
            }
        });
    }
}

template <typename T>
const T& pick(StreamRng& rng, const std::vector<T>& choices)
{
    const auto i = rng.integer(0, static_cast<std::int64_t>(choices.size()) - 1);
    return choices[static_cast<std::size_t>(i)];
}

Index as_index(const std::string& parameter, double value)
{
    if (value < 1.0 || std::floor(value) != value) {
        throw InvalidArgument("sweep: " + parameter + " must be a positive integer, got "
                              + std::to_string(value));
    }
    return static_cast<Index>(value);
}

} // namespace

std::vector<CvFold> rolling_cv_split(const RawSeries& warmup, Index k, Index min_train)
{
    detail::require(k >= 1, "rolling_cv_split: k must be >= 1");
    const Index T = warmup.length();
    const Index block = T / (k + 1);
    if (block < 1 || block < min_train) {
        throw InvalidArgument("rolling_cv_split: warm-up of " + std::to_string(T)
                              + " steps is too short for " + std::to_string(k)
                              + " folds; need at least "
                              + std::to_string((k + 1) * std::max<Index>(min_train, 1)) + " steps");
    }
    std::vector<CvFold> folds;
    for (Index i = 1; i <= k; ++i) {
        CvFold fold;
        fold.train_end = i * block;
        fold.validation_end = i == k ? T : (i + 1) * block;
        fold.train = warmup.slice(0, fold.train_end);
        fold.validation = warmup.slice(fold.train_end, fold.validation_end);
        folds.push_back(std::move(fold));
    }
    return folds;
}

SearchSpace SearchSpace::defaults()
{
    SearchSpace space;
    space.r_choices = {10, 20, 30, 40, 64, 96, 128};
    space.d_choices = {10, 20, 30, 40};
    space.w_choices = {30, 60, 90, 120, 150};
    space.s_choices = {256, 512, 1024, 2048};
    space.gamma_min = 1e-6;
    space.gamma_max = 1e-4;
    return space;
}

void SearchSpace::validate() const
{
    detail::require(budget >= 1, "SearchSpace: budget must be >= 1");
    detail::require(folds >= 1, "SearchSpace: folds must be >= 1");
    detail::require(!r_choices.empty() && !d_choices.empty() && !s_choices.empty(),
                    "SearchSpace: r, d and s choice sets must be non-empty");
    detail::require(gamma_min > 0.0 && gamma_min <= gamma_max, "SearchSpace: need 0 < gamma_min <= gamma_max");
    const auto positive = [](const std::vector<Index>& v) {
        return std::all_of(v.begin(), v.end(), [](Index x) { return x >= 1; });
    };
    detail::require(positive(r_choices) && positive(d_choices) && positive(s_choices)
                        && positive(w_choices),
                    "SearchSpace: choices must be positive");
}

std::vector<RunConfig> sample_configs(const SearchSpace& space)
{
    space.validate();
    StreamRng rng(space.seed);
    std::vector<RunConfig> configs;
    const double log_lo = std::log(space.gamma_min);
    const double log_hi = std::log(space.gamma_max);
    for (Index n = 0; n < space.budget; ++n) {
        RunConfig config = space.base;
        bool valid = false;
        for (int attempt = 0; attempt < 1000 && !valid; ++attempt) {
            config.r_requested = pick(rng, space.r_choices);
            config.d = pick(rng, space.d_choices);
            config.w = space.w_choices.empty() ? space.base.w : pick(rng, space.w_choices);
            config.s = pick(rng, space.s_choices);
            config.gamma = std::exp(rng.uniform(log_lo, log_hi));
            valid = config.d < config.w;
        }
        if (!valid) {
            throw InvalidArgument("sample_configs: no valid (w, d) combination in the search space");
        }
        configs.push_back(config);
    }
    return configs;
}

ScoreRow evaluate_config(const std::vector<CvFold>& folds, const RunConfig& config)
{
    ScoreRow row;
    row.config = config;
    try {
        double sum = 0.0;
        for (const auto& fold : folds) {
            RawSeries joined = fold.train;
            joined.values.conservativeResize(Eigen::NoChange, fold.validation_end);
            joined.values.rightCols(fold.validation.length()) = fold.validation.values;
            if (!joined.timestamps.empty()) {
                joined.timestamps.insert(joined.timestamps.end(), fold.validation.timestamps.begin(),
                                         fold.validation.timestamps.end());
            }
            const auto report = run_online_split(joined, fold.train_end, config);
            row.fold_mse.push_back(report.mse);
            sum += report.mse;
        }
        row.mean_mse = sum / static_cast<double>(folds.size());
        if (!std::isfinite(row.mean_mse)) {
            throw NumericalError("non-finite validation MSE");
        }
    } catch (const Error& e) {
        row.failed = true;
        row.error = e.what();
    }
    return row;
}

SearchResult random_search(const RawSeries& warmup, const SearchSpace& space)
{
    const auto configs = sample_configs(space);
    const auto folds = rolling_cv_split(warmup, space.folds, 2);

    SearchResult result;
    result.table.resize(configs.size());
    parallel_for(configs.size(), space.threads,
                 [&](std::size_t i) { result.table[i] = evaluate_config(folds, configs[i]); });

    const ScoreRow* best = nullptr;
    for (const auto& row : result.table) {
        if (row.failed) {
            continue;
        }
        const bool better = best == nullptr || row.mean_mse < best->mean_mse
                            || (row.mean_mse == best->mean_mse
                                && (row.config.s < best->config.s
                                    || (row.config.s == best->config.s
                                        && row.config.r_requested < best->config.r_requested)));
        if (better) {
            best = &row;
        }
    }
    if (best == nullptr) {
        std::string message = "random_search: every configuration failed:";
        for (const auto& row : result.table) {
            message += "\n  " + row.error;
        }
        throw NumericalError(message);
    }
    result.best = best->config;
    return result;
}

bool is_sweep_parameter(const std::string& name)
{
    return name == "w" || name == "s" || name == "gamma" || name == "r";
}

RunConfig override_parameter(const RunConfig& baseline, const std::string& parameter, double value)
{
    RunConfig config = baseline;
    if (parameter == "w") {
        config.w = as_index(parameter, value);
    } else if (parameter == "s") {
        config.s = as_index(parameter, value);
    } else if (parameter == "r") {
        config.r_requested = as_index(parameter, value);
    } else if (parameter == "gamma") {
        detail::require(value > 0.0, "sweep: gamma must be > 0");
        config.gamma = value;
    } else {
        throw InvalidArgument("sweep: unknown parameter '" + parameter + "' (expected w, s, gamma or r)");
    }
    return config;
}

void SweepSpec::validate() const
{
    detail::require(is_sweep_parameter(parameter),
                    "SweepSpec: unknown parameter '" + parameter + "' (expected w, s, gamma or r)");
    detail::require(!values.empty(), "SweepSpec: no values");
    detail::require(!horizons.empty(), "SweepSpec: no horizons");
    baseline.validate();
    for (double v : values) {
        override_parameter(baseline, parameter, v);
    }
}

std::vector<SweepCell> sensitivity_sweep(const RawSeries& series, const SweepSpec& spec)
{
    spec.validate();
    std::vector<SweepCell> grid;
    for (double value : spec.values) {
        for (Index H : spec.horizons) {
            SweepCell cell;
            cell.parameter = spec.parameter;
            cell.value = value;
            cell.H = H;
            cell.config = override_parameter(spec.baseline, spec.parameter, value);
            cell.config.H = H;
            grid.push_back(std::move(cell));
        }
    }
    parallel_for(grid.size(), spec.threads, [&](std::size_t i) {
        auto& cell = grid[i];
        try {
            const auto report = run_online(series, cell.config);
            cell.mse = report.mse;
            cell.mae = report.mae;
        } catch (const Error& e) {
            cell.failed = true;
            cell.error = e.what();
        }
    });
    return grid;
}

} // namespace workdmd
