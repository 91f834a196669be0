#pragma once

#include "workdmd/ingest.hpp"
#include "workdmd/pipeline.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace workdmd {

/// One expanding-origin fold: train on steps [0, train_end), validate on
/// [train_end, validation_end). Indices are 0-based and half-open.
struct CvFold {
    Index train_end = 0;
    Index validation_end = 0;
    RawSeries train;
    RawSeries validation;
};

/// k expanding-origin folds over k+1 equal blocks of the warm-up: fold i
/// trains on the first i blocks and validates on block i+1. Trailing steps
/// that do not fill a block go to the last validation block.
std::vector<CvFold> rolling_cv_split(const RawSeries& warmup, Index k, Index min_train = 1);

struct SearchSpace {
    std::vector<Index> r_choices;
    std::vector<Index> d_choices;
    std::vector<Index> w_choices; // empty: keep base.w
    std::vector<Index> s_choices; // geometric grid, so a uniform pick is log-uniform
    double gamma_min = 1e-6;
    double gamma_max = 1e-4;
    Index budget = 20;
    Index folds = 3;
    std::uint64_t seed = 7;
    RunConfig base;
    unsigned threads = 0; // 0 = hardware concurrency

    /// Ranges centred on the sensitivity-study conclusions.
    static SearchSpace defaults();
    void validate() const;
};

struct ScoreRow {
    RunConfig config;
    std::vector<double> fold_mse;
    double mean_mse = 0;
    bool failed = false;
    std::string error;
};

struct SearchResult {
    RunConfig best;
    std::vector<ScoreRow> table; // in sampling order
};

/// Draws `budget` configurations from the space. Deterministic given the seed.
std::vector<RunConfig> sample_configs(const SearchSpace& space);

/// Mean validation MSE of one configuration across the folds.
ScoreRow evaluate_config(const std::vector<CvFold>& folds, const RunConfig& config);

/// Random search with rolling cross-validation; lowest mean MSE wins, ties
/// going to smaller s, then smaller r.
SearchResult random_search(const RawSeries& warmup, const SearchSpace& space);

struct SweepSpec {
    std::string parameter; // one of w, s, gamma, r
    std::vector<double> values;
    RunConfig baseline;
    std::vector<Index> horizons{1, 24, 48};
    unsigned threads = 0;

    void validate() const;
};

struct SweepCell {
    std::string parameter;
    double value = 0;
    Index H = 0;
    double mse = 0;
    double mae = 0;
    bool failed = false;
    std::string error;
    RunConfig config;
};

/// Baseline with exactly one parameter overridden.
RunConfig override_parameter(const RunConfig& baseline, const std::string& parameter, double value);

/// Runs each (value, H) cell; failures are recorded in-grid and the sweep continues.
std::vector<SweepCell> sensitivity_sweep(const RawSeries& series, const SweepSpec& spec);

bool is_sweep_parameter(const std::string& name);

} // namespace workdmd
