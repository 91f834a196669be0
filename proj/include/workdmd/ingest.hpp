#pragma once

#include "workdmd/core.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace workdmd {

/// A p-variate series stored feature-major: values(j, t) is feature j at time t.
struct RawSeries {
    MatrixXd values;
    std::vector<std::string> timestamps; // empty when the source had none
    std::vector<std::string> feature_names;

    Index features() const { return values.rows(); }
    Index length() const { return values.cols(); }

    /// Columns [begin, end) as a new series, timestamps and names carried over.
    RawSeries slice(Index begin, Index end) const;
};

struct NormalizationStats {
    VectorXd mean;
    VectorXd std;
};

inline constexpr double kStdFloor = 1e-8;

/// Reads a comma-separated file with one header row. When has_timestamp_column
/// is set the first column is kept verbatim as the timestamp and must be
/// strictly increasing (numerically if every entry is an integer, otherwise
/// lexicographically, which orders ISO-8601 stamps of a single format).
RawSeries load_csv(const std::filesystem::path& path, bool has_timestamp_column);

/// Parses CSV text directly; `source` is only used in error messages.
RawSeries parse_csv(const std::string& text, bool has_timestamp_column,
                    const std::string& source = "<memory>");

/// First floor(ratio * T) steps and the remainder.
std::pair<RawSeries, RawSeries> split_warmup(const RawSeries& series, double ratio);

/// Per-feature mean and population standard deviation, std floored at kStdFloor.
NormalizationStats fit_normalizer(const RawSeries& warmup);

RawSeries apply_normalizer(const NormalizationStats& stats, const RawSeries& series);
RawSeries invert_normalizer(const NormalizationStats& stats, const RawSeries& series);

MatrixXd apply_normalizer(const NormalizationStats& stats, const MatrixXd& values);
MatrixXd invert_normalizer(const NormalizationStats& stats, const MatrixXd& values);

enum class SyntheticKind { SinusoidMix, LinearSystem, RegimeShift };

struct Tone {
    double amplitude = 1.0;
    double frequency = 1.0 / 24.0; // cycles per step
    double phase = 0.0;
};

struct SyntheticSpec {
    SyntheticKind kind = SyntheticKind::SinusoidMix;
    Index p = 1;
    Index T = 100;

    // sinusoid_mix and regime_shift: tones[j] drives feature j; a single entry
    // is broadcast to every feature.
    std::vector<std::vector<Tone>> tones;

    // linear_system: x_{t+1} = M x_t starting from x0.
    MatrixXd system;
    VectorXd x0;

    // regime_shift: from step shift_time on, the generator switches to
    // shifted_tones (falls back to tones when empty) plus a constant offset.
    Index shift_time = 0;
    std::vector<std::vector<Tone>> shifted_tones;
    double shift_offset = 0.0;

    double noise_std = 0.0;
    std::uint64_t seed = 0;
};

/// Deterministic synthetic stream. Time runs t = 0..T-1, so column t of a
/// linear_system series is M^t x0.
RawSeries gen_synthetic(const SyntheticSpec& spec);

SyntheticKind parse_synthetic_kind(const std::string& name);
std::string to_string(SyntheticKind kind);

} // namespace workdmd
