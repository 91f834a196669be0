#pragma once

#include "workdmd/ingest.hpp"
#include "workdmd/operator.hpp"
#include "workdmd/pipeline.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace workdmd::cli {

enum ExitCode { kSuccess = 0, kRuntimeFailure = 1, kUsageError = 2 };

/// Entry point of the workdmd tool. Artifacts go to --out; results and
/// machine-readable errors go to `out` and `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Named synthetic streams:
///   sinusoid       p=1, periods 24 and 60, noiseless
///   sinusoid_mix   p=3, periods 24 and 60, noise 0.1
///   rotation       2-D rotation by pi/8
///   regime_shift   p=1 two-tone with a mean shift of 2 at T/2
///   spike          zeros with a unit impulse every `period` steps
RawSeries synthetic_preset(const std::string& name, Index T, std::uint64_t seed, Index period = 0);

struct OracleComparison {
    Index slides = 0;
    double max_p_deviation = 0;
    double max_a_deviation = 0;
    Index worst_step = 0; // slide with the largest deviation
    std::int64_t reinit_count = 0;
    std::int64_t refresh_count = 0;
    double epsilon = 0;
};

/// Initialises on the first w columns of `series`, applies `slides` slides and
/// compares (P, A) against batch_oracle at the current eps after every slide.
OracleComparison compare_with_oracle(const RawSeries& series, const RunConfig& config, Index slides,
                                     const OperatorOptions& options);

} // namespace workdmd::cli
