#include "workdmd/ingest.hpp"

#include "workdmd/rng.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace workdmd {

namespace {

std::string_view trim(std::string_view s)
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    return s;
}

std::vector<std::string_view> split_commas(std::string_view line)
{
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            cells.push_back(trim(line.substr(start)));
            break;
        }
        cells.push_back(trim(line.substr(start, pos - start)));
        start = pos + 1;
    }
    return cells;
}

bool parse_double(std::string_view cell, double& out)
{
    if (cell.empty()) {
        return false;
    }
    if (cell.front() == '+') {
        cell.remove_prefix(1);
    }
    const auto* end = cell.data() + cell.size();
    const auto result = std::from_chars(cell.data(), end, out);
    return result.ec == std::errc() && result.ptr == end && std::isfinite(out);
}

bool parse_integer(const std::string& cell, long long& out)
{
    const auto* end = cell.data() + cell.size();
    const auto result = std::from_chars(cell.data(), end, out);
    return result.ec == std::errc() && result.ptr == end;
}

void check_timestamps(const std::vector<std::string>& stamps, const std::string& source)
{
    std::vector<long long> numeric(stamps.size());
    bool all_integer = true;
    for (std::size_t i = 0; i < stamps.size() && all_integer; ++i) {
        all_integer = parse_integer(stamps[i], numeric[i]);
    }
    for (std::size_t i = 1; i < stamps.size(); ++i) {
        const bool increasing = all_integer ? numeric[i] > numeric[i - 1]
                                            : stamps[i] > stamps[i - 1];
        if (!increasing) {
            throw ParseError(source + ": timestamps not strictly increasing at data row "
                                 + std::to_string(i + 1) + " ('" + stamps[i] + "')",
                             static_cast<long>(i + 1), 1);
        }
    }
}

double tone_value(const std::vector<Tone>& tones, double t)
{
    double v = 0.0;
    for (const auto& tone : tones) {
        v += tone.amplitude
             * std::sin(2.0 * std::numbers::pi * tone.frequency * t + tone.phase);
    }
    return v;
}

const std::vector<Tone>& tones_for(const std::vector<std::vector<Tone>>& tones, Index j)
{
    return tones.size() == 1 ? tones.front() : tones[static_cast<std::size_t>(j)];
}

void check_tones(const std::vector<std::vector<Tone>>& tones, Index p, const char* what)
{
    detail::require(!tones.empty(), std::string("gen_synthetic: ") + what + " is empty");
    detail::require(tones.size() == 1 || static_cast<Index>(tones.size()) == p,
                    std::string("gen_synthetic: ") + what + " must have 1 or p entries");
}

} // namespace

RawSeries RawSeries::slice(Index begin, Index end) const
{
    detail::require(0 <= begin && begin <= end && end <= length(),
                    "RawSeries::slice: range out of bounds");
    RawSeries out;
    out.values = values.middleCols(begin, end - begin);
    out.feature_names = feature_names;
    if (!timestamps.empty()) {
        out.timestamps.assign(timestamps.begin() + begin, timestamps.begin() + end);
    }
    return out;
}

RawSeries parse_csv(const std::string& text, bool has_timestamp_column, const std::string& source)
{
    std::istringstream in(text);
    std::string line;
    long line_no = 0;

    std::vector<std::string_view> header;
    std::string header_line;
    while (std::getline(in, header_line)) {
        ++line_no;
        if (!trim(header_line).empty()) {
            break;
        }
    }
    if (trim(header_line).empty()) {
        throw ParseError(source + ": empty file", 0, 0);
    }
    if (header_line.size() >= 3 && header_line.compare(0, 3, "\xEF\xBB\xBF") == 0) {
        header_line.erase(0, 3);
    }
    header = split_commas(header_line);
    const auto first_feature = has_timestamp_column ? std::size_t{1} : std::size_t{0};
    if (header.size() <= first_feature) {
        throw ParseError(source + ": header has no feature columns", line_no, 0);
    }

    RawSeries series;
    for (std::size_t c = first_feature; c < header.size(); ++c) {
        series.feature_names.emplace_back(header[c]);
    }
    const auto p = static_cast<Index>(series.feature_names.size());

    std::vector<double> flat;
    long data_rows = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) {
            continue;
        }
        const auto cells = split_commas(line);
        if (cells.size() != header.size()) {
            throw ParseError(source + ": line " + std::to_string(line_no) + " has "
                                 + std::to_string(cells.size()) + " cells, expected "
                                 + std::to_string(header.size()),
                             line_no, static_cast<long>(cells.size()));
        }
        if (has_timestamp_column) {
            if (cells[0].empty()) {
                throw ParseError(source + ": missing timestamp at line " + std::to_string(line_no),
                                 line_no, 1);
            }
            series.timestamps.emplace_back(cells[0]);
        }
        for (std::size_t c = first_feature; c < cells.size(); ++c) {
            double v = 0.0;
            if (!parse_double(cells[c], v)) {
                const std::string reason = cells[c].empty() ? "missing value" : "non-numeric cell";
                throw ParseError(source + ": " + reason + " '" + std::string(cells[c])
                                     + "' at line " + std::to_string(line_no) + ", column "
                                     + std::to_string(c + 1) + " (" + std::string(header[c]) + ")",
                                 line_no, static_cast<long>(c + 1));
            }
            flat.push_back(v);
        }
        ++data_rows;
    }
    if (data_rows == 0) {
        throw ParseError(source + ": no data rows", line_no, 0);
    }

    // flat is row-major T x p; RawSeries is p x T.
    series.values = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                                   Eigen::RowMajor>>(flat.data(), data_rows, p)
                        .transpose();
    if (has_timestamp_column) {
        check_timestamps(series.timestamps, source);
    }
    return series;
}

RawSeries load_csv(const std::filesystem::path& path, bool has_timestamp_column)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw InvalidArgument("load_csv: cannot open '" + path.string() + "'");
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_csv(buffer.str(), has_timestamp_column, path.string());
}

std::pair<RawSeries, RawSeries> split_warmup(const RawSeries& series, double ratio)
{
    detail::require(ratio > 0.0 && ratio < 1.0, "split_warmup: ratio must lie in (0, 1)");
    const auto cut = static_cast<Index>(std::floor(ratio * static_cast<double>(series.length())));
    return {series.slice(0, cut), series.slice(cut, series.length())};
}

NormalizationStats fit_normalizer(const RawSeries& warmup)
{
    detail::require(warmup.length() >= 2, "fit_normalizer: warm-up needs at least 2 steps");
    NormalizationStats stats;
    stats.mean = warmup.values.rowwise().mean();
    const MatrixXd centered = warmup.values.colwise() - stats.mean;
    stats.std = (centered.array().square().rowwise().sum()
                 / static_cast<double>(warmup.length()))
                    .sqrt()
                    .max(kStdFloor)
                    .matrix();
    return stats;
}

MatrixXd apply_normalizer(const NormalizationStats& stats, const MatrixXd& values)
{
    detail::require(stats.mean.size() == values.rows() && stats.std.size() == values.rows(),
                    "apply_normalizer: stats dimension does not match feature count");
    return ((values.colwise() - stats.mean).array().colwise() / stats.std.array()).matrix();
}

MatrixXd invert_normalizer(const NormalizationStats& stats, const MatrixXd& values)
{
    detail::require(stats.mean.size() == values.rows() && stats.std.size() == values.rows(),
                    "invert_normalizer: stats dimension does not match feature count");
    return ((values.array().colwise() * stats.std.array()).matrix().colwise() + stats.mean);
}

RawSeries apply_normalizer(const NormalizationStats& stats, const RawSeries& series)
{
    RawSeries out = series;
    out.values = apply_normalizer(stats, series.values);
    return out;
}

RawSeries invert_normalizer(const NormalizationStats& stats, const RawSeries& series)
{
    RawSeries out = series;
    out.values = invert_normalizer(stats, series.values);
    return out;
}

RawSeries gen_synthetic(const SyntheticSpec& spec)
{
    detail::require(spec.T >= 1, "gen_synthetic: T must be >= 1");
    detail::require(spec.p >= 1, "gen_synthetic: p must be >= 1");
    detail::require(spec.noise_std >= 0.0, "gen_synthetic: noise_std must be >= 0");

    RawSeries series;
    series.values.resize(spec.p, spec.T);
    for (Index j = 0; j < spec.p; ++j) {
        series.feature_names.push_back("x" + std::to_string(j));
    }

    switch (spec.kind) {
    case SyntheticKind::SinusoidMix: {
        check_tones(spec.tones, spec.p, "tones");
        for (Index j = 0; j < spec.p; ++j) {
            for (Index t = 0; t < spec.T; ++t) {
                series.values(j, t) = tone_value(tones_for(spec.tones, j), static_cast<double>(t));
            }
        }
        break;
    }
    case SyntheticKind::LinearSystem: {
        detail::require(spec.system.rows() == spec.p && spec.system.cols() == spec.p,
                        "gen_synthetic: linear_system matrix must be p x p");
        detail::require(spec.x0.size() == spec.p, "gen_synthetic: x0 must have length p");
        const double radius = spec.system.eigenvalues().cwiseAbs().maxCoeff();
        if (radius > 1.05) {
            throw InvalidArgument("gen_synthetic: linear_system spectral radius "
                                  + std::to_string(radius) + " exceeds 1.05");
        }
        VectorXd x = spec.x0;
        for (Index t = 0; t < spec.T; ++t) {
            series.values.col(t) = x;
            x = spec.system * x;
        }
        break;
    }
    case SyntheticKind::RegimeShift: {
        check_tones(spec.tones, spec.p, "tones");
        const auto& after = spec.shifted_tones.empty() ? spec.tones : spec.shifted_tones;
        check_tones(after, spec.p, "shifted_tones");
        detail::require(spec.shift_time >= 0, "gen_synthetic: shift_time must be >= 0");
        for (Index j = 0; j < spec.p; ++j) {
            for (Index t = 0; t < spec.T; ++t) {
                const auto tt = static_cast<double>(t);
                series.values(j, t) = t < spec.shift_time
                                          ? tone_value(tones_for(spec.tones, j), tt)
                                          : tone_value(tones_for(after, j), tt) + spec.shift_offset;
            }
        }
        break;
    }
    }

    if (spec.noise_std > 0.0) {
        StreamRng rng(spec.seed);
        for (Index t = 0; t < spec.T; ++t) {
            for (Index j = 0; j < spec.p; ++j) {
                series.values(j, t) += spec.noise_std * rng.gaussian();
            }
        }
    }
    return series;
}

SyntheticKind parse_synthetic_kind(const std::string& name)
{
    if (name == "sinusoid_mix" || name == "sinusoid") {
        return SyntheticKind::SinusoidMix;
    }
    if (name == "linear_system" || name == "linear") {
        return SyntheticKind::LinearSystem;
    }
    if (name == "regime_shift" || name == "regime") {
        return SyntheticKind::RegimeShift;
    }
    throw InvalidArgument("unknown synthetic kind '" + name + "'");
}

std::string to_string(SyntheticKind kind)
{
    switch (kind) {
    case SyntheticKind::SinusoidMix: return "sinusoid_mix";
    case SyntheticKind::LinearSystem: return "linear_system";
    case SyntheticKind::RegimeShift: return "regime_shift";
    }
    return "unknown";
}

} // namespace workdmd
