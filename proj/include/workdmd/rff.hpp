#pragma once

#include "workdmd/core.hpp"
#include "workdmd/rng.hpp"

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>

namespace workdmd {

/// Covariance of the random frequencies, parameterised by the kernel bandwidth.
///
/// TwoGamma draws z ~ N(0, 2 gamma I), which makes psi(x)^T psi(y) an unbiased
/// estimate of exp(-gamma |x - y|^2). Gamma draws z ~ N(0, gamma I), i.e. the
/// kernel exp(-gamma |x - y|^2 / 2).
enum class FrequencyScale { TwoGamma, Gamma };

inline std::string to_string(FrequencyScale scale)
{
    return scale == FrequencyScale::TwoGamma ? "2gamma" : "gamma";
}

inline FrequencyScale parse_frequency_scale(const std::string& name)
{
    if (name == "2gamma") {
        return FrequencyScale::TwoGamma;
    }
    if (name == "gamma") {
        return FrequencyScale::Gamma;
    }
    throw InvalidArgument("unknown frequency scale '" + name + "' (expected 2gamma or gamma)");
}

/// Frozen random Fourier feature map psi(x) = sqrt(2/s) [cos(theta_i + z_i^T x)].
///
/// Sampling order from StreamRng(seed): s phases theta_i = 2 pi * uniform(),
/// then the s x input_dim frequency matrix in row-major order, each entry
/// sigma * gaussian() with sigma = sqrt(2 gamma) or sqrt(gamma).
template <typename Scalar>
class RffMap {
public:
    RffMap() = default;

    static RffMap sample(Index input_dim, Index s, double gamma, std::uint64_t seed,
                         FrequencyScale scale = FrequencyScale::TwoGamma)
    {
        detail::require(s >= 1, "RffMap::sample: s must be >= 1");
        detail::require(input_dim >= 1, "RffMap::sample: input_dim must be >= 1");
        detail::require(gamma > 0.0 && std::isfinite(gamma), "RffMap::sample: gamma must be > 0");

        StreamRng rng(seed);
        RffMap map;
        map.gamma_ = gamma;
        map.seed_ = seed;
        map.scale_ = scale;
        map.phases_.resize(s);
        for (Index i = 0; i < s; ++i) {
            map.phases_(i) = static_cast<Scalar>(2.0 * std::numbers::pi * rng.uniform());
        }
        const double sigma = std::sqrt(scale == FrequencyScale::TwoGamma ? 2.0 * gamma : gamma);
        map.frequencies_.resize(s, input_dim);
        for (Index i = 0; i < s; ++i) {
            for (Index k = 0; k < input_dim; ++k) {
                map.frequencies_(i, k) = static_cast<Scalar>(sigma * rng.gaussian());
            }
        }
        map.amplitude_ = std::sqrt(Scalar(2) / static_cast<Scalar>(s));
        return map;
    }

    /// Map with explicit frequencies and phases, mainly for tests and checkpoints.
    static RffMap from_parts(Mat<Scalar> frequencies, Vec<Scalar> phases, double gamma,
                             std::uint64_t seed = 0,
                             FrequencyScale scale = FrequencyScale::TwoGamma)
    {
        detail::require(frequencies.rows() == phases.size() && phases.size() >= 1,
                        "RffMap::from_parts: frequencies rows must match phases");
        detail::require(gamma > 0.0, "RffMap::from_parts: gamma must be > 0");
        RffMap map;
        map.frequencies_ = std::move(frequencies);
        map.phases_ = std::move(phases);
        map.gamma_ = gamma;
        map.seed_ = seed;
        map.scale_ = scale;
        map.amplitude_ = std::sqrt(Scalar(2) / static_cast<Scalar>(map.phases_.size()));
        return map;
    }

    template <typename Derived>
    Vec<Scalar> lift(const Eigen::MatrixBase<Derived>& x) const
    {
        detail::require(x.cols() == 1 && x.rows() == input_dim(),
                        "RffMap::lift: input length does not match the map's input_dim");
        return amplitude_ * ((frequencies_ * x).array() + phases_.array()).cos().matrix();
    }

    template <typename Derived>
    Mat<Scalar> lift_matrix(const Eigen::MatrixBase<Derived>& columns) const
    {
        detail::require(columns.rows() == input_dim(),
                        "RffMap::lift_matrix: row count does not match the map's input_dim");
        Mat<Scalar> arg = frequencies_ * columns;
        arg.colwise() += phases_;
        return amplitude_ * arg.array().cos().matrix();
    }

    Index features() const { return phases_.size(); }
    Index input_dim() const { return frequencies_.cols(); }
    double gamma() const { return gamma_; }
    std::uint64_t seed() const { return seed_; }
    FrequencyScale scale() const { return scale_; }
    const Mat<Scalar>& frequencies() const { return frequencies_; }
    const Vec<Scalar>& phases() const { return phases_; }

    /// Largest magnitude any feature can take, sqrt(2/s).
    Scalar amplitude() const { return amplitude_; }

private:
    Mat<Scalar> frequencies_;
    Vec<Scalar> phases_;
    Scalar amplitude_ = 0;
    double gamma_ = 1.0;
    std::uint64_t seed_ = 0;
    FrequencyScale scale_ = FrequencyScale::TwoGamma;
};

/// exp(-gamma |x - y|^2), the kernel the TwoGamma map estimates.
template <typename DerivedX, typename DerivedY>
typename DerivedX::Scalar kernel_exact(const Eigen::MatrixBase<DerivedX>& x,
                                       const Eigen::MatrixBase<DerivedY>& y, double gamma)
{
    detail::require(x.size() == y.size(), "kernel_exact: vectors differ in length");
    using Scalar = typename DerivedX::Scalar;
    return std::exp(-static_cast<Scalar>(gamma) * (x - y).squaredNorm());
}

} // namespace workdmd
