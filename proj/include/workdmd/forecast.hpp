#pragma once

// H-step forecasting from the feature-space operator:
//
//   K      = Q_r^T A Q_r                       (POD reduction)
//   K W_r  = W_r Lambda_r                      (reduced eigenpairs)
//   W_r b0 = Q_r^T psi(x_{m+1})                (amplitudes of the newest column)
//   E      = [lambda_i^h]                      (Vandermonde propagation)
//   Psi    = Q_r W_r (b0 .* E)                 (feature-space trajectories)
//   X_hat  = D Psi,  D = X Psi_X^+             (decoding)
//
// The p forecast rows are the newest lag of each Hankel feature block.

#include "workdmd/core.hpp"
#include "workdmd/embed.hpp"
#include "workdmd/operator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

namespace workdmd {

inline constexpr double kRankCutoff = 1e-10;        // sigma_i > sigma_1 * cutoff counts toward rank
inline constexpr double kPinvCutoff = 1e-12;        // pseudo-inverse singular-value cutoff
inline constexpr double kSingularBasisRcond = 1e-16; // W_r below this reciprocal condition is rejected
inline constexpr double kIllConditionedRcond = 1e-8; // telemetry flag only

template <typename Scalar>
struct WindowSvd {
    Mat<Scalar> U;
    Vec<Scalar> sigma;
    Mat<Scalar> V;

    Index numerical_rank(double cutoff = kRankCutoff) const
    {
        if (sigma.size() == 0 || !(sigma(0) > Scalar(0))) {
            return 0;
        }
        const Scalar threshold = sigma(0) * static_cast<Scalar>(cutoff);
        return static_cast<Index>((sigma.array() > threshold).count());
    }
};

/// Thin SVD of the lifted snapshot matrix, shared by the POD basis and the decoder.
template <typename Scalar>
WindowSvd<Scalar> decompose_window(const Eigen::Ref<const Mat<Scalar>>& psi_x)
{
    detail::require(psi_x.cols() >= 1, "decompose_window: need at least one snapshot");
    if (!psi_x.allFinite()) {
        throw NumericalError("decompose_window: non-finite snapshots");
    }
    Eigen::BDCSVD<Mat<Scalar>> svd(psi_x, Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (svd.info() != Eigen::Success) {
        throw NumericalError("decompose_window: SVD did not converge");
    }
    return {svd.matrixU(), svd.singularValues(), svd.matrixV()};
}

template <typename Scalar>
struct PodBasis {
    Mat<Scalar> Q;               // s x r, orthonormal columns
    Vec<Scalar> singular_values; // length r, descending
    Index rank = 0;
};

/// Leading r left singular vectors; r = min(r_requested, numerical rank).
/// r_requested <= 0 keeps the full numerical rank.
template <typename Scalar>
PodBasis<Scalar> pod_basis(const WindowSvd<Scalar>& svd, Index r_requested)
{
    const Index rank = svd.numerical_rank();
    if (rank == 0) {
        throw NumericalError("pod_basis: lifted snapshots are all zero");
    }
    const Index r = r_requested > 0 ? std::min(r_requested, rank) : rank;
    return {svd.U.leftCols(r), svd.sigma.head(r), r};
}

template <typename Scalar>
PodBasis<Scalar> pod_basis(const Mat<Scalar>& psi_x, Index r_requested)
{
    return pod_basis(decompose_window<Scalar>(psi_x), r_requested);
}

template <typename Scalar>
Mat<Scalar> reduce(const Mat<Scalar>& A, const PodBasis<Scalar>& basis)
{
    detail::require(A.rows() == A.cols() && A.cols() == basis.Q.rows(),
                    "reduce: A and the POD basis do not conform");
    return basis.Q.transpose() * (A * basis.Q);
}

template <typename Scalar>
struct ReducedEig {
    CMat<Scalar> W;      // r x r eigenvectors, columns in the order of Lambda
    CVec<Scalar> lambda; // sorted by descending modulus
    Scalar rcond = 0;    // reciprocal condition estimate of W
    Scalar condition_estimate = 0;
    Eigen::PartialPivLU<CMat<Scalar>> lu;

    bool ill_conditioned() const { return rcond < static_cast<Scalar>(kIllConditionedRcond); }
};

/// Reciprocal condition estimate of an LU factorisation, 0 for an exactly
/// singular factor (PartialPivLU::rcond() reports 1 when a pivot is zero).
template <typename Scalar>
Scalar lu_rcond(const Eigen::PartialPivLU<CMat<Scalar>>& lu)
{
    if ((lu.matrixLU().diagonal().array().abs() == Scalar(0)).any()) {
        return Scalar(0);
    }
    const Scalar rcond = lu.rcond();
    return std::isfinite(static_cast<double>(rcond)) ? rcond : Scalar(0);
}

template <typename Scalar>
ReducedEig<Scalar> eig_reduced(const Mat<Scalar>& K)
{
    detail::require(K.rows() == K.cols() && K.rows() >= 1, "eig_reduced: K must be square, r >= 1");
    if (!K.allFinite()) {
        throw NumericalError("eig_reduced: reduced operator has non-finite entries");
    }
    Eigen::EigenSolver<Mat<Scalar>> solver(K, true);
    if (solver.info() != Eigen::Success) {
        throw NumericalError("eig_reduced: eigensolver did not converge");
    }
    const CVec<Scalar> values = solver.eigenvalues();
    const CMat<Scalar> vectors = solver.eigenvectors();

    const Index r = K.rows();
    std::vector<Index> order(static_cast<std::size_t>(r));
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
        return std::abs(values(a)) > std::abs(values(b));
    });

    ReducedEig<Scalar> eig;
    eig.lambda.resize(r);
    eig.W.resize(r, r);
    for (Index i = 0; i < r; ++i) {
        eig.lambda(i) = values(order[static_cast<std::size_t>(i)]);
        eig.W.col(i) = vectors.col(order[static_cast<std::size_t>(i)]);
    }
    eig.lu.compute(eig.W);
    eig.rcond = lu_rcond(eig.lu);
    eig.condition_estimate = eig.rcond > Scalar(0) ? Scalar(1) / eig.rcond
                                                   : std::numeric_limits<Scalar>::infinity();
    return eig;
}

/// Solves W_r b0 = Q_r^T psi_latest.
template <typename Scalar>
CVec<Scalar> amplitudes(const ReducedEig<Scalar>& eig, const PodBasis<Scalar>& basis,
                        const Vec<Scalar>& psi_latest)
{
    detail::require(psi_latest.size() == basis.Q.rows(), "amplitudes: psi_latest has wrong length");
    detail::require(eig.W.rows() == basis.rank, "amplitudes: eigenbasis and POD rank differ");
    if (!(eig.rcond >= static_cast<Scalar>(kSingularBasisRcond))) {
        throw SingularBasis("amplitudes: eigenvector matrix is numerically singular (condition "
                                + std::to_string(static_cast<double>(eig.condition_estimate)) + ")",
                            static_cast<double>(eig.condition_estimate));
    }
    const CVec<Scalar> rhs = (basis.Q.transpose() * psi_latest).template cast<std::complex<Scalar>>();
    return eig.lu.solve(rhs);
}

/// E(i, h) = lambda_i^(first_exponent + h), h = 0..H-1, built by repeated multiplication.
template <typename Scalar>
CMat<Scalar> vandermonde(const CVec<Scalar>& lambda, Index H, Index first_exponent = 0)
{
    detail::require(H >= 1, "vandermonde: H must be >= 1");
    detail::require(first_exponent >= 0, "vandermonde: first exponent must be >= 0");
    const Index r = lambda.size();
    CMat<Scalar> E(r, H);
    for (Index i = 0; i < r; ++i) {
        std::complex<Scalar> power(1);
        for (Index k = 0; k < first_exponent; ++k) {
            power *= lambda(i);
        }
        E(i, 0) = power;
        for (Index h = 1; h < H; ++h) {
            E(i, h) = E(i, h - 1) * lambda(i);
        }
    }
    return E;
}

template <typename Scalar>
struct FeatureForecast {
    CMat<Scalar> psi_pred; // s x H
    CVec<Scalar> b0;
    CMat<Scalar> E;
    Index horizon = 0;
};

template <typename Scalar>
FeatureForecast<Scalar> predict_features(const PodBasis<Scalar>& basis, const ReducedEig<Scalar>& eig,
                                         const CVec<Scalar>& b0, const CMat<Scalar>& E)
{
    detail::require(b0.size() == eig.W.cols() && E.rows() == b0.size()
                        && basis.Q.cols() == eig.W.rows(),
                    "predict_features: shapes do not conform");
    FeatureForecast<Scalar> ff;
    const CMat<Scalar> modal = b0.asDiagonal() * E;
    const CMat<Scalar> reduced = eig.W * modal;
    ff.psi_pred = basis.Q.template cast<std::complex<Scalar>>() * reduced;
    ff.b0 = b0;
    ff.E = E;
    ff.horizon = E.cols();
    return ff;
}

template <typename Scalar>
struct Decoder {
    Mat<Scalar> D; // (p*d) x s
    Scalar fit_residual = 0;
};

/// D = X Psi_X^+ through the shared SVD, singular values at or below sigma_1 * 1e-12 dropped.
template <typename Scalar>
Decoder<Scalar> fit_decoder(const Eigen::Ref<const Mat<Scalar>>& physical_x,
                            const Eigen::Ref<const Mat<Scalar>>& psi_x, const WindowSvd<Scalar>& svd)
{
    detail::require(physical_x.cols() == psi_x.cols(), "fit_decoder: column counts differ");
    const Index rank = svd.numerical_rank(kPinvCutoff);
    if (rank == 0) {
        throw NumericalError("fit_decoder: lifted snapshots are all zero");
    }
    const Vec<Scalar> inv = svd.sigma.head(rank).cwiseInverse();
    const Mat<Scalar> xv = physical_x * svd.V.leftCols(rank);
    Decoder<Scalar> decoder;
    decoder.D = (xv * inv.asDiagonal()) * svd.U.leftCols(rank).transpose();
    decoder.fit_residual = (physical_x - decoder.D * psi_x).norm();
    return decoder;
}

template <typename Scalar>
Decoder<Scalar> fit_decoder(const Mat<Scalar>& physical_x, const Mat<Scalar>& psi_x)
{
    detail::require(physical_x.cols() == psi_x.cols(), "fit_decoder: column counts differ");
    return fit_decoder<Scalar>(physical_x, psi_x, decompose_window<Scalar>(psi_x));
}

template <typename Scalar>
CMat<Scalar> decode(const Decoder<Scalar>& decoder, const FeatureForecast<Scalar>& ff)
{
    detail::require(decoder.D.cols() == ff.psi_pred.rows(), "decode: decoder and forecast do not conform");
    CMat<Scalar> out(decoder.D.rows(), ff.psi_pred.cols());
    out.real() = decoder.D * ff.psi_pred.real();
    out.imag() = decoder.D * ff.psi_pred.imag();
    return out;
}

template <typename Scalar>
struct PhysicalForecast {
    Mat<Scalar> values;         // p x H
    Scalar max_imag_residue = 0; // largest |imag| discarded
    bool imag_warning = false;   // residue above imag_tolerance * max(1, value scale)
};

template <typename Scalar>
PhysicalForecast<Scalar> extract_physical(const CMat<Scalar>& x_hat_pred, Index p, Index d,
                                          double imag_tolerance = 1e-4)
{
    detail::require(p >= 1 && d >= 1 && x_hat_pred.rows() == p * d,
                    "extract_physical: row count must equal p * d");
    const Index H = x_hat_pred.cols();
    PhysicalForecast<Scalar> out;
    out.values.resize(p, H);
    Scalar residue = 0;
    for (Index j = 0; j < p; ++j) {
        const Index row = newest_lag_row(j, d);
        for (Index h = 0; h < H; ++h) {
            out.values(j, h) = x_hat_pred(row, h).real();
            residue = std::max(residue, std::abs(x_hat_pred(row, h).imag()));
        }
    }
    out.max_imag_residue = residue;
    const Scalar scale = std::max(Scalar(1), out.values.cwiseAbs().maxCoeff());
    out.imag_warning = residue > static_cast<Scalar>(imag_tolerance) * scale;
    return out;
}

struct EigenTelemetry {
    std::int64_t step = 0;
    std::vector<double> moduli; // descending
    double spectral_radius = 0;
    double w_condition = 0;
    Index rank = 0;
};

struct ForecastOptions {
    Index first_exponent = 1; // column h of the forecast is the (h+1)-step prediction
    double imag_tolerance = 1e-4;
};

template <typename Scalar>
struct ForecastResult {
    PhysicalForecast<Scalar> physical;
    FeatureForecast<Scalar> features;
    EigenTelemetry telemetry;
};

/// Forecast from a given POD basis (possibly stale) and decoder.
template <typename Scalar>
ForecastResult<Scalar> forecast_h(const KdmdState<Scalar>& state, const PodBasis<Scalar>& basis,
                                  Index H, const Decoder<Scalar>& decoder, Index d,
                                  const ForecastOptions& options = {})
{
    const Mat<Scalar> K = reduce(state.A, basis);
    const ReducedEig<Scalar> eig = eig_reduced(K);
    const Vec<Scalar> latest = state.latest_lifted();
    const CVec<Scalar> b0 = amplitudes(eig, basis, latest);
    const CMat<Scalar> E = vandermonde(eig.lambda, H, options.first_exponent);

    ForecastResult<Scalar> out;
    out.features = predict_features(basis, eig, b0, E);
    const CMat<Scalar> x_hat = decode(decoder, out.features);
    const Index p = state.physical_window.rows() / d;
    out.physical = extract_physical(x_hat, p, d, options.imag_tolerance);

    out.telemetry.step = state.step_count;
    out.telemetry.rank = basis.rank;
    out.telemetry.moduli.resize(static_cast<std::size_t>(eig.lambda.size()));
    for (Index i = 0; i < eig.lambda.size(); ++i) {
        out.telemetry.moduli[static_cast<std::size_t>(i)] = static_cast<double>(std::abs(eig.lambda(i)));
    }
    out.telemetry.spectral_radius = out.telemetry.moduli.empty() ? 0.0 : out.telemetry.moduli.front();
    out.telemetry.w_condition = static_cast<double>(eig.condition_estimate);
    return out;
}

/// Forecast with a POD basis recomputed from the state's current window.
template <typename Scalar>
ForecastResult<Scalar> forecast_h(const KdmdState<Scalar>& state, Index r_requested, Index H,
                                  const Decoder<Scalar>& decoder, Index d,
                                  const ForecastOptions& options = {})
{
    const Mat<Scalar> psi_x = state.psi_x();
    return forecast_h(state, pod_basis<Scalar>(psi_x, r_requested), H, decoder, d, options);
}

} // namespace workdmd
