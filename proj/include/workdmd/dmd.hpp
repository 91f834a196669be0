#pragma once

// Reference batch DMD on a snapshot pair (X, Y):
//
//   X ~= Q_X Sigma_X V_X^*        rank-r truncated SVD
//   A~ = Q_X^* Y V_X Sigma_X^-1
//   A~ W = W Lambda,  Phi = Q_X W
//   b0 = Phi^+ y_last,  x_hat_k = Phi Lambda^k b0
//
// Used as an oracle for the feature-space forecaster and as a linear baseline.

#include "workdmd/core.hpp"
#include "workdmd/forecast.hpp"

#include <algorithm>

namespace workdmd {

template <typename Scalar>
struct DmdFit {
    CMat<Scalar> Phi;    // n x r modes
    CVec<Scalar> lambda; // r eigenvalues, descending modulus
    CVec<Scalar> b0;     // amplitudes of the last column of Y
    Index rank = 0;
};

/// Complex pseudo-inverse with singular values at or below sigma_1 * cutoff dropped.
template <typename Scalar>
CMat<Scalar> pseudo_inverse(const CMat<Scalar>& m, double cutoff = kPinvCutoff)
{
    Eigen::JacobiSVD<CMat<Scalar>> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sigma = svd.singularValues();
    Index rank = 0;
    if (sigma.size() > 0 && sigma(0) > Scalar(0)) {
        const Scalar threshold = sigma(0) * static_cast<Scalar>(cutoff);
        rank = static_cast<Index>((sigma.array() > threshold).count());
    }
    if (rank == 0) {
        return CMat<Scalar>::Zero(m.cols(), m.rows());
    }
    const Vec<Scalar> inv = sigma.head(rank).cwiseInverse();
    return svd.matrixV().leftCols(rank) * inv.template cast<std::complex<Scalar>>().asDiagonal()
           * svd.matrixU().leftCols(rank).adjoint();
}

/// r <= 0 keeps the numerical rank of X.
template <typename Scalar>
DmdFit<Scalar> dmd_fit(const Mat<Scalar>& X, const Mat<Scalar>& Y, Index r)
{
    detail::require(X.cols() >= 1 && X.cols() == Y.cols() && X.rows() == Y.rows(),
                    "dmd_fit: X and Y must have equal non-zero shapes");
    const WindowSvd<Scalar> svd = decompose_window<Scalar>(X);
    const Index numerical = svd.numerical_rank();
    if (numerical < 1) {
        throw NumericalError("dmd_fit: snapshot matrix has rank zero");
    }
    const Index rank = r > 0 ? std::min(r, numerical) : numerical;

    const Mat<Scalar> Q = svd.U.leftCols(rank);
    const Vec<Scalar> inv = svd.sigma.head(rank).cwiseInverse();
    const Mat<Scalar> a_tilde = Q.transpose() * Y * svd.V.leftCols(rank) * inv.asDiagonal();
    const ReducedEig<Scalar> eig = eig_reduced(a_tilde);

    DmdFit<Scalar> fit;
    fit.rank = rank;
    fit.lambda = eig.lambda;
    fit.Phi = Q.template cast<std::complex<Scalar>>() * eig.W;
    const CVec<Scalar> last = Y.col(Y.cols() - 1).template cast<std::complex<Scalar>>();
    fit.b0 = pseudo_inverse(fit.Phi) * last;
    return fit;
}

/// Phi Lambda^k b0.
template <typename Scalar>
CVec<Scalar> dmd_forecast(const DmdFit<Scalar>& fit, Index k)
{
    detail::require(k >= 0, "dmd_forecast: k must be >= 0");
    CVec<Scalar> modal = fit.b0;
    for (Index i = 0; i < modal.size(); ++i) {
        std::complex<Scalar> power(1);
        for (Index step = 0; step < k; ++step) {
            power *= fit.lambda(i);
        }
        modal(i) *= power;
    }
    return fit.Phi * modal;
}

} // namespace workdmd
