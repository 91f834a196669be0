#pragma once

// Online feature-space DMD operator.
//
// The state tracks, for the current window of m+1 lifted Hankel columns
// psi_1..psi_{m+1} (Psi_X = psi_1..psi_m, Psi_Y = psi_2..psi_{m+1}):
//
//   P = (Psi_X Psi_X^T + eps I)^-1,   A = Psi_Y Psi_X^T P.
//
// Sliding by one step swaps the pair (psi_1 -> psi_2) out and
// (psi_{m+1} -> psi_{m+2}) in, which is a rank-2 modification of both Gram
// products: G' = G + U C U^T and B' = B + V C U^T with C = diag(-1, 1).
// Woodbury then gives
//
//   Gamma = (C^-1 + U^T P U)^-1
//   P'    = P - P U Gamma U^T P
//   A'    = A + (V - A U) Gamma U^T P
//
// at O(s^2) per step. eps is fixed between batch rebuilds.

#include "workdmd/core.hpp"
#include "workdmd/embed.hpp"
#include "workdmd/rff.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

namespace workdmd {

struct OperatorOptions {
    double epsilon_scale = 1e-6;  // eps = epsilon_scale * |Psi_X Psi_X^T|_2
    Index refresh_period = 0;     // slides between forced batch rebuilds, 0 = never
    int power_iterations = 50;
    double power_tolerance = 1e-6;
    double singular_guard = 1e-12; // minimum reciprocal condition of C^-1 + U^T P U
};

template <typename Scalar>
struct KdmdState {
    Mat<Scalar> P;               // s x s
    Mat<Scalar> A;               // s x s
    Mat<Scalar> lifted_window;   // s x (m+1), oldest -> newest
    Mat<Scalar> physical_window; // (p*d) x (m+1), matching columns
    Scalar epsilon = 0;
    std::int64_t step_count = 0;          // slides applied since init
    std::int64_t slides_since_rebuild = 0;
    std::int64_t reinit_count = 0;        // rebuilds forced by a singular or non-finite update
    std::int64_t refresh_count = 0;       // rebuilds forced by refresh_period
    std::int64_t lift_evaluations = 0;    // lifts of incoming columns

    Index features() const { return P.rows(); }
    Index m() const { return lifted_window.cols() - 1; }

    auto psi_x() const { return lifted_window.leftCols(m()); }
    auto psi_y() const { return lifted_window.rightCols(m()); }
    auto physical_x() const { return physical_window.leftCols(m()); }
    auto physical_y() const { return physical_window.rightCols(m()); }
    auto latest_lifted() const { return lifted_window.col(m()); }
    auto latest_physical() const { return physical_window.col(m()); }
};

template <typename Scalar>
struct UpdatePair {
    Mat<Scalar> U; // s x 2: [psi(x_1), psi(x_{m+1})]
    Mat<Scalar> V; // s x 2: [psi(x_2), psi(x_{m+2})]

    static Eigen::Matrix<Scalar, 2, 2> C()
    {
        return (Eigen::Matrix<Scalar, 2, 2>() << Scalar(-1), Scalar(0), Scalar(0), Scalar(1))
            .finished();
    }
};

template <typename Scalar>
struct GammaMatrix {
    Eigen::Matrix<Scalar, 2, 2> value;
    Scalar rcond = 0;              // |det M| / |M|_F^2 for M = C^-1 + U^T P U
    Scalar condition_estimate = 0; // 1 / rcond
};

enum class SlideEvent { Updated, ReinitSingular, Refreshed };

/// Largest eigenvalue of a symmetric positive semidefinite matrix by power
/// iteration. The start vector is v_i = 1 + 1/(i+2), normalised; iteration
/// stops after max_iterations or once the Rayleigh quotient changes by less
/// than tolerance (relative).
template <typename Derived>
typename Derived::Scalar spectral_norm_psd(const Eigen::MatrixBase<Derived>& G,
                                           int max_iterations = 50, double tolerance = 1e-6)
{
    using Scalar = typename Derived::Scalar;
    const Index n = G.rows();
    Vec<Scalar> v(n);
    for (Index i = 0; i < n; ++i) {
        v(i) = Scalar(1) + Scalar(1) / static_cast<Scalar>(i + 2);
    }
    v.normalize();
    Scalar estimate = 0;
    for (int it = 0; it < max_iterations; ++it) {
        Vec<Scalar> gv = G * v;
        const Scalar next = v.dot(gv);
        const Scalar norm = gv.norm();
        if (!(norm > Scalar(0)) || !std::isfinite(static_cast<double>(norm))) {
            return next;
        }
        v = gv / norm;
        const bool converged = it > 0 && std::abs(next - estimate) <= tolerance * std::abs(next);
        estimate = next;
        if (converged) {
            break;
        }
    }
    return estimate;
}

template <typename DerivedA, typename DerivedB>
double relative_frobenius(const Eigen::MatrixBase<DerivedA>& value,
                          const Eigen::MatrixBase<DerivedB>& reference)
{
    const double ref = static_cast<double>(reference.norm());
    const double diff = static_cast<double>((value - reference).norm());
    return ref > 0.0 ? diff / ref : diff;
}

namespace detail {

template <typename Scalar>
void symmetrize(Mat<Scalar>& m)
{
    const Index n = m.rows();
    for (Index c = 0; c < n; ++c) {
        for (Index r = c + 1; r < n; ++r) {
            const Scalar avg = (m(r, c) + m(c, r)) / Scalar(2);
            m(r, c) = avg;
            m(c, r) = avg;
        }
    }
}

template <typename Scalar>
Mat<Scalar> gram(const Eigen::Ref<const Mat<Scalar>>& psi_x)
{
    const Index s = psi_x.rows();
    Mat<Scalar> g = Mat<Scalar>::Zero(s, s);
    g.template selfadjointView<Eigen::Lower>().rankUpdate(psi_x);
    return g.template selfadjointView<Eigen::Lower>();
}

/// Fills P, A and epsilon from the lifted window already stored in `state`.
template <typename Scalar>
void batch_fill(KdmdState<Scalar>& state, const Eigen::Ref<const Mat<Scalar>>& psi_x,
                const Eigen::Ref<const Mat<Scalar>>& psi_y, const OperatorOptions& options)
{
    if (!psi_x.allFinite() || !psi_y.allFinite()) {
        throw NumericalError("init_batch: lifted snapshots contain non-finite values");
    }
    const Index s = psi_x.rows();
    Mat<Scalar> g = gram<Scalar>(psi_x);
    const Scalar norm = spectral_norm_psd(g, options.power_iterations, options.power_tolerance);
    if (!(norm > Scalar(0)) || !std::isfinite(static_cast<double>(norm))) {
        throw NumericalError("init_batch: spectral norm of the Gram matrix is not positive");
    }
    const Scalar eps = static_cast<Scalar>(options.epsilon_scale) * norm;
    g.diagonal().array() += eps;
    Eigen::LLT<Mat<Scalar>> llt(g);
    if (llt.info() != Eigen::Success) {
        throw NumericalError("init_batch: regularised Gram matrix is not positive definite");
    }
    state.P = llt.solve(Mat<Scalar>::Identity(s, s));
    symmetrize(state.P);
    state.A.noalias() = (psi_y * psi_x.transpose()) * state.P;
    if (!state.P.allFinite() || !state.A.allFinite()) {
        throw NumericalError("init_batch: operator contains non-finite values");
    }
    state.epsilon = eps;
    state.slides_since_rebuild = 0;
}

template <typename Scalar>
void advance_window(KdmdState<Scalar>& state, const Eigen::Ref<const Vec<Scalar>>& physical,
                    const Eigen::Ref<const Vec<Scalar>>& lifted)
{
    auto shift = [](Mat<Scalar>& window, const Eigen::Ref<const Vec<Scalar>>& column) {
        const Index rows = window.rows();
        Scalar* data = window.data();
        std::copy(data + rows, data + window.size(), data);
        window.col(window.cols() - 1) = column;
    };
    shift(state.physical_window, physical);
    shift(state.lifted_window, lifted);
}

} // namespace detail

/// Batch initialisation on a window of m+1 columns.
/// eps = epsilon_scale * |Psi_X Psi_X^T|_2, P = (Psi_X Psi_X^T + eps I)^-1, A = Psi_Y Psi_X^T P.
template <typename Scalar>
KdmdState<Scalar> init_batch(const Mat<Scalar>& psi_x, const Mat<Scalar>& psi_y,
                             const SnapshotPair<Scalar>& physical,
                             const Vec<Scalar>& latest_lifted,
                             const OperatorOptions& options = {})
{
    const Index s = psi_x.rows();
    const Index m = psi_x.cols();
    detail::require(m >= 1, "init_batch: need m >= 1 snapshots");
    detail::require(psi_y.rows() == s && psi_y.cols() == m,
                    "init_batch: psi_x and psi_y shapes differ");
    detail::require(latest_lifted.size() == s, "init_batch: latest_lifted has wrong length");
    detail::require(physical.X.cols() == m && physical.latest_column.size() == physical.X.rows(),
                    "init_batch: physical snapshots do not match the lifted window");

    KdmdState<Scalar> state;
    state.lifted_window.resize(s, m + 1);
    state.lifted_window.leftCols(m) = psi_x;
    state.lifted_window.col(m) = latest_lifted;
    state.physical_window.resize(physical.X.rows(), m + 1);
    state.physical_window.leftCols(m) = physical.X;
    state.physical_window.col(m) = physical.latest_column;
    detail::batch_fill<Scalar>(state, psi_x, psi_y, options);
    return state;
}

/// Lifts the Hankel window and initialises by batch.
template <typename Scalar>
KdmdState<Scalar> init_batch(const SnapshotPair<Scalar>& physical, const RffMap<Scalar>& map,
                             const OperatorOptions& options = {})
{
    const Mat<Scalar> psi_x = map.lift_matrix(physical.X);
    const Vec<Scalar> latest = map.lift(physical.latest_column);
    Mat<Scalar> psi_y(psi_x.rows(), psi_x.cols());
    psi_y.leftCols(psi_x.cols() - 1) = psi_x.rightCols(psi_x.cols() - 1);
    psi_y.col(psi_x.cols() - 1) = latest;
    return init_batch<Scalar>(psi_x, psi_y, physical, latest, options);
}

/// Recomputes eps, P and A by batch from the state's current window.
template <typename Scalar>
void rebuild(KdmdState<Scalar>& state, const OperatorOptions& options = {})
{
    const Mat<Scalar> psi_x = state.psi_x();
    const Mat<Scalar> psi_y = state.psi_y();
    detail::batch_fill<Scalar>(state, psi_x, psi_y, options);
}

template <typename Scalar>
UpdatePair<Scalar> build_update(const KdmdState<Scalar>& state, const Vec<Scalar>& new_lifted)
{
    const Index s = state.features();
    const Index m = state.m();
    detail::require(new_lifted.size() == s, "build_update: lifted column has wrong length");
    UpdatePair<Scalar> pair;
    pair.U.resize(s, 2);
    pair.V.resize(s, 2);
    pair.U.col(0) = state.lifted_window.col(0);
    pair.U.col(1) = state.lifted_window.col(m);
    pair.V.col(0) = state.lifted_window.col(1);
    pair.V.col(1) = new_lifted;
    return pair;
}

template <typename Scalar>
UpdatePair<Scalar> build_update(const KdmdState<Scalar>& state, const Vec<Scalar>& new_physical,
                                const RffMap<Scalar>& map)
{
    detail::require(new_physical.size() == state.physical_window.rows(),
                    "build_update: physical column has wrong length");
    return build_update(state, Vec<Scalar>(map.lift(new_physical)));
}

/// Gamma = (C^-1 + U^T P U)^-1 by direct 2x2 inversion. Throws SingularUpdate
/// when the reciprocal condition |det M| / |M|_F^2 falls below `guard`.
template <typename Scalar>
GammaMatrix<Scalar> gamma_matrix(const Mat<Scalar>& P, const Mat<Scalar>& U,
                                 double guard = 1e-12)
{
    detail::require(P.rows() == P.cols() && U.rows() == P.rows() && U.cols() == 2,
                    "gamma_matrix: expected P s x s and U s x 2");
    // C is its own inverse.
    const Eigen::Matrix<Scalar, 2, 2> M = UpdatePair<Scalar>::C() + U.transpose() * P * U;
    const Scalar det = M(0, 0) * M(1, 1) - M(0, 1) * M(1, 0);
    const Scalar scale = M.squaredNorm();
    const Scalar rcond = scale > Scalar(0) ? std::abs(det) / scale : Scalar(0);
    if (!std::isfinite(static_cast<double>(rcond)) || !(rcond >= static_cast<Scalar>(guard))) {
        throw SingularUpdate("gamma_matrix: C^-1 + U^T P U is singular (rcond "
                                 + std::to_string(static_cast<double>(rcond)) + ")",
                             static_cast<double>(rcond));
    }
    GammaMatrix<Scalar> gamma;
    gamma.value << M(1, 1), -M(0, 1), -M(1, 0), M(0, 0);
    gamma.value /= det;
    gamma.rcond = rcond;
    gamma.condition_estimate = Scalar(1) / rcond;
    return gamma;
}

/// Advances the window by one Hankel column.
///
/// Lifts the new column once, applies the rank-2 update and shifts both window
/// buffers. A singular Gamma or a due refresh rebuilds the operator by batch on
/// the slid window (eps recomputed). If the update produces non-finite values
/// the window is still advanced and ReinitRequired is thrown; P and A are then
/// invalid until rebuild() is called.
template <typename Scalar>
SlideEvent slide(KdmdState<Scalar>& state, const Vec<Scalar>& new_physical,
                 const RffMap<Scalar>& map, const OperatorOptions& options = {})
{
    detail::require(new_physical.size() == state.physical_window.rows(),
                    "slide: new column length does not match p*d");
    const Vec<Scalar> new_lifted = map.lift(new_physical);
    ++state.lift_evaluations;
    ++state.step_count;

    const bool refresh_due = options.refresh_period > 0
                             && state.slides_since_rebuild + 1 >= options.refresh_period;
    if (refresh_due) {
        detail::advance_window<Scalar>(state, new_physical, new_lifted);
        rebuild(state, options);
        ++state.refresh_count;
        return SlideEvent::Refreshed;
    }

    const UpdatePair<Scalar> pair = build_update(state, new_lifted);
    GammaMatrix<Scalar> gamma;
    try {
        gamma = gamma_matrix<Scalar>(state.P, pair.U, options.singular_guard);
    } catch (const SingularUpdate&) {
        detail::advance_window<Scalar>(state, new_physical, new_lifted);
        rebuild(state, options);
        ++state.reinit_count;
        return SlideEvent::ReinitSingular;
    }

    const Mat<Scalar> pu = state.P * pair.U;                  // s x 2, also (U^T P)^T
    const Mat<Scalar> residual = pair.V - state.A * pair.U;   // s x 2
    const Mat<Scalar> p_gain = pu * gamma.value;
    const Mat<Scalar> a_gain = residual * gamma.value;
    state.P.noalias() -= p_gain * pu.transpose();
    state.A.noalias() += a_gain * pu.transpose();
    detail::symmetrize(state.P);
    detail::advance_window<Scalar>(state, new_physical, new_lifted);
    ++state.slides_since_rebuild;

    if (!state.P.allFinite() || !state.A.allFinite()) {
        throw ReinitRequired("slide: rank-2 update produced non-finite values at step "
                             + std::to_string(state.step_count));
    }
    return SlideEvent::Updated;
}

template <typename Scalar>
struct OracleOperator {
    Mat<Scalar> P;
    Mat<Scalar> A;
};

/// Direct recomputation of (P, A) for a window at a given eps, through a
/// symmetric eigendecomposition of the Gram matrix rather than the Cholesky
/// route used by init_batch.
template <typename Scalar>
OracleOperator<Scalar> batch_oracle(const Mat<Scalar>& psi_x, const Mat<Scalar>& psi_y,
                                    Scalar epsilon)
{
    detail::require(psi_x.rows() == psi_y.rows() && psi_x.cols() == psi_y.cols(),
                    "batch_oracle: psi_x and psi_y shapes differ");
    if (!psi_x.allFinite() || !psi_y.allFinite()) {
        throw NumericalError("batch_oracle: non-finite input");
    }
    const Mat<Scalar> g = psi_x * psi_x.transpose();
    Eigen::SelfAdjointEigenSolver<Mat<Scalar>> eig(g);
    if (eig.info() != Eigen::Success) {
        throw NumericalError("batch_oracle: eigendecomposition failed");
    }
    const Vec<Scalar> inv = (eig.eigenvalues().array() + epsilon).inverse();
    OracleOperator<Scalar> out;
    out.P = eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
    out.A = (psi_y * psi_x.transpose()) * out.P;
    if (!out.P.allFinite() || !out.A.allFinite()) {
        throw NumericalError("batch_oracle: non-finite result");
    }
    return out;
}

} // namespace workdmd
