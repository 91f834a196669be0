#pragma once

// Windowing and block-Hankel delay embedding.
//
// Index conventions. Documentation uses 1-based time and lag indices, code
// uses 0-based column/row offsets:
//
//   quantity                      1-based (docs)              0-based (code)
//   time of last window column    t, with w <= t <= T         column t-1 of the series
//   window column i               x_{t-w+i}, i in [1, w]      window.col(i-1)
//   Hankel entry (a, i), block j  x^{(j)}_{t-w+i+a-1}         row (j-1)*d + (a-1), col i-1
//   newest lag of block j         row (j-1)*d + d             row j*d + d - 1
//
// Feature blocks are stacked in input order; forecast decoding relies on it.

#include "workdmd/core.hpp"

namespace workdmd {

template <typename Scalar>
struct WindowMatrix {
    Mat<Scalar> data;  // p x w, oldest -> newest
    Index end_time = 0; // 1-based time of the last column
};

template <typename Scalar>
struct HankelBlock {
    Mat<Scalar> data; // (p*d) x (w-d+1)
    Index p = 0;
    Index d = 0;
    Index w = 0;
    Index end_time = 0;

    Index snapshots() const { return data.cols(); }
};

template <typename Scalar>
struct SnapshotPair {
    Mat<Scalar> X;            // Hankel columns 1..m
    Mat<Scalar> Y;            // Hankel columns 2..m+1
    Vec<Scalar> latest_column; // Hankel column m+1

    Index m() const { return X.cols(); }
};

/// Columns x_{t-w+1}, ..., x_t of a p x T series.
template <typename Derived>
WindowMatrix<typename Derived::Scalar> window_at(const Eigen::MatrixBase<Derived>& series,
                                                 Index t, Index w)
{
    detail::require(w >= 1, "window_at: w must be >= 1");
    detail::require(t >= w, "window_at: t must be >= w");
    detail::require(t <= series.cols(), "window_at: t exceeds series length");
    return {series.middleCols(t - w, w), t};
}

/// d x (w-d+1) Hankel matrix with entry (a, i) = row[a + i] (0-based).
template <typename Derived>
Mat<typename Derived::Scalar> hankel_univariate(const Eigen::MatrixBase<Derived>& row, Index d)
{
    const Index w = row.size();
    detail::require(d >= 1, "hankel_univariate: d must be >= 1");
    detail::require(d <= w, "hankel_univariate: d must not exceed the row length");
    const Index cols = w - d + 1;
    Mat<typename Derived::Scalar> h(d, cols);
    for (Index i = 0; i < cols; ++i) {
        for (Index a = 0; a < d; ++a) {
            h(a, i) = row(a + i);
        }
    }
    return h;
}

template <typename Scalar>
HankelBlock<Scalar> hankel_block(const WindowMatrix<Scalar>& window, Index d)
{
    const Index p = window.data.rows();
    const Index w = window.data.cols();
    detail::require(d >= 1 && d <= w, "hankel_block: need 1 <= d <= w");
    HankelBlock<Scalar> block;
    block.p = p;
    block.d = d;
    block.w = w;
    block.end_time = window.end_time;
    block.data.resize(p * d, w - d + 1);
    for (Index j = 0; j < p; ++j) {
        block.data.middleRows(j * d, d) = hankel_univariate(window.data.row(j), d);
    }
    return block;
}

template <typename Scalar>
SnapshotPair<Scalar> snapshot_pair(const HankelBlock<Scalar>& h)
{
    const Index m = h.data.cols() - 1;
    detail::require(m >= 1, "snapshot_pair: need at least two Hankel columns (m = w - d >= 1)");
    return {h.data.leftCols(m), h.data.rightCols(m), h.data.col(m)};
}

/// The Hankel column ending at 1-based time t: [x^{(j)}_{t-d+1}, ..., x^{(j)}_t] per feature.
template <typename Derived>
Vec<typename Derived::Scalar> new_hankel_column(const Eigen::MatrixBase<Derived>& series,
                                                Index t, Index d)
{
    detail::require(d >= 1, "new_hankel_column: d must be >= 1");
    detail::require(t >= d, "new_hankel_column: t must be >= d");
    detail::require(t <= series.cols(), "new_hankel_column: t exceeds series length");
    const Index p = series.rows();
    Vec<typename Derived::Scalar> col(p * d);
    for (Index j = 0; j < p; ++j) {
        col.segment(j * d, d) = series.row(j).segment(t - d, d).transpose();
    }
    return col;
}

/// Row of the stacked vector holding feature j's newest lag (0-based j).
inline Index newest_lag_row(Index feature, Index d) { return feature * d + d - 1; }

} // namespace workdmd
