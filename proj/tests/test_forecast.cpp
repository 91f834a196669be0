#include "workdmd/dmd.hpp"
#include "workdmd/embed.hpp"
#include "workdmd/forecast.hpp"
#include "workdmd/ingest.hpp"
#include "workdmd/operator.hpp"

#include <doctest.h>

#include <complex>
#include <limits>
#include <numbers>
#include <random>

using namespace workdmd;
using cd = std::complex<double>;

namespace {

MatrixXd random_matrix(Index rows, Index cols, unsigned seed)
{
    std::mt19937 gen(seed);
    std::normal_distribution<double> dist;
    MatrixXd m(rows, cols);
    for (Index i = 0; i < m.size(); ++i) {
        m.data()[i] = dist(gen);
    }
    return m;
}

PodBasis<double> identity_basis(Index s)
{
    return {MatrixXd::Identity(s, s), VectorXd::Ones(s), s};
}

MatrixXd rotation(double phi)
{
    MatrixXd R(2, 2);
    R << std::cos(phi), -std::sin(phi), std::sin(phi), std::cos(phi);
    return R;
}

} // namespace

TEST_CASE("pod_basis examples")
{
    const auto eye = pod_basis<double>(MatrixXd::Identity(3, 3), 0);
    CHECK(eye.rank == 3);
    CHECK((eye.Q.transpose() * eye.Q - MatrixXd::Identity(3, 3)).norm() < 1e-12);
    CHECK((eye.Q.cwiseAbs() * MatrixXd::Ones(3, 1) - VectorXd::Ones(3)).norm() < 1e-12);

    const VectorXd u = VectorXd::LinSpaced(6, 1, 2);
    const VectorXd v = VectorXd::LinSpaced(4, -1, 3);
    const auto rank1 = pod_basis<double>(MatrixXd(u * v.transpose()), 5);
    CHECK(rank1.rank == 1);

    const MatrixXd psi = random_matrix(8, 5, 1);
    const auto full = pod_basis<double>(psi, 5);
    CHECK(full.rank == 5);
    CHECK((full.Q * full.Q.transpose() * psi - psi).norm() < 1e-10 * psi.norm());
    CHECK(pod_basis<double>(psi, 3).rank == 3);
    for (Index i = 1; i < full.rank; ++i) {
        CHECK(full.singular_values(i) <= full.singular_values(i - 1));
    }

    CHECK_THROWS_AS(pod_basis<double>(MatrixXd::Zero(4, 3), 2), NumericalError);
}

TEST_CASE("POD orthonormality on random windows")
{
    for (unsigned seed = 0; seed < 10; ++seed) {
        const MatrixXd psi = random_matrix(20, 7 + seed, seed);
        const auto b = pod_basis<double>(psi, 0);
        CHECK(b.rank <= std::min<Index>(20, 7 + seed));
        CHECK((b.Q.transpose() * b.Q - MatrixXd::Identity(b.rank, b.rank)).norm() < 1e-10);
    }
}

TEST_CASE("reduce examples")
{
    const auto b = pod_basis<double>(random_matrix(6, 4, 2), 0);
    CHECK((reduce<double>(MatrixXd::Identity(6, 6), b) - MatrixXd::Identity(4, 4)).norm() < 1e-12);
    CHECK((reduce<double>(MatrixXd(2.5 * MatrixXd::Identity(6, 6)), b) - 2.5 * MatrixXd::Identity(4, 4)).norm()
          < 1e-12);
    const MatrixXd A = random_matrix(6, 6, 3);
    MatrixXd direct = MatrixXd::Zero(4, 4);
    for (Index i = 0; i < 4; ++i)
        for (Index j = 0; j < 4; ++j)
            for (Index k = 0; k < 6; ++k)
                for (Index l = 0; l < 6; ++l)
                    direct(i, j) += b.Q(k, i) * A(k, l) * b.Q(l, j);
    CHECK((reduce<double>(A, b) - direct).norm() < 1e-12);
}

TEST_CASE("eig_reduced examples")
{
    MatrixXd K = MatrixXd::Zero(2, 2);
    K(0, 0) = 0.5;
    K(1, 1) = 2.0;
    const auto e = eig_reduced<double>(K);
    CHECK(std::abs(e.lambda(0) - cd(2.0)) < 1e-14);
    CHECK(std::abs(e.lambda(1) - cd(0.5)) < 1e-14);
    // column 0 belongs to lambda = 2, i.e. e2
    CHECK(std::abs(e.W(0, 0)) < 1e-14);
    CHECK(std::abs(e.W(1, 1)) < 1e-14);
    CHECK(std::abs(e.W(1, 0)) > 0.5);
    CHECK(std::abs(e.W(0, 1)) > 0.5);

    const double phi = 0.7;
    const auto rot = eig_reduced<double>(rotation(phi));
    const cd a = std::polar(1.0, phi);
    CHECK(std::min(std::abs(rot.lambda(0) - a), std::abs(rot.lambda(0) - std::conj(a))) < 1e-12);
    CHECK(std::abs(rot.lambda(0) - std::conj(rot.lambda(1))) < 1e-12);
}

TEST_CASE("eigen residual and ordering on random K")
{
    for (unsigned seed = 0; seed < 10; ++seed) {
        const MatrixXd K = random_matrix(9, 9, seed);
        const auto e = eig_reduced<double>(K);
        const CMat<double> Kc = K.cast<cd>();
        const double residual = (Kc * e.W - e.W * e.lambda.asDiagonal()).norm();
        CHECK(residual <= 1e-8 * K.norm() * 9);
        for (Index i = 1; i < 9; ++i) {
            CHECK(std::abs(e.lambda(i)) <= std::abs(e.lambda(i - 1)) + 1e-15);
        }
    }
}

TEST_CASE("amplitudes examples")
{
    const Index s = 4;
    const auto basis = identity_basis(s);
    const auto e = eig_reduced<double>(MatrixXd(MatrixXd::Identity(s, s) * 0.9));
    const VectorXd psi = VectorXd::LinSpaced(s, 1, 4);
    CHECK((amplitudes(e, basis, psi) - psi.cast<cd>()).norm() < 1e-12);

    const MatrixXd K = random_matrix(3, 3, 5);
    const auto er = eig_reduced<double>(K);
    const auto b = pod_basis<double>(random_matrix(7, 3, 6), 0);
    const VectorXd latest = random_matrix(7, 1, 7);
    const CVec<double> b0 = amplitudes(er, b, latest);
    CHECK((er.W * b0 - (b.Q.transpose() * latest).cast<cd>()).norm() < 1e-10);

    // latest lift orthogonal to the basis
    MatrixXd Q = MatrixXd::Zero(4, 2);
    Q(0, 0) = Q(1, 1) = 1;
    PodBasis<double> partial{Q, VectorXd::Ones(2), 2};
    const auto e2 = eig_reduced<double>(random_matrix(2, 2, 8));
    CHECK(amplitudes(e2, partial, VectorXd(VectorXd::Unit(4, 3))).norm() < 1e-15);
}

TEST_CASE("amplitudes reject a singular eigenbasis")
{
    // Jordan block: the computed eigenvectors nearly coincide
    MatrixXd J(2, 2);
    J << 1, 1, 0, 1;
    CHECK(eig_reduced<double>(J).ill_conditioned());

    CMat<double> collapsed(2, 2);
    collapsed << 1.0, 1.0, 0.0, 0.0;
    const Eigen::PartialPivLU<CMat<double>> lu(collapsed);
    CHECK(lu_rcond(lu) == 0.0);

    MatrixXd K(2, 2);
    K << 1, 0, 0, 1;
    auto e = eig_reduced<double>(K);
    e.W = collapsed;
    e.lu = lu;
    e.rcond = lu_rcond(lu);
    CHECK_THROWS_AS(amplitudes(e, identity_basis(2), VectorXd(VectorXd::Ones(2))), SingularBasis);
}

TEST_CASE("vandermonde examples and recurrence")
{
    CVec<double> lambda(2);
    lambda << 2.0, 0.5;
    const auto E = vandermonde(lambda, 3);
    CMat<double> expected(2, 3);
    expected << 1.0, 2.0, 4.0, 1.0, 0.5, 0.25;
    CHECK((E - expected).norm() < 1e-15);

    CVec<double> unit(1);
    unit << std::polar(1.0, std::numbers::pi / 2);
    const auto Eu = vandermonde(unit, 4);
    CHECK(std::abs(Eu(0, 0) - cd(1, 0)) < 1e-15);
    CHECK(std::abs(Eu(0, 1) - cd(0, 1)) < 1e-15);
    CHECK(std::abs(Eu(0, 2) - cd(-1, 0)) < 1e-15);
    CHECK(std::abs(Eu(0, 3) - cd(0, -1)) < 1e-15);

    const CVec<double> rand = random_matrix(5, 2, 9).cast<cd>() * CMat<double>::Ones(2, 1);
    const CVec<double> mixed = random_matrix(5, 1, 10).cast<cd>() + cd(0, 1) * random_matrix(5, 1, 11).cast<cd>();
    const auto Er = vandermonde(mixed, 6);
    for (Index i = 0; i < 5; ++i) {
        CHECK(Er(i, 0) == cd(1.0));
        for (Index h = 0; h + 1 < 6; ++h) {
            CHECK(Er(i, h + 1) == mixed(i) * Er(i, h));
        }
    }
    (void)rand;

    const auto E1 = vandermonde(lambda, 2, 1);
    CHECK(std::abs(E1(0, 0) - cd(2.0)) < 1e-15);
    CHECK(std::abs(E1(1, 1) - cd(0.25)) < 1e-15);
    CHECK_THROWS_AS(vandermonde(lambda, 0), InvalidArgument);
}

TEST_CASE("predict_features examples")
{
    const MatrixXd psi = random_matrix(6, 4, 12);
    const auto basis = pod_basis<double>(psi, 0);
    const MatrixXd A = random_matrix(6, 6, 13);
    const auto eig = eig_reduced<double>(reduce<double>(A, basis));
    const VectorXd latest = psi.col(3);
    const auto b0 = amplitudes(eig, basis, latest);
    const auto ff = predict_features(basis, eig, b0, vandermonde(eig.lambda, 1));
    const VectorXd projected = basis.Q * basis.Q.transpose() * latest;
    CHECK((ff.psi_pred.col(0) - projected.cast<cd>()).norm() < 1e-10);

    const auto zero = predict_features(basis, eig, CVec<double>(CVec<double>::Zero(basis.rank)),
                                       vandermonde(eig.lambda, 3));
    CHECK(zero.psi_pred.norm() == 0.0);

    MatrixXd K = MatrixXd::Zero(3, 3);
    K.diagonal() << 0.9, 0.6, 0.3;
    const auto diag = eig_reduced<double>(K);
    CVec<double> b(3);
    b << 1.0, 2.0, 3.0;
    const auto dff = predict_features(identity_basis(3), diag, b, vandermonde(diag.lambda, 4));
    for (Index i = 0; i < 3; ++i) {
        // W is a signed permutation here; find the mode that drives row i
        Index mode = 0;
        for (Index k = 0; k < 3; ++k) {
            if (std::abs(diag.W(i, k)) > 0.5) mode = k;
        }
        for (Index h = 0; h < 4; ++h) {
            const cd expected = diag.W(i, mode) * b(mode) * std::pow(diag.lambda(mode), static_cast<double>(h));
            CHECK(std::abs(dff.psi_pred(i, h) - expected) < 1e-12);
        }
    }
}

TEST_CASE("fit_decoder examples")
{
    const MatrixXd X = random_matrix(3, 5, 14);
    CHECK((fit_decoder<double>(X, MatrixXd::Identity(5, 5)).D - X).norm() < 1e-12);

    const MatrixXd psi = random_matrix(4, 9, 15);
    const MatrixXd M = random_matrix(3, 4, 16);
    const auto dec = fit_decoder<double>(MatrixXd(M * psi), psi);
    CHECK((dec.D - M).norm() < 1e-10);
    CHECK(dec.fit_residual < 1e-10);

    // rank-deficient features: minimum-norm solution lies in the row space of psi^T
    const MatrixXd thin = random_matrix(6, 3, 17);
    const MatrixXd Xr = random_matrix(2, 3, 18);
    const auto mn = fit_decoder<double>(Xr, thin);
    const MatrixXd pinv = thin.completeOrthogonalDecomposition().pseudoInverse();
    CHECK((mn.D - Xr * pinv).norm() < 1e-10);

    const MatrixXd Xn = random_matrix(5, 30, 19);
    const MatrixXd psin = random_matrix(12, 30, 20);
    const auto fit = fit_decoder<double>(Xn, psin);
    CHECK(((Xn - fit.D * psin) * psin.transpose()).norm() <= 1e-6 * Xn.norm() * psin.norm());

    CHECK_THROWS_AS(fit_decoder<double>(Xn, MatrixXd::Zero(12, 30)), NumericalError);
    CHECK_THROWS_AS(fit_decoder<double>(Xn, MatrixXd(psin.leftCols(10))), InvalidArgument);
}

TEST_CASE("decode examples")
{
    FeatureForecast<double> ff;
    ff.psi_pred = random_matrix(4, 3, 21).cast<cd>() + cd(0, 1) * random_matrix(4, 3, 22).cast<cd>();
    Decoder<double> eye{MatrixXd::Identity(4, 4), 0};
    CHECK((decode(eye, ff) - ff.psi_pred).norm() < 1e-15);

    Decoder<double> dec{random_matrix(2, 4, 23), 0};
    FeatureForecast<double> scaled = ff;
    scaled.psi_pred *= cd(2.5, -1.0);
    CHECK((decode(dec, scaled) - cd(2.5, -1.0) * decode(dec, ff)).norm() < 1e-12);

    FeatureForecast<double> zero;
    zero.psi_pred = CMat<double>::Zero(4, 2);
    CHECK(decode(dec, zero).norm() == 0.0);
}

TEST_CASE("extract_physical selects newest-lag rows")
{
    CMat<double> x(6, 2);
    for (Index i = 0; i < 6; ++i) {
        x(i, 0) = cd(10.0 * i, 0);
        x(i, 1) = cd(10.0 * i + 1, 0);
    }
    const auto out = extract_physical(x, 2, 3);
    CHECK(out.values(0, 0) == 20.0); // 1-based row 3
    CHECK(out.values(1, 0) == 50.0); // 1-based row 6
    CHECK(out.values(1, 1) == 51.0);
    CHECK(out.max_imag_residue == 0.0);
    CHECK_FALSE(out.imag_warning);

    x(2, 1) = cd(21.0, 0.5);
    const auto warn = extract_physical(x, 2, 3);
    CHECK(warn.max_imag_residue == 0.5);
    CHECK(warn.imag_warning);
    CHECK(warn.values(0, 1) == 21.0);
}

namespace {

struct RotationFixture {
    MatrixXd z;
    RffMap<double> map;
    KdmdState<double> state;
    Index w = 60, d = 8;
};

RotationFixture rotation_fixture()
{
    SyntheticSpec spec;
    spec.kind = SyntheticKind::LinearSystem;
    spec.p = 2;
    spec.T = 200;
    spec.system = rotation(std::numbers::pi / 8);
    spec.x0 = VectorXd::Unit(2, 0);
    RotationFixture f;
    f.z = gen_synthetic(spec).values;
    f.map = RffMap<double>::sample(2 * f.d, 256, 1e-4, 42);
    const auto pair = snapshot_pair(hankel_block(window_at(f.z, f.w, f.w), f.d));
    f.state = init_batch(pair, f.map);
    return f;
}

} // namespace

TEST_CASE("forecast_h on a rotation: accurate, real, horizon-consistent")
{
    auto f = rotation_fixture();
    const auto dec = fit_decoder<double>(f.state.physical_x(), f.state.psi_x());
    const auto r3 = forecast_h(f.state, Index{0}, 3, dec, f.d);
    const auto r1 = forecast_h(f.state, Index{0}, 1, dec, f.d);
    CHECK((r3.physical.values.col(0) - r1.physical.values.col(0)).norm() < 1e-12);
    for (Index h = 0; h < 3; ++h) {
        CHECK((r3.physical.values.col(h) - f.z.col(f.w + h)).norm() < 1e-2);
    }
    CHECK(r3.physical.max_imag_residue < 1e-8);
    CHECK(r3.telemetry.rank > 0);
    CHECK(std::abs(r3.telemetry.spectral_radius - 1.0) < 1e-2);

    // reconstruction at exponent 0 reproduces the latest column
    ForecastOptions zero;
    zero.first_exponent = 0;
    const auto r0 = forecast_h(f.state, Index{0}, 1, dec, f.d, zero);
    const VectorXd latest = f.state.latest_physical();
    const Eigen::Vector2d newest(latest(f.d - 1), latest(2 * f.d - 1));
    CHECK((r0.physical.values.col(0) - newest).norm() < 0.05 * newest.norm());
}

TEST_CASE("forecast_h on a constant stream returns the current value")
{
    const MatrixXd z = MatrixXd::Constant(1, 80, 0.7);
    const auto map = RffMap<double>::sample(5, 64, 0.1, 3);
    const auto state = init_batch(snapshot_pair(hankel_block(window_at(z, 40, 40), 5)), map);
    const auto dec = fit_decoder<double>(state.physical_x(), state.psi_x());
    const auto out = forecast_h(state, Index{0}, 4, dec, 5);
    // eps shrinks the unit eigenvalue to about 1/(1 + 1e-6), so horizon h carries a bias near h * 1e-6
    CHECK((out.physical.values.array() - 0.7).abs().maxCoeff() < 2 * 4 * 1e-6 * 0.7);
}

TEST_CASE("feature-space forecast agrees with batch DMD on linear lifted dynamics")
{
    // Snapshot pairs satisfy psi' = L psi exactly; with eps -> 0 and full rank
    // the kernel operator and batch DMD must predict the same trajectory.
    const Index s = 6, m = 20;
    const MatrixXd B = random_matrix(s, s, 30);
    const Eigen::HouseholderQR<MatrixXd> qr(B);
    const MatrixXd Qo = qr.householderQ();
    VectorXd decay(s);
    decay << 0.99, 0.97, 0.95, 0.9, 0.85, 0.8;
    const MatrixXd L = Qo * decay.asDiagonal() * Qo.transpose();
    const MatrixXd X = random_matrix(s, m, 31);
    const MatrixXd Y = L * X;
    MatrixXd traj(s, m + 1);
    traj << X, Y.col(m - 1);
    OperatorOptions opts;
    opts.epsilon_scale = 1e-14;
    SnapshotPair<double> phys{X, Y, traj.col(m)};
    const auto state = init_batch<double>(X, Y, phys, VectorXd(traj.col(m)), opts);
    const auto basis = pod_basis<double>(X, 0);
    const auto eig = eig_reduced<double>(reduce<double>(state.A, basis));
    const auto b0 = amplitudes(eig, basis, VectorXd(traj.col(m)));
    const auto ff = predict_features(basis, eig, b0, vandermonde(eig.lambda, 3, 1));

    const auto fit = dmd_fit<double>(X, Y, 0);
    for (Index k = 1; k <= 3; ++k) {
        // dmd b0 reconstructs the last column of Y, so exponent k is k steps past it
        const CVec<double> ref = dmd_forecast(fit, k);
        CHECK((ff.psi_pred.col(k - 1) - ref).norm() < 1e-6 * ref.norm());
    }
}

TEST_CASE("dmd_fit examples")
{
    const MatrixXd X = random_matrix(4, 10, 40);
    auto fit = dmd_fit<double>(X, X, 0);
    for (Index i = 0; i < fit.lambda.size(); ++i) {
        CHECK(std::abs(fit.lambda(i) - cd(1.0)) < 1e-10);
    }
    fit = dmd_fit<double>(X, MatrixXd(2 * X), 0);
    for (Index i = 0; i < fit.lambda.size(); ++i) {
        CHECK(std::abs(fit.lambda(i) - cd(2.0)) < 1e-10);
    }

    const double phi = 0.4;
    MatrixXd orbit(2, 30);
    orbit.col(0) << 1, 0;
    for (Index k = 1; k < 30; ++k) {
        orbit.col(k) = rotation(phi) * orbit.col(k - 1);
    }
    fit = dmd_fit<double>(MatrixXd(orbit.leftCols(29)), MatrixXd(orbit.rightCols(29)), 0);
    CHECK(fit.rank == 2);
    const cd a = std::polar(1.0, phi);
    CHECK(std::abs(fit.lambda(0) * fit.lambda(1) - cd(1.0)) < 1e-8);
    CHECK(std::min(std::abs(fit.lambda(0) - a), std::abs(fit.lambda(0) - std::conj(a))) < 1e-8);

    CHECK_THROWS_AS(dmd_fit<double>(MatrixXd::Zero(3, 4), MatrixXd::Zero(3, 4), 0), NumericalError);
    CHECK_THROWS_AS(dmd_fit<double>(X, MatrixXd(X.leftCols(3)), 0), InvalidArgument);
}

TEST_CASE("dmd_forecast examples")
{
    const MatrixXd X = random_matrix(3, 8, 41);
    const auto ident = dmd_fit<double>(X, X, 0);
    const CVec<double> k0 = dmd_forecast(ident, 0);
    CHECK((k0 - X.col(7).cast<cd>()).norm() < 1e-8);
    CHECK((dmd_forecast(ident, 5) - k0).norm() < 1e-8);

    MatrixXd traj(2, 12);
    traj.col(0) << 1, 1;
    MatrixXd M(2, 2);
    M << 0.9, 0.1, 0.0, 0.7;
    for (Index k = 1; k < 12; ++k) {
        traj.col(k) = M * traj.col(k - 1);
    }
    const auto fit = dmd_fit<double>(MatrixXd(traj.leftCols(11)), MatrixXd(traj.rightCols(11)), 0);
    CHECK((dmd_forecast(fit, 0) - traj.col(11).cast<cd>()).norm() < 1e-10);
    double rho = 0, bound = 0;
    for (Index i = 0; i < fit.lambda.size(); ++i) {
        rho = std::max(rho, std::abs(fit.lambda(i)));
        bound += fit.Phi.col(i).norm() * std::abs(fit.b0(i));
    }
    CHECK(rho < 1.0);
    for (Index k = 0; k < 20; ++k) {
        CHECK(dmd_forecast(fit, k).norm() <= bound * std::pow(rho, static_cast<double>(k)) * (1 + 1e-12));
    }
    CHECK_THROWS_AS(dmd_forecast(fit, -1), InvalidArgument);
}
