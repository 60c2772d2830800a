#include "qbound/gaussian.hpp"

#include <cmath>

#include "qbound/bounds.hpp"
#include "qbound/errors.hpp"
#include "qbound/sampling.hpp"

namespace qbound {

namespace {

constexpr double kCommuteTol = 1e-8;
constexpr double kInvariantTol = 1e-8;
constexpr double kSymplecticTol = 1e-9;

// Orthonormal real basis pairs from the positive eigenvectors of i*B (B real antisymmetric):
// columns (sqrt2 Im v, sqrt2 Re v) turn B into blocks [[0, b], [-b, 0]].
struct AntisymmetricBlocks {
    RMat basis;  // n x 2m
    RVec b;      // m values, ascending
};

AntisymmetricBlocks antisymmetric_blocks(const RMat& a, double tol) {
    const auto n = a.rows();
    const CMat h = cplx(0.0, 1.0) * a.cast<cplx>();
    Eigen::SelfAdjointEigenSolver<CMat> es((h + h.adjoint()) / 2.0);
    std::vector<Eigen::Index> pos;
    for (Eigen::Index i = 0; i < n; ++i)
        if (es.eigenvalues()(i) > tol) pos.push_back(i);
    AntisymmetricBlocks out;
    out.basis.resize(n, 2 * static_cast<Eigen::Index>(pos.size()));
    out.b.resize(static_cast<Eigen::Index>(pos.size()));
    for (size_t j = 0; j < pos.size(); ++j) {
        const CVec v = es.eigenvectors().col(pos[j]);
        out.basis.col(2 * j) = std::sqrt(2.0) * v.imag();
        out.basis.col(2 * j + 1) = std::sqrt(2.0) * v.real();
        out.b(static_cast<Eigen::Index>(j)) = es.eigenvalues()(pos[j]);
    }
    return out;
}

RMat sigma_root(const RMat& sigma) { return psd_sqrt(RMat((sigma + sigma.transpose()) / 2.0)); }

TailEstimate run_tail(const RMat& sigma, const RMat& w, double c, const TailOptions& opt) {
    if (opt.samples < 1) throw ValidationError("tail bound: samples must be >= 1");
    TailEstimate out;
    out.covariance = sigma;
    out.samples = opt.samples;
    const RMat root = sigma_root(sigma);
    const TailCount tc = opt.parallel ? tail_count_parallel(root, w, c, opt.samples, opt.seed)
                                      : tail_count_serial(root, w, c, opt.samples, opt.seed);
    out.probability = static_cast<double>(tc.hits) / static_cast<double>(tc.samples);
    out.standard_error = std::sqrt(out.probability * (1.0 - out.probability) / static_cast<double>(tc.samples));
    return out;
}

}  // namespace

double two_sided_normal_tail(double x) { return std::erfc(x / std::sqrt(2.0)); }

void validate_gaussian(const GaussianModel& g) {
    const int n = g.d_c + 2 * g.d_q;
    if (g.d_c < 0 || g.d_q < 0 || n == 0) throw ValidationError("gaussian model: need d_c, d_q >= 0 and d_c + d_q > 0");
    if (g.gamma.rows() != n || g.gamma.cols() != n) throw ValidationError("gaussian model: Gamma has the wrong shape");
    require_hermitian(g.gamma, "gaussian model Gamma", 1e-10);
    if (g.t.rows() != n || g.t.cols() < 1) throw ValidationError("gaussian model: T must have d_c + 2 d_q rows");
    Eigen::SelfAdjointEigenSolver<RMat> es(g.gamma.real());
    if (es.eigenvalues().minCoeff() < -kEigenFloor) throw ValidationError("gaussian model: Re Gamma is not PSD");
    if (g.d_c > 0 && g.gamma.imag().topRows(g.d_c).norm() > 1e-10)
        throw ValidationError("gaussian model: Im Gamma must vanish on the classical block");
}

RMat paired_diagonal(const RVec& v) {
    RVec d(2 * v.size());
    for (Eigen::Index j = 0; j < v.size(); ++j) d(2 * j) = d(2 * j + 1) = v(j);
    return d.asDiagonal();
}

CMat thermal_correlation(const RVec& n) {
    return paired_diagonal(n).cast<cplx>() + cplx(0.0, 0.5) * omega(static_cast<int>(n.size())).cast<cplx>();
}

SymplecticDecomposition williamson(const RMat& m) {
    require_symmetric(m, "williamson", 1e-10);
    if (m.rows() % 2 != 0) throw ValidationError("williamson: dimension must be even");
    const int modes = static_cast<int>(m.rows() / 2);
    const RMat ms = (m + m.transpose()) / 2.0;
    if (!is_positive_definite(ms, 0.0)) throw ValidationError("williamson: matrix is not positive definite");
    const RMat root = psd_sqrt(ms);
    const RMat inv_root = pd_inv_sqrt(ms);
    const RMat a = root * omega(modes) * root;
    const AntisymmetricBlocks blocks = antisymmetric_blocks(a, 0.0);
    if (blocks.b.size() != modes) throw PreconditionError("williamson: could not pair symplectic eigenvalues");
    SymplecticDecomposition out;
    out.nu = blocks.b;
    RVec scale(2 * modes);
    for (int j = 0; j < modes; ++j) scale(2 * j) = scale(2 * j + 1) = std::sqrt(out.nu(j));
    out.S = inv_root * blocks.basis * scale.asDiagonal();
    return out;
}

CanonicalForm canonical_form(const CMat& gamma) {
    require_hermitian(gamma, "canonical_form", 1e-10);
    const auto n = gamma.rows();
    const RMat re = (gamma.real() + gamma.real().transpose()) / 2.0;
    const RMat im = (gamma.imag() - gamma.imag().transpose()) / 2.0;
    {
        Eigen::SelfAdjointEigenSolver<RMat> es(re, Eigen::EigenvaluesOnly);
        if (es.eigenvalues().minCoeff() < -kEigenFloor) throw ValidationError("canonical_form: Re Gamma is indefinite");
    }
    const double tol = 1e-9 * std::max(1.0, gamma.norm());
    const AntisymmetricBlocks blocks = antisymmetric_blocks(im, tol);
    const auto m = blocks.b.size();
    const auto dc = n - 2 * m;

    // Kernel of Im Gamma: eigenvectors of B^T B with the smallest eigenvalues.
    Eigen::SelfAdjointEigenSolver<RMat> ker(im.transpose() * im);
    RMat q(n, n);
    q.leftCols(dc) = ker.eigenvectors().leftCols(dc);
    q.rightCols(2 * m) = blocks.basis;

    const RMat rq = q.transpose() * re * q;
    const RMat rcc = rq.topLeftCorner(dc, dc);
    const RMat rqc = rq.bottomLeftCorner(2 * m, dc);
    const RMat rqq = rq.bottomRightCorner(2 * m, 2 * m);
    RMat shear = RMat::Zero(2 * m, dc);
    if (dc > 0 && m > 0) shear = -rqc * rcc.completeOrthogonalDecomposition().pseudoInverse();

    CanonicalForm out;
    out.d_c = static_cast<int>(dc);
    out.d_q = static_cast<int>(m);
    out.classical = rcc;
    RMat tq = RMat::Identity(2 * m, 2 * m);
    if (m > 0) {
        RVec r(2 * m);
        for (Eigen::Index j = 0; j < m; ++j) r(2 * j) = r(2 * j + 1) = 1.0 / std::sqrt(2.0 * blocks.b(j));
        const RMat schur = rqq + shear * rqc.transpose();
        const RMat aq = r.asDiagonal() * schur * r.asDiagonal();
        const SymplecticDecomposition sd = williamson(RMat((aq + aq.transpose()) / 2.0));
        tq = sd.S.transpose() * r.asDiagonal();
        out.symplectic = sd.nu;
        out.thermal = sd.nu.array() - 0.5;
    }
    RMat t = RMat::Zero(n, n);
    t.topLeftCorner(dc, dc).setIdentity();
    t.bottomLeftCorner(2 * m, dc) = tq * shear;
    t.bottomRightCorner(2 * m, 2 * m) = tq;
    out.T = t * q.transpose();
    return out;
}

CMat rld_of_gaussian(const CMat& gamma) {
    require_hermitian(gamma, "rld_of_gaussian", 1e-10);
    Eigen::FullPivLU<CMat> lu(gamma);
    if (!lu.isInvertible()) throw PreconditionError("rld_of_gaussian: Gamma is singular");
    const CMat inv = lu.inverse();
    return (inv + inv.adjoint()) / 2.0;
}

DInvarianceReport is_d_invariant_submodel(const CMat& gamma, const RMat& t) {
    require_hermitian(gamma, "is_d_invariant_submodel", 1e-10);
    if (t.rows() != gamma.rows()) throw ValidationError("is_d_invariant_submodel: T has the wrong number of rows");
    const RMat a = gamma.real();
    const RMat b = gamma.imag();
    const RMat y = spd_inverse(RMat((a + a.transpose()) / 2.0), "is_d_invariant_submodel") * t;
    Eigen::JacobiSVD<RMat> svd(y, Eigen::ComputeThinU);
    const RVec& s = svd.singularValues();
    int rank = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i)
        if (s(i) > 1e-10 * std::max(1.0, s(0))) ++rank;
    if (rank < t.cols()) throw ValidationError("is_d_invariant_submodel: T is rank deficient");
    const RMat q = svd.matrixU().leftCols(rank);
    const RMat resid = (RMat::Identity(a.rows(), a.rows()) - q * q.transpose()) * b * q;
    DInvarianceReport out;
    out.rank = rank;
    out.residual = resid.norm();
    out.invariant = out.residual < kInvariantTol;
    return out;
}

RMat measurement_covariance(const CMat& z, const RMat& w) {
    require_hermitian(z, "measurement_covariance", 1e-10);
    return covariant_covariance(z.real(), z.imag(), w);
}

double simultaneous_symplectic_residual(const RMat& a1, const RMat& a2) {
    if (a1.rows() != a2.rows() || a1.cols() != a2.cols() || a1.rows() % 2 != 0)
        throw ValidationError("simultaneous_symplectic_check: dimension mismatch");
    require_symmetric(a1, "simultaneous_symplectic_check", 1e-10);
    require_symmetric(a2, "simultaneous_symplectic_check", 1e-10);
    const RMat o = omega(static_cast<int>(a1.rows() / 2));
    return (o * a2 * a1 - a1 * a2 * o).norm();
}

bool simultaneous_symplectic_check(const RMat& a1, const RMat& a2) {
    return simultaneous_symplectic_residual(a1, a2) < kSymplecticTol;
}

TailEstimate gaussian_tail_bound(const RMat& gamma_c, const RVec& n, const RMat& w, double c, const TailOptions& options) {
    const auto dc = gamma_c.rows();
    const auto dq = n.size();
    const auto k = dc + 2 * dq;
    if (k == 0) throw ValidationError("gaussian_tail_bound: empty model");
    if (dc > 0) require_symmetric(gamma_c, "gaussian_tail_bound Gamma^C", 1e-10);
    const RMat wv = validate_weight(w, k);
    const double scale = std::max(1.0, wv.norm());
    RMat shape = RMat::Zero(k, k);
    if (dc > 0) shape.topLeftCorner(dc, dc) = wv.topLeftCorner(dc, dc);
    for (Eigen::Index j = 0; j < dq; ++j) {
        const auto o = dc + 2 * j;
        const double wj = wv(o, o);
        shape.block(o, o, 2, 2) = wj * RMat::Identity(2, 2);
    }
    if ((shape - wv).norm() > 1e-12 * scale)
        throw ValidationError("gaussian_tail_bound: W must be W^C on the classical block and w_j I_2 per mode");
    if (n.size() > 0 && n.minCoeff() < 0.0) throw ValidationError("gaussian_tail_bound: occupations must be >= 0");

    RMat sigma = RMat::Zero(k, k);
    if (dc > 0) sigma.topLeftCorner(dc, dc) = gamma_c;
    for (Eigen::Index j = 0; j < dq; ++j) sigma.block(dc + 2 * j, dc + 2 * j, 2, 2) = (n(j) + 0.5) * RMat::Identity(2, 2);

    TailEstimate out = run_tail(sigma, wv, c, options);
    if (c <= 0.0) {
        out.closed_form = 1.0;
    } else if (k == 1 && wv(0, 0) > 0.0) {
        out.closed_form = two_sided_normal_tail(std::sqrt(c / wv(0, 0)) / std::sqrt(sigma(0, 0)));
    }
    return out;
}

double tail_commutator_norm(const RMat& j, const RMat& d, const RMat& w) {
    const RMat wv = validate_weight(w, j.rows());
    const RMat jr = pd_inv_sqrt(j);
    const RMat x = jr * wv * jr;
    const RMat y = jr * d * jr;
    return (x * y - y * x).norm();
}

TailEstimate qudit_tail_bound(const RMat& j, const RMat& d, const RMat& w, double c, const TailOptions& options) {
    require_symmetric(j, "qudit_tail_bound J", 1e-10);
    if (d.rows() != j.rows() || d.cols() != j.cols()) throw ValidationError("qudit_tail_bound: D has the wrong shape");
    const RMat wv = validate_weight(w, j.rows());
    const double comm = tail_commutator_norm(j, d, wv);
    if (comm >= kCommuteTol)
        throw PreconditionError("qudit_tail_bound: J^-1/2 W J^-1/2 does not commute with J^-1/2 D J^-1/2");
    const RMat ji = spd_inverse(j, "qudit_tail_bound");
    const RMat ws = psd_sqrt(wv);
    const RMat sigma = ws * ji * ws + 0.5 * matrix_abs(RMat(ws * ji * d * ji * ws)).abs;
    return run_tail((sigma + sigma.transpose()) / 2.0, RMat::Identity(j.rows(), j.rows()), c, options);
}

}  // namespace qbound
