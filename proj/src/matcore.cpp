#include "qbound/matcore.hpp"

#include <cmath>
#include <sstream>

#include "qbound/errors.hpp"

namespace qbound {

namespace {

constexpr double kDerivativeTol = 1e-8;

void require_square(Eigen::Index rows, Eigen::Index cols, const char* what) {
    if (rows != cols || rows == 0) {
        std::ostringstream os;
        os << what << ": expected a non-empty square matrix, got " << rows << "x" << cols;
        throw ValidationError(os.str());
    }
}

void require_positive(const RVec& p, const char* what) {
    if (p.minCoeff() <= kEigenFloor) {
        std::ostringstream os;
        os << what << ": state is not strictly positive (min eigenvalue " << p.minCoeff() << ")";
        throw PreconditionError(os.str());
    }
}

}  // namespace

bool all_finite(const CMat& a) { return a.allFinite(); }
bool all_finite(const RMat& a) { return a.allFinite(); }

bool is_hermitian(const CMat& a, double tol) {
    if (a.rows() != a.cols()) return false;
    const double scale = std::max(1.0, a.norm());
    return (a - a.adjoint()).norm() <= tol * scale;
}

bool is_symmetric(const RMat& a, double tol) {
    if (a.rows() != a.cols()) return false;
    const double scale = std::max(1.0, a.norm());
    return (a - a.transpose()).norm() <= tol * scale;
}

void require_hermitian(const CMat& a, const char* what, double tol) {
    require_square(a.rows(), a.cols(), what);
    if (!a.allFinite()) throw ValidationError(std::string(what) + ": non-finite entries");
    if (!is_hermitian(a, tol)) throw ValidationError(std::string(what) + ": matrix is not Hermitian");
}

void require_symmetric(const RMat& a, const char* what, double tol) {
    require_square(a.rows(), a.cols(), what);
    if (!a.allFinite()) throw ValidationError(std::string(what) + ": non-finite entries");
    if (!is_symmetric(a, tol)) throw ValidationError(std::string(what) + ": matrix is not symmetric");
}

EigenSystem hermitian_eig(const CMat& h) {
    require_hermitian(h, "hermitian_eig");
    const CMat sym = (h + h.adjoint()) / 2.0;
    Eigen::SelfAdjointEigenSolver<CMat> es(sym);
    if (es.info() != Eigen::Success) throw PreconditionError("hermitian_eig: eigensolver failed");
    return {es.eigenvalues(), es.eigenvectors()};
}

AbsValue matrix_abs(const CMat& a) {
    require_square(a.rows(), a.cols(), "matrix_abs");
    if (!a.allFinite()) throw ValidationError("matrix_abs: non-finite entries");
    Eigen::JacobiSVD<CMat> svd(a, Eigen::ComputeFullV);
    const RVec& s = svd.singularValues();
    const CMat& v = svd.matrixV();
    return {v * s.cast<cplx>().asDiagonal() * v.adjoint(), s.sum()};
}

RealAbsValue matrix_abs(const RMat& a) {
    require_square(a.rows(), a.cols(), "matrix_abs");
    if (!a.allFinite()) throw ValidationError("matrix_abs: non-finite entries");
    Eigen::JacobiSVD<RMat> svd(a, Eigen::ComputeFullV);
    const RVec& s = svd.singularValues();
    const RMat& v = svd.matrixV();
    return {v * s.asDiagonal() * v.transpose(), s.sum()};
}

double trace_norm(const CMat& a) {
    if (a.size() == 0) return 0.0;
    return Eigen::JacobiSVD<CMat>(a).singularValues().sum();
}

double trace_norm(const RMat& a) {
    if (a.size() == 0) return 0.0;
    return Eigen::JacobiSVD<RMat>(a).singularValues().sum();
}

CMat psd_sqrt(const CMat& w) {
    const EigenSystem es = hermitian_eig(w);
    if (es.values.minCoeff() < -kEigenFloor) throw PreconditionError("psd_sqrt: matrix is not PSD");
    const RVec root = es.values.cwiseMax(0.0).cwiseSqrt();
    return es.vectors * root.cast<cplx>().asDiagonal() * es.vectors.adjoint();
}

RMat psd_sqrt(const RMat& w) {
    require_symmetric(w, "psd_sqrt");
    Eigen::SelfAdjointEigenSolver<RMat> es((w + w.transpose()) / 2.0);
    if (es.eigenvalues().minCoeff() < -kEigenFloor) throw PreconditionError("psd_sqrt: matrix is not PSD");
    const RVec root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

RMat pd_inv_sqrt(const RMat& w) {
    require_symmetric(w, "pd_inv_sqrt");
    Eigen::SelfAdjointEigenSolver<RMat> es((w + w.transpose()) / 2.0);
    if (es.eigenvalues().minCoeff() <= kEigenFloor) throw PreconditionError("pd_inv_sqrt: matrix is not positive definite");
    const RVec r = es.eigenvalues().cwiseSqrt().cwiseInverse();
    return es.eigenvectors() * r.asDiagonal() * es.eigenvectors().transpose();
}

RMat spd_inverse(const RMat& a, const char* what) {
    require_symmetric(a, what, 1e-9);
    Eigen::SelfAdjointEigenSolver<RMat> es((a + a.transpose()) / 2.0);
    const double top = std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
    if (es.eigenvalues().minCoeff() <= 1e-13 * top) {
        throw PreconditionError(std::string(what) + ": matrix is singular or not positive definite");
    }
    return es.eigenvectors() * es.eigenvalues().cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
}

StateBasis::StateBasis(const CMat& rho) : rho_(rho) {
    const EigenSystem es = hermitian_eig(rho);
    p_ = es.values;
    u_ = es.vectors;
    require_positive(p_, "state");
}

CMat sld_solve(const StateBasis& basis, const CMat& g) {
    require_hermitian(g, "sld_solve", kDerivativeTol);
    if (g.rows() != basis.dim()) throw ValidationError("sld_solve: dimension mismatch");
    const RVec& p = basis.p();
    CMat l = basis.to_eigenbasis(g);
    for (Eigen::Index j = 0; j < l.rows(); ++j)
        for (Eigen::Index k = 0; k < l.cols(); ++k) l(j, k) *= 2.0 / (p(j) + p(k));
    CMat out = basis.from_eigenbasis(l);
    return (out + out.adjoint()) / 2.0;
}

CMat sld_solve(const CMat& rho, const CMat& g) { return sld_solve(StateBasis(rho), g); }

CMat sld_solve_on_support(const CMat& rho, const CMat& g) {
    require_hermitian(g, "sld_solve_on_support", kDerivativeTol);
    const EigenSystem es = hermitian_eig(rho);
    if (es.values.minCoeff() < -kEigenFloor) throw PreconditionError("sld_solve_on_support: state is not PSD");
    const RVec& p = es.values;
    CMat l = es.vectors.adjoint() * g * es.vectors;
    const double scale = std::max(1.0, g.norm());
    for (Eigen::Index j = 0; j < l.rows(); ++j) {
        for (Eigen::Index k = 0; k < l.cols(); ++k) {
            const double s = p(j) + p(k);
            if (s > kEigenFloor) {
                l(j, k) *= 2.0 / s;
            } else {
                if (std::abs(l(j, k)) > kDerivativeTol * scale)
                    throw PreconditionError("sld_solve_on_support: derivative leaves the support of the state");
                l(j, k) = 0.0;
            }
        }
    }
    CMat out = es.vectors * l * es.vectors.adjoint();
    return (out + out.adjoint()) / 2.0;
}

CMat d_map(const StateBasis& basis, const CMat& x) {
    require_hermitian(x, "d_map", kDerivativeTol);
    if (x.rows() != basis.dim()) throw ValidationError("d_map: dimension mismatch");
    const RVec& p = basis.p();
    CMat y = basis.to_eigenbasis(x);
    const cplx two_i(0.0, 2.0);
    for (Eigen::Index j = 0; j < y.rows(); ++j)
        for (Eigen::Index k = 0; k < y.cols(); ++k) y(j, k) *= two_i * (p(k) - p(j)) / (p(j) + p(k));
    CMat out = basis.from_eigenbasis(y);
    return (out + out.adjoint()) / 2.0;
}

CMat d_map(const CMat& rho, const CMat& x) { return d_map(StateBasis(rho), x); }

CMat pauli(int axis) {
    CMat s = CMat::Zero(2, 2);
    switch (axis) {
        case 0: s << 1, 0, 0, 1; break;
        case 1: s << 0, 1, 1, 0; break;
        case 2: s << 0, cplx(0, -1), cplx(0, 1), 0; break;
        case 3: s << 1, 0, 0, -1; break;
        default: throw ValidationError("pauli: axis must be 0..3");
    }
    return s;
}

CMat bloch_state(const Eigen::Vector3d& n) {
    return (pauli(0) + n(0) * pauli(1) + n(1) * pauli(2) + n(2) * pauli(3)) / 2.0;
}

Eigen::Vector3d bloch_vector(const CMat& rho) {
    Eigen::Vector3d n;
    for (int a = 0; a < 3; ++a) n(a) = (rho * pauli(a + 1)).trace().real();
    return n;
}

CMat kron(const CMat& a, const CMat& b) {
    CMat out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

RMat omega(int modes) {
    RMat o = RMat::Zero(2 * modes, 2 * modes);
    for (int j = 0; j < modes; ++j) {
        o(2 * j, 2 * j + 1) = 1.0;
        o(2 * j + 1, 2 * j) = -1.0;
    }
    return o;
}

}  // namespace qbound
