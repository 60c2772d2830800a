#pragma once

#include <complex>
#include <vector>

#include <Eigen/Dense>

namespace qbound {

using cplx = std::complex<double>;
using CMat = Eigen::MatrixXcd;
using RMat = Eigen::MatrixXd;
using CVec = Eigen::VectorXcd;
using RVec = Eigen::VectorXd;

inline constexpr double kHermitianTol = 1e-12;  // relative
inline constexpr double kEigenFloor = 1e-10;

struct EigenSystem {
    RVec values;   // ascending
    CMat vectors;  // columns are eigenvectors
};

struct AbsValue {
    CMat abs;
    double trace_norm = 0.0;
};

struct RealAbsValue {
    RMat abs;
    double trace_norm = 0.0;
};

/// Relative Hermiticity test: ||A - A^dag|| <= tol * max(1, ||A||).
bool is_hermitian(const CMat& a, double tol = kHermitianTol);
bool is_symmetric(const RMat& a, double tol = kHermitianTol);
bool all_finite(const CMat& a);
bool all_finite(const RMat& a);

/// Throws ValidationError unless `a` is square and Hermitian within tol.
void require_hermitian(const CMat& a, const char* what, double tol = kHermitianTol);
void require_symmetric(const RMat& a, const char* what, double tol = kHermitianTol);

EigenSystem hermitian_eig(const CMat& h);

/// |A| = sqrt(A^dag A) and the trace norm, from the singular value decomposition.
AbsValue matrix_abs(const CMat& a);
RealAbsValue matrix_abs(const RMat& a);
double trace_norm(const CMat& a);
double trace_norm(const RMat& a);

/// Square root of a PSD matrix; eigenvalues in [-1e-10, 0) are clamped.
CMat psd_sqrt(const CMat& w);
RMat psd_sqrt(const RMat& w);
/// Inverse square root of a positive definite real matrix.
RMat pd_inv_sqrt(const RMat& w);
/// Inverse of a symmetric positive definite matrix; throws on singular input.
RMat spd_inverse(const RMat& a, const char* what);

/// Eigenbasis of an invertible density matrix, reused across many SLD solves.
class StateBasis {
public:
    explicit StateBasis(const CMat& rho);
    const RVec& p() const { return p_; }
    const CMat& u() const { return u_; }
    const CMat& rho() const { return rho_; }
    Eigen::Index dim() const { return rho_.rows(); }

    CMat to_eigenbasis(const CMat& x) const { return u_.adjoint() * x * u_; }
    CMat from_eigenbasis(const CMat& x) const { return u_ * x * u_.adjoint(); }

private:
    CMat rho_;
    RVec p_;
    CMat u_;
};

/// Solves (rho L + L rho)/2 = G.
CMat sld_solve(const CMat& rho, const CMat& g);
CMat sld_solve(const StateBasis& basis, const CMat& g);

/// SLD restricted to the support of a possibly rank-deficient state.
/// Blocks between kernel vectors are set to zero; G must vanish there.
CMat sld_solve_on_support(const CMat& rho, const CMat& g);

/// Solves (rho D + D rho)/2 = i[X, rho].
CMat d_map(const CMat& rho, const CMat& x);
CMat d_map(const StateBasis& basis, const CMat& x);

CMat pauli(int axis);  // 0 -> I, 1 -> x, 2 -> y, 3 -> z
CMat bloch_state(const Eigen::Vector3d& n);
Eigen::Vector3d bloch_vector(const CMat& rho);
CMat kron(const CMat& a, const CMat& b);

/// Symplectic form: blocks [[0,1],[-1,0]] on the diagonal.
RMat omega(int modes);

}  // namespace qbound
