#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "qbound/matcore.hpp"

namespace qbound {

/// Classical-quantum Gaussian shift model: Gamma = Gamma^C (+) Gamma^Q, displacement map T.
struct GaussianModel {
    int d_c = 0;
    int d_q = 0;
    CMat gamma;  // (d_c + 2 d_q) square
    RMat t;      // (d_c + 2 d_q) x k
};

void validate_gaussian(const GaussianModel& g);

struct SymplecticDecomposition {
    RMat S;    // S^T Omega S = Omega,  S^T M S = diag(nu_1, nu_1, ..., nu_m, nu_m)
    RVec nu;   // ascending
};

SymplecticDecomposition williamson(const RMat& m);

/// E(v) = diag(v_1, v_1, ..., v_m, v_m).
RMat paired_diagonal(const RVec& v);
/// E(N) + (i/2) Omega for a product of thermal modes.
CMat thermal_correlation(const RVec& n);

struct CanonicalForm {
    RMat T;             // rows: d_c classical coordinates, then 2 d_q quadratures
    int d_c = 0;
    int d_q = 0;
    RMat classical;     // Gamma^C block of T Gamma T^T
    RVec symplectic;    // nu_j: T Gamma T^T = Gamma^C (+) (E(nu) + (i/2) Omega)
    RVec thermal;       // mean occupation nu_j - 1/2
};

CanonicalForm canonical_form(const CMat& gamma);

/// Gamma^-1, the RLD matrix of the Gaussian shift family.
CMat rld_of_gaussian(const CMat& gamma);

struct DInvarianceReport {
    bool invariant = false;
    double residual = 0.0;
    int rank = 0;
};

DInvarianceReport is_d_invariant_submodel(const CMat& gamma, const RMat& t);

/// Re Z + W^-1/2 |W^1/2 Im Z W^1/2| W^-1/2.
RMat measurement_covariance(const CMat& z, const RMat& w);

bool simultaneous_symplectic_check(const RMat& a1, const RMat& a2);
double simultaneous_symplectic_residual(const RMat& a1, const RMat& a2);

struct TailEstimate {
    double probability = 0.0;
    double standard_error = 0.0;
    long samples = 0;
    std::optional<double> closed_form;
    RMat covariance;
};

struct TailOptions {
    long samples = 1000000;
    std::uint64_t seed = 1;
    bool parallel = true;
};

/// Tail N[0, Sigma]({x : x^T W x >= c}) with Sigma = Gamma^C (+) (N_j + 1/2) I_2 per mode.
/// W must be W^C on the classical block and w_j I_2 per mode.
TailEstimate gaussian_tail_bound(const RMat& gamma_c, const RVec& n, const RMat& w, double c,
                                 const TailOptions& options = {});

/// Tail of N[0, W^1/2 J^-1 W^1/2 + (1/2)|W^1/2 J^-1 D J^-1 W^1/2|] outside the ball ||x|| >= sqrt(c).
TailEstimate qudit_tail_bound(const RMat& j, const RMat& d, const RMat& w, double c, const TailOptions& options = {});
double tail_commutator_norm(const RMat& j, const RMat& d, const RMat& w);

/// 2 Phi(-x).
double two_sided_normal_tail(double x);

}  // namespace qbound
