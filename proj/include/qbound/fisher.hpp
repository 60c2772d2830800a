#pragma once

#include <optional>
#include <vector>

#include "qbound/matcore.hpp"
#include "qbound/models.hpp"

namespace qbound {

struct QfiBundle {
    RVec t0;
    CMat rho;
    std::vector<CMat> derivatives;
    std::vector<CMat> sld;
    RMat J;
    std::optional<RMat> D;
    std::optional<CMat> rld;
};

/// SLD operators and J_ij = Tr[rho (L_i L_j + L_j L_i)/2].
QfiBundle sld_qfi(const ParametricModel& model, const RVec& t0);
QfiBundle sld_qfi(const CMat& rho, const std::vector<CMat>& derivatives);

/// D_jk = i Tr[rho [L_j, L_k]].
RMat d_matrix(const QfiBundle& bundle);
RMat d_matrix(const ParametricModel& model, const RVec& t0);

/// J~_ij = Tr[d_i rho rho^-1 d_j rho]; with this index order J~^-1 = J^-1 + (i/2) J^-1 D J^-1 for D-invariant models.
CMat rld_qfi(const CMat& rho, const std::vector<CMat>& derivatives);
CMat rld_qfi(const ParametricModel& model, const RVec& t0);

/// SLD, D and RLD in one pass.
QfiBundle full_qfi(const ParametricModel& model, const RVec& t0);
QfiBundle full_qfi(const CMat& rho, const std::vector<CMat>& derivatives);

/// J^-1 + (i/2) J^-1 D J^-1, the inverse RLD matrix of a D-invariant model.
CMat d_invariant_inverse_rld(const RMat& j, const RMat& d);

struct EpsRldMatrix {
    double eps = 0.0;
    CMat matrix;
};

/// (Tr[rho_{t0+eps e_i} rho_{t0}^-1 rho_{t0+eps e_j}] - 1) / eps^2.
EpsRldMatrix eps_rld(const ParametricModel& model, const RVec& t0, double eps);
/// n-copy version at step eps/sqrt(n), via the product identity.
EpsRldMatrix ncopy_eps_rld(const ParametricModel& model, const RVec& t0, double eps, long n);
/// Limit matrix with entries (exp(eps^2 J~_ij) - 1) / eps^2.
CMat eps_rld_limit(const CMat& rld, double eps);

/// Tr|sqrt(rho) sqrt(sigma)|.
double fidelity(const CMat& rho, const CMat& sigma);

struct FidelitySld {
    double value = 0.0;
    bool converged = false;
    std::vector<double> raw;  // symmetric quotients at eps = 1e-2, 5e-3, 2.5e-3
};

/// One-parameter SLD information from 8(1 - F)/eps^2, Richardson-extrapolated.
FidelitySld fidelity_sld(const ParametricModel& model, const RVec& t0);

/// 8(1 - F(rho^n, rho_{t+eps/sqrt(n)}^n))/eps^2 through F^n.
double ncopy_fidelity_quotient(const ParametricModel& model, const RVec& t0, double eps, long n);
/// 8(1 - exp(-J eps^2 / 8))/eps^2.
double fidelity_quotient_limit(double j, double eps);

struct QlanPair {
    int j = 0;
    int k = 0;
    double ratio = 0.0;   // theta_k / theta_j
    double beta = 0.0;    // -ln(ratio)
    double thermal = 0.0; // ratio / (1 - ratio)
};

struct QlanCorrespondence {
    RVec spectrum;  // descending
    std::vector<QlanPair> pairs;
    CMat gamma;     // inverse RLD at t0
};

QlanCorrespondence qlan_correspondence(const ParametricModel& model, const RVec& t0);

/// Compares the inverse RLD of the Khan-Guta coordinates against e^{-beta'} = coth(beta/2)/4 per pair.
struct QlanBlockCheck {
    double re_residual = 0.0;   // max |Re block - coth(beta/2)/4 I|
    double im_residual = 0.0;   // max |Im block - Omega/2|
    double im_measured = 0.0;   // the (R,I) entry of Im(Gamma) for the first pair
};
QlanBlockCheck qlan_block_check(const RVec& spectrum);

}  // namespace qbound
