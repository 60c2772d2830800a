#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "qbound/matcore.hpp"
#include "qbound/models.hpp"
#include "qbound/nelder_mead.hpp"

namespace qbound {

/// Checks shape k x k, symmetry and PSD (eigenvalues >= -1e-10); returns the symmetrised, clamped matrix.
RMat validate_weight(const RMat& w, Eigen::Index k);
bool is_positive_definite(const RMat& w, double floor = kEigenFloor);

/// tr[W J^-1].
double sld_bound(const RMat& j, const RMat& w);
/// tr[W Re J~^-1] + tr|sqrt(W) Im(J~^-1) sqrt(W)|.
double rld_bound(const CMat& rld, const RMat& w);
/// tr[W J^-1] + (1/2) tr|sqrt(W) J^-1 D J^-1 sqrt(W)|.
double rld_bound_d_invariant(const RMat& j, const RMat& d, const RMat& w);

struct MinimizerDiagnostics {
    int restarts = 0;
    int evaluations = 0;
    int free_parameters = 0;
    bool converged = true;  // best restart reached the simplex-diameter tolerance
    bool stable = true;     // restart optima agree to 1e-5 relative
    std::vector<double> restart_values;
};

struct HolevoOptions {
    int restarts = 8;
    double perturbation = 0.5;
    std::uint64_t seed = 20190417;
    bool parallel = true;
    NelderMeadOptions nelder_mead;
};

struct HolevoResult {
    double value = 0.0;
    RMat P;  // k x k'
    RMat V;  // optimal limiting covariance
    MinimizerDiagnostics diagnostics;
};

/// f(P) = tr[W Re Z] + tr|sqrt(W) Im Z sqrt(W)| with Z = P J'^-1 P^T + (i/2) P J'^-1 D' J'^-1 P^T.
double holevo_objective(const RMat& p, const RMat& j_inv, const RMat& a, const RMat& w_sqrt, const RMat& w);
/// The same objective in the k' x k' form tr[P^T W P J'^-1] + (1/2) tr|sqrt(P^T W P) A sqrt(P^T W P)|.
double holevo_objective_lifted(const RMat& p, const RMat& j_inv, const RMat& a, const RMat& w);

/// Holevo bound of the first k parameters of a D-invariant k'-parameter model (J', D').
HolevoResult holevo_bound(const RMat& j_ext, const RMat& d_ext, const RMat& w, int k, const HolevoOptions& options = {});
/// Nuisance bound: first k of interest, next s nuisance, remaining k' - k - s extension directions.
HolevoResult nuisance_bound(const RMat& j_ext, const RMat& d_ext, const RMat& w, int k, int s,
                            const HolevoOptions& options = {});
/// tr[W~ J^-1] + (1/2) tr|sqrt(W~) J^-1 D J^-1 sqrt(W~)| with W~ = diag(W, 0).
double nuisance_closed_form(const RMat& j, const RMat& d, const RMat& w, int k);

/// Re Z + W^-1/2 |W^1/2 Im Z W^1/2| W^-1/2 (W positive definite).
RMat covariant_covariance(const RMat& re_z, const RMat& im_z, const RMat& w);
/// V for the extension matrix P; singular W is regularised by W + eps P_perp and extrapolated to eps = 0.
RMat optimal_limiting_covariance(const RMat& j_ext, const RMat& d_ext, const RMat& w, const RMat& p);

/// (1/2) tr|upper-left k x k block of J'^-1 D' J'^-1|.
double sld_gap_bound(const RMat& j_ext, const RMat& d_ext, int k);

/// Weight from a cost's quadratic expansion: half the Hessian of est -> cost(est, t0) at est = t0.
RMat cost_hessian(const std::function<double(const RVec&, const RVec&)>& cost, const RVec& t0, double h = 1e-4);

/// Extension data (J', D') at t0.
struct ExtensionQfi {
    int k = 0;
    int k_ext = 0;
    RMat J;
    RMat D;
};
ExtensionQfi extension_qfi(const ParametricModel& model, const RVec& t0);

HolevoResult holevo_bound(const ParametricModel& model, const RVec& t0, const RMat& w, const HolevoOptions& options = {});
HolevoResult nuisance_bound(const ParametricModel& model, const RVec& t0, const RMat& w, int s,
                            const HolevoOptions& options = {});

/// C(W, t0) for a cost with local weight W; singular W handled by regularisation and linear extrapolation.
double asymptotic_cost_bound(const ParametricModel& model, const RVec& t0, const RMat& w, int nuisance = 0,
                             const HolevoOptions& options = {});

/// Extrapolation to eps = 0 from values at eps = 1e-6, 1e-7, 1e-8 (fit in 1, sqrt(eps), eps).
double extrapolate_regularised(const std::function<double(double)>& f);

struct BoundReport {
    int k = 0;
    int nuisance_count = 0;
    int k_ext = 0;
    double sld = 0.0;
    double rld = 0.0;
    double holevo = 0.0;
    std::optional<double> nuisance;
    std::optional<double> sld_nuisance;
    RMat argmin_P;
    RMat V_opt;
    MinimizerDiagnostics diagnostics;
};

/// Full ladder at t0. With s > 0 nuisance parameters (the last s), sld/rld/holevo refer to the
/// interest parameters with the nuisance values known, and `nuisance` to the nuisance bound.
BoundReport bound_ladder(const ParametricModel& model, const RVec& t0, const RMat& w, int s = 0,
                         const HolevoOptions& options = {});

}  // namespace qbound
