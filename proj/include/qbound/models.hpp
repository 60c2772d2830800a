#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qbound/matcore.hpp"

namespace qbound {

/// Named model constants; scalars are stored as one-element vectors.
using Constants = std::map<std::string, std::vector<double>>;

/// A smooth family t -> rho_t with optional analytic derivatives.
class ParametricModel {
public:
    using StateFn = std::function<CMat(const RVec&)>;
    using DerivativeFn = std::function<std::vector<CMat>(const RVec&)>;
    using DomainFn = std::function<bool(const RVec&)>;

    ParametricModel(std::string name, int dim, int params, StateFn state,
                    DerivativeFn derivatives = {}, DomainFn domain = {});

    const std::string& name() const { return name_; }
    int dim() const { return dim_; }
    int params() const { return params_; }
    double step() const { return step_; }
    bool has_analytic_derivatives() const { return static_cast<bool>(derivatives_); }
    bool in_domain(const RVec& t) const;

    const std::vector<std::string>& param_names() const { return param_names_; }
    const std::optional<RVec>& default_point() const { return default_point_; }

    ParametricModel with_step(double h) const;
    ParametricModel with_param_names(std::vector<std::string> names) const;
    ParametricModel with_default_point(RVec t) const;
    /// Same state map with the analytic derivatives dropped (forces finite differences).
    ParametricModel numerical() const;

    CMat raw_state(const RVec& t) const { return state_(t); }
    std::vector<CMat> raw_derivatives(const RVec& t) const { return derivatives_(t); }

private:
    std::string name_;
    int dim_;
    int params_;
    double step_ = 1e-5;
    StateFn state_;
    DerivativeFn derivatives_;
    DomainFn domain_;
    std::vector<std::string> param_names_;
    std::optional<RVec> default_point_;
};

/// Validated density matrix at t.
CMat state_at(const ParametricModel& model, const RVec& t);

/// Analytic derivatives when supplied, central differences otherwise.
std::vector<CMat> derivatives_at(const ParametricModel& model, const RVec& t0);
std::vector<CMat> finite_difference_derivatives(const ParametricModel& model, const RVec& t0, double h);

// Built-in families.
ParametricModel two_observables(const Eigen::Vector3d& a, const Eigen::Vector3d& b);
ParametricModel amplitude_damping();
ParametricModel multiphase(int d, int photons, double a, double eta);
ParametricModel qudit_full(const RVec& spectrum);
ParametricModel classical_diagonal(int d);
ParametricModel qubit_phase(double r);
/// Khan-Guta coordinates (theta^C, theta^R, theta^I) around diag(spectrum), one copy.
ParametricModel qlan_coordinates(const RVec& spectrum);

ParametricModel builtin(const std::string& name, const Constants& constants);
std::vector<std::string> builtin_names();

/// Generalised Gell-Mann basis of traceless Hermitian d x d matrices, Tr[G_a G_b] = 2 delta_ab.
std::vector<CMat> gell_mann_basis(int d);

/// rho_t = rho0 + sum_j t_j G_j.
ParametricModel linear_model(std::string name, const CMat& rho0, std::vector<CMat> generators);

/// Keeps the parameters in `keep`; the others are frozen at `base`.
ParametricModel restrict_model(const ParametricModel& model, const std::vector<int>& keep, const RVec& base);

/// t -> rho_{offset + A t}.
ParametricModel reparametrize(const ParametricModel& model, const RMat& a, const RVec& offset);

/// Two-observables closed forms used as oracles and for the CLI.
struct TwoObservablesGeometry {
    Eigen::Vector3d a, b, c, a_dual, b_dual;
    double s = 0.0;
};
TwoObservablesGeometry two_observables_geometry(const Eigen::Vector3d& a, const Eigen::Vector3d& b);

struct ModelExtension {
    int k = 0;
    int k_ext = 0;
    CMat rho;
    std::vector<CMat> derivatives;  // first k are the original ones
    std::vector<CMat> sld_basis;    // orthonormal under Tr[rho (XY+YX)/2]
};

ModelExtension minimal_d_invariant_extension(const ParametricModel& model, const RVec& t0);
ModelExtension minimal_d_invariant_extension(const CMat& rho, const std::vector<CMat>& derivatives);

/// Largest residual of d_map(B) outside the span of the extension's SLD basis.
double extension_closure_residual(const ModelExtension& ext);

}  // namespace qbound
