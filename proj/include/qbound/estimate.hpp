#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "qbound/matcore.hpp"
#include "qbound/models.hpp"

namespace qbound {

/// Effects with one real estimate value per outcome.
struct Povm {
    std::vector<CMat> effects;
    std::vector<double> values;
};

/// Throws ValidationError unless the effects are PSD (>= -1e-10) and sum to I within 1e-9.
void validate_povm(const Povm& povm, Eigen::Index dim);

/// p_i = Tr[rho M_i], clamped at 0 and renormalised; throws if the sum is off by more than 1e-8.
std::vector<double> outcome_probabilities(const CMat& rho, const Povm& povm);

/// Multinomial counts drawn by conditional binomials.
std::vector<long> sample_counts(const std::vector<double>& probs, long shots, std::mt19937_64& rng);

/// I.i.d. categorical outcome indices.
std::vector<int> sample_povm(const CMat& rho, const Povm& povm, long shots, std::mt19937_64& rng);

/// SLD eigenbasis measurement with values t0 + lambda / J.
Povm one_param_local_povm(const ParametricModel& model, double t0);

struct SimulationRun {
    std::uint64_t seed = 0;
    long n = 0;
    long trials = 0;
    long local_copies = 0;         // copies used by the final local measurement
    std::vector<double> rescaled;  // sqrt(n) (t_hat - t_true), trial order
    std::vector<int> fallback;     // 1 where the two-step rule kept the first-stage estimate
    double mean = 0.0;
    double n_mse = 0.0;
    double n_mse_se = 0.0;
    double fallback_frequency = 0.0;
    std::vector<double> tail_levels;
    std::vector<double> tail_frequencies;  // fraction with rescaled^2 >= c
};

struct SimulationOptions {
    bool parallel = true;
    std::vector<double> tail_levels{1.0, 4.0};
};

/// Averaged local measurement at t0 on n copies of rho_{t_true}, repeated over trials.
SimulationRun simulate_mse(const ParametricModel& model, double t_true, double t0, long n, long trials,
                           std::uint64_t seed, const SimulationOptions& options = {});

struct TwoStepOptions {
    double lo = -3.14159265358979323846;
    double hi = 3.14159265358979323846;
    bool parallel = true;
    std::vector<double> tail_levels{1.0, 4.0};
};

/// ceil(n^(1 - x/2)), the first-stage copy count.
long two_step_first_stage(long n, double x);

/// Pauli tomography on the first stage, projection into [lo, hi], then the local measurement at the estimate.
SimulationRun two_step_simulate(const ParametricModel& model, double t_true, long n, double x, long trials,
                                std::uint64_t seed, const TwoStepOptions& options = {});

/// Parameter value whose Bloch vector is closest to `r` on [lo, hi] (grid search plus golden section).
double project_to_model(const ParametricModel& model, const Eigen::Vector3d& r, double lo, double hi);

struct FidelityCrReport {
    double eps = 0.0;
    double v0 = 0.0;
    double v_eps = 0.0;
    double fidelity = 0.0;
    double lhs = 0.0;
    double rhs = 0.0;
    double slack = 0.0;
    double bias0 = 0.0;
    double bias_eps = 0.0;
    bool unbiased = false;  // both biases within 1e-6
};

/// Exact evaluation of 1/2 (V_t0 + V_t0+eps + eps^2) against eps^2 / (8 (1 - F)).
FidelityCrReport fidelity_cr_check(const ParametricModel& model, double t0, double eps, const Povm& povm);

/// Minimum-norm outcome values unbiased at t0 and t0 + eps for the given effects.
Povm two_point_unbiased(const ParametricModel& model, double t0, double eps, const Povm& povm);

/// sup |F_n(x) - cdf(x)| for the empirical distribution of `samples`.
double ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf);
/// KS distance for samples on a lattice of the given spacing, with the continuity correction
/// P(X <= x) ~ cdf(x + h/2), P(X < x) ~ cdf(x - h/2) at each atom.
double ks_statistic_lattice(std::vector<double> samples, const std::function<double(double)>& cdf, double spacing);
/// Asymptotic 1% critical value 1.6276 / sqrt(n).
double ks_critical_1pct(long n);
double normal_cdf(double x, double variance);

}  // namespace qbound
