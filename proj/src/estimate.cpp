#include "qbound/estimate.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>

#include "qbound/errors.hpp"
#include "qbound/fisher.hpp"
#include "qbound/sampling.hpp"

namespace qbound {

namespace {

constexpr double kPovmTol = 1e-9;
constexpr double kProbTol = 1e-8;
constexpr double kUnbiasedTol = 1e-6;

void require_single_parameter(const ParametricModel& model, const char* what) {
    if (model.params() != 1) throw ValidationError(std::string(what) + ": model must have exactly one parameter");
}

// Runs body(trial) for every trial, serially or over OpenMP threads; the first exception is rethrown.
template <typename Body>
void for_each_trial(long trials, bool parallel, Body body) {
    if (!parallel) {
        for (long i = 0; i < trials; ++i) body(i);
        return;
    }
    std::exception_ptr error;
#pragma omp parallel for schedule(static)
    for (long i = 0; i < trials; ++i) {
        try {
            body(i);
        } catch (...) {
#pragma omp critical(qbound_trial_error)
            if (!error) error = std::current_exception();
        }
    }
    if (error) std::rethrow_exception(error);
}

void summarise(SimulationRun& run, const std::vector<double>& levels) {
    const double t = static_cast<double>(run.trials);
    double sum = 0.0, sq = 0.0, quart = 0.0;
    for (double r : run.rescaled) {
        sum += r;
        sq += r * r;
        quart += r * r * r * r;
    }
    run.mean = sum / t;
    run.n_mse = sq / t;
    const double var = std::max(0.0, quart / t - run.n_mse * run.n_mse);
    run.n_mse_se = std::sqrt(var / t);
    long falls = 0;
    for (int f : run.fallback) falls += f;
    run.fallback_frequency = static_cast<double>(falls) / t;
    run.tail_levels = levels;
    run.tail_frequencies.clear();
    for (double c : levels) {
        long hits = 0;
        for (double r : run.rescaled)
            if (r * r >= c) ++hits;
        run.tail_frequencies.push_back(static_cast<double>(hits) / t);
    }
}

double averaged_estimate(const std::vector<long>& counts, const std::vector<double>& values, long shots) {
    double s = 0.0;
    for (size_t i = 0; i < counts.size(); ++i) s += static_cast<double>(counts[i]) * values[i];
    return s / static_cast<double>(shots);
}

double bloch_distance2(const ParametricModel& model, double t, const Eigen::Vector3d& r) {
    RVec v(1);
    v(0) = t;
    return (bloch_vector(model.raw_state(v)) - r).squaredNorm();
}

}  // namespace

void validate_povm(const Povm& povm, Eigen::Index dim) {
    if (povm.effects.empty()) throw ValidationError("povm: no effects");
    if (povm.values.size() != povm.effects.size()) throw ValidationError("povm: one value per effect required");
    CMat total = CMat::Zero(dim, dim);
    for (const CMat& m : povm.effects) {
        if (m.rows() != dim || m.cols() != dim) throw ValidationError("povm: effect has the wrong dimension");
        require_hermitian(m, "povm effect", 1e-10);
        if (hermitian_eig(m).values.minCoeff() < -1e-10) throw ValidationError("povm: effect is not PSD");
        total += m;
    }
    if ((total - CMat::Identity(dim, dim)).norm() > kPovmTol) throw ValidationError("povm: effects do not sum to I");
}

std::vector<double> outcome_probabilities(const CMat& rho, const Povm& povm) {
    std::vector<double> p;
    p.reserve(povm.effects.size());
    double sum = 0.0;
    for (const CMat& m : povm.effects) {
        const double v = (rho * m).trace().real();
        if (v < -1e-10) throw ValidationError("povm: negative outcome probability");
        p.push_back(std::max(0.0, v));
        sum += p.back();
    }
    if (std::abs(sum - 1.0) > kProbTol) throw ValidationError("povm: outcome probabilities do not sum to 1");
    for (double& v : p) v /= sum;
    return p;
}

std::vector<long> sample_counts(const std::vector<double>& probs, long shots, std::mt19937_64& rng) {
    std::vector<long> counts(probs.size(), 0);
    long remaining = shots;
    double mass = 1.0;
    for (size_t i = 0; i + 1 < probs.size() && remaining > 0; ++i) {
        const double q = mass > 0.0 ? std::clamp(probs[i] / mass, 0.0, 1.0) : 0.0;
        std::binomial_distribution<long> draw(remaining, q);
        counts[i] = draw(rng);
        remaining -= counts[i];
        mass -= probs[i];
    }
    counts.back() += remaining;
    return counts;
}

std::vector<int> sample_povm(const CMat& rho, const Povm& povm, long shots, std::mt19937_64& rng) {
    validate_povm(povm, rho.rows());
    const std::vector<double> p = outcome_probabilities(rho, povm);
    std::discrete_distribution<int> draw(p.begin(), p.end());
    std::vector<int> out(static_cast<size_t>(shots));
    for (int& o : out) o = draw(rng);
    return out;
}

Povm one_param_local_povm(const ParametricModel& model, double t0) {
    require_single_parameter(model, "one_param_local_povm");
    RVec t(1);
    t(0) = t0;
    const CMat rho = state_at(model, t);
    const CMat l = sld_solve_on_support(rho, derivatives_at(model, t)[0]);
    const double j = (rho * l * l).trace().real();
    if (!(j >= 1e-10)) throw PreconditionError("one_param_local_povm: SLD Fisher information below 1e-10");
    const EigenSystem es = hermitian_eig(l);
    Povm out;
    for (Eigen::Index i = 0; i < es.values.size(); ++i) {
        const CVec v = es.vectors.col(i);
        out.effects.push_back(v * v.adjoint());
        out.values.push_back(t0 + es.values(i) / j);
    }
    return out;
}

SimulationRun simulate_mse(const ParametricModel& model, double t_true, double t0, long n, long trials,
                           std::uint64_t seed, const SimulationOptions& options) {
    require_single_parameter(model, "simulate_mse");
    if (n < 1 || trials < 1) throw ValidationError("simulate_mse: n and trials must be >= 1");
    const Povm povm = one_param_local_povm(model, t0);
    RVec tt(1);
    tt(0) = t_true;
    const std::vector<double> p = outcome_probabilities(state_at(model, tt), povm);

    SimulationRun run;
    run.seed = seed;
    run.n = n;
    run.trials = trials;
    run.local_copies = n;
    run.rescaled.assign(static_cast<size_t>(trials), 0.0);
    run.fallback.assign(static_cast<size_t>(trials), 0);
    const double root_n = std::sqrt(static_cast<double>(n));
    for_each_trial(trials, options.parallel, [&](long i) {
        std::mt19937_64 rng(stream_seed(seed, static_cast<std::uint64_t>(i)));
        const double est = averaged_estimate(sample_counts(p, n, rng), povm.values, n);
        run.rescaled[static_cast<size_t>(i)] = root_n * (est - t_true);
    });
    summarise(run, options.tail_levels);
    return run;
}

long two_step_first_stage(long n, double x) {
    return static_cast<long>(std::ceil(std::pow(static_cast<double>(n), 1.0 - x / 2.0) - 1e-12));
}

double project_to_model(const ParametricModel& model, const Eigen::Vector3d& r, double lo, double hi) {
    constexpr int kGrid = 720;
    const double step = (hi - lo) / kGrid;
    int best = 0;
    double best_val = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= kGrid; ++i) {
        const double v = bloch_distance2(model, lo + step * i, r);
        if (v < best_val) {
            best_val = v;
            best = i;
        }
    }
    double a = lo + step * std::max(0, best - 1);
    double b = lo + step * std::min(kGrid, best + 1);
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - g * (b - a), d = a + g * (b - a);
    double fc = bloch_distance2(model, c, r), fd = bloch_distance2(model, d, r);
    while (b - a > 1e-12) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = bloch_distance2(model, c, r);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = bloch_distance2(model, d, r);
        }
    }
    const double mid = (a + b) / 2.0;
    return bloch_distance2(model, mid, r) <= best_val ? mid : lo + step * best;
}

SimulationRun two_step_simulate(const ParametricModel& model, double t_true, long n, double x, long trials,
                                std::uint64_t seed, const TwoStepOptions& options) {
    require_single_parameter(model, "two_step_simulate");
    if (model.dim() != 2) throw PreconditionError("two_step_simulate: tomography stage needs a qubit model");
    if (!(x > 0.0 && x < 2.0 / 9.0)) throw ValidationError("two_step_simulate: x must lie in (0, 2/9)");
    if (trials < 1) throw ValidationError("two_step_simulate: trials must be >= 1");
    if (!(options.lo < options.hi)) throw ValidationError("two_step_simulate: empty parameter range");
    const long m = n > 0 ? two_step_first_stage(n, x) : 0;
    if (m < 30 || m >= n) throw ValidationError("two_step_simulate: n too small for the two-stage split");
    const long local = n - m;
    RVec tt(1);
    tt(0) = t_true;
    const CMat rho = state_at(model, tt);
    const Eigen::Vector3d r_true = bloch_vector(rho);
    const double radius = std::pow(static_cast<double>(n), -(1.0 - x) / 2.0);

    SimulationRun run;
    run.seed = seed;
    run.n = n;
    run.trials = trials;
    run.local_copies = local;
    run.rescaled.assign(static_cast<size_t>(trials), 0.0);
    run.fallback.assign(static_cast<size_t>(trials), 0);
    const double root_n = std::sqrt(static_cast<double>(n));
    for_each_trial(trials, options.parallel, [&](long i) {
        std::mt19937_64 rng(stream_seed(seed, static_cast<std::uint64_t>(i)));
        Eigen::Vector3d r_hat;
        for (int a = 0; a < 3; ++a) {
            const long shots = m / 3 + (a < m % 3 ? 1 : 0);
            std::binomial_distribution<long> draw(shots, std::clamp((1.0 + r_true(a)) / 2.0, 0.0, 1.0));
            r_hat(a) = 2.0 * static_cast<double>(draw(rng)) / static_cast<double>(shots) - 1.0;
        }
        if (r_hat.norm() > 1.0) r_hat.normalize();
        const double t_hat0 = project_to_model(model, r_hat, options.lo, options.hi);
        const Povm povm = one_param_local_povm(model, t_hat0);
        const double t_hat1 = averaged_estimate(sample_counts(outcome_probabilities(rho, povm), local, rng),
                                                povm.values, local);
        const bool keep = std::abs(t_hat1 - t_hat0) <= radius;
        run.fallback[static_cast<size_t>(i)] = keep ? 0 : 1;
        run.rescaled[static_cast<size_t>(i)] = root_n * ((keep ? t_hat1 : t_hat0) - t_true);
    });
    summarise(run, options.tail_levels);
    return run;
}

FidelityCrReport fidelity_cr_check(const ParametricModel& model, double t0, double eps, const Povm& povm) {
    require_single_parameter(model, "fidelity_cr_check");
    if (!(eps > 0.0)) throw ValidationError("fidelity_cr_check: eps must be > 0");
    RVec a(1), b(1);
    a(0) = t0;
    b(0) = t0 + eps;
    const CMat rho0 = state_at(model, a);
    const CMat rho1 = state_at(model, b);
    validate_povm(povm, rho0.rows());
    const std::vector<double> p0 = outcome_probabilities(rho0, povm);
    const std::vector<double> p1 = outcome_probabilities(rho1, povm);
    FidelityCrReport out;
    out.eps = eps;
    double m0 = 0.0, m1 = 0.0;
    for (size_t i = 0; i < p0.size(); ++i) {
        const double x = povm.values[i];
        out.v0 += (x - t0) * (x - t0) * p0[i];
        out.v_eps += (x - t0 - eps) * (x - t0 - eps) * p1[i];
        m0 += x * p0[i];
        m1 += x * p1[i];
    }
    out.bias0 = m0 - t0;
    out.bias_eps = m1 - t0 - eps;
    out.unbiased = std::abs(out.bias0) <= kUnbiasedTol && std::abs(out.bias_eps) <= kUnbiasedTol;
    out.fidelity = fidelity(rho0, rho1);
    out.lhs = 0.5 * (out.v0 + out.v_eps + eps * eps);
    const double gap = 1.0 - out.fidelity;
    out.rhs = gap > 0.0 ? eps * eps / (8.0 * gap) : std::numeric_limits<double>::infinity();
    out.slack = out.lhs - out.rhs;
    return out;
}

Povm two_point_unbiased(const ParametricModel& model, double t0, double eps, const Povm& povm) {
    require_single_parameter(model, "two_point_unbiased");
    RVec a(1), b(1);
    a(0) = t0;
    b(0) = t0 + eps;
    const std::vector<double> p0 = outcome_probabilities(state_at(model, a), povm);
    const std::vector<double> p1 = outcome_probabilities(state_at(model, b), povm);
    RMat sys(2, static_cast<Eigen::Index>(p0.size()));
    for (size_t i = 0; i < p0.size(); ++i) {
        sys(0, static_cast<Eigen::Index>(i)) = p0[i];
        sys(1, static_cast<Eigen::Index>(i)) = p1[i];
    }
    const RVec rhs = (RVec(2) << t0, t0 + eps).finished();
    const RVec x = sys.completeOrthogonalDecomposition().solve(rhs);
    if ((sys * x - rhs).norm() > 1e-9) throw PreconditionError("two_point_unbiased: no unbiased values for these effects");
    Povm out = povm;
    for (size_t i = 0; i < p0.size(); ++i) out.values[i] = x(static_cast<Eigen::Index>(i));
    return out;
}

double normal_cdf(double x, double variance) { return 0.5 * std::erfc(-x / std::sqrt(2.0 * variance)); }

double ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf) {
    if (samples.empty()) throw ValidationError("ks_statistic: no samples");
    std::sort(samples.begin(), samples.end());
    const double n = static_cast<double>(samples.size());
    double d = 0.0;
    for (size_t i = 0; i < samples.size(); ++i) {
        const double f = cdf(samples[i]);
        d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
    }
    return d;
}

double ks_statistic_lattice(std::vector<double> samples, const std::function<double(double)>& cdf, double spacing) {
    if (samples.empty()) throw ValidationError("ks_statistic_lattice: no samples");
    if (!(spacing > 0.0)) throw ValidationError("ks_statistic_lattice: spacing must be > 0");
    std::sort(samples.begin(), samples.end());
    const double n = static_cast<double>(samples.size());
    double d = 0.0;
    size_t i = 0;
    while (i < samples.size()) {
        size_t j = i;
        while (j < samples.size() && samples[j] - samples[i] < spacing / 2.0) ++j;
        const double below = static_cast<double>(i) / n;
        const double upto = static_cast<double>(j) / n;
        d = std::max({d, std::abs(upto - cdf(samples[i] + spacing / 2.0)), std::abs(below - cdf(samples[i] - spacing / 2.0))});
        i = j;
    }
    return d;
}

double ks_critical_1pct(long n) { return 1.6276 / std::sqrt(static_cast<double>(n)); }

}  // namespace qbound
