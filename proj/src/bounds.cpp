#include "qbound/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "qbound/errors.hpp"
#include "qbound/fisher.hpp"

namespace qbound {

namespace {

constexpr double kStabilityTol = 1e-5;

CMat invert_hermitian(const CMat& m, const char* what) {
    Eigen::FullPivLU<CMat> lu(m);
    if (!lu.isInvertible()) throw PreconditionError(std::string(what) + ": matrix is singular");
    CMat inv = lu.inverse();
    return (inv + inv.adjoint()) / 2.0;
}

RMat complement_projector(const RMat& w) {
    Eigen::SelfAdjointEigenSolver<RMat> es(w);
    const double top = std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
    RMat p = RMat::Zero(w.rows(), w.cols());
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
        if (es.eigenvalues()(i) <= 1e-12 * top) p += es.eigenvectors().col(i) * es.eigenvectors().col(i).transpose();
    }
    return p;
}

struct Problem {
    RMat j_inv, a, w, w_sqrt;
    int k = 0, kext = 0, fixed = 0;  // columns [0, fixed) carry the delta constraint

    RMat assemble(const RVec& x) const {
        RMat p = RMat::Zero(k, kext);
        p.leftCols(std::min(k, fixed)).setIdentity();
        const int nfree = kext - fixed;
        for (int r = 0; r < k; ++r)
            for (int c = 0; c < nfree; ++c) p(r, fixed + c) = x(r * nfree + c);
        return p;
    }
    int free_count() const { return k * (kext - fixed); }
};

HolevoResult minimise(const Problem& prob, const RMat& j_ext, const RMat& d_ext, const HolevoOptions& opt) {
    const int nfree = prob.free_count();
    auto f = [&prob](const RVec& x) {
        return holevo_objective(prob.assemble(x), prob.j_inv, prob.a, prob.w_sqrt, prob.w);
    };

    const int restarts = nfree == 0 ? 1 : std::max(1, opt.restarts);
    std::vector<RVec> starts(restarts, RVec::Zero(nfree));
    std::mt19937_64 rng(opt.seed);
    std::normal_distribution<double> gauss(0.0, opt.perturbation);
    for (int r = 1; r < restarts; ++r)
        for (int i = 0; i < nfree; ++i) starts[r](i) = gauss(rng);

    std::vector<NelderMeadResult> results(restarts);
#pragma omp parallel for schedule(dynamic) if (opt.parallel && restarts > 1)
    for (int r = 0; r < restarts; ++r) results[r] = nelder_mead(f, starts[r], opt.nelder_mead);

    int best = 0;
    for (int r = 1; r < restarts; ++r)
        if (results[r].value < results[best].value) best = r;

    HolevoResult out;
    out.value = results[best].value;
    out.P = prob.assemble(results[best].x);
    out.diagnostics.restarts = restarts;
    out.diagnostics.free_parameters = nfree;
    out.diagnostics.converged = results[best].converged;
    for (const auto& r : results) {
        out.diagnostics.evaluations += r.evaluations;
        out.diagnostics.restart_values.push_back(r.value);
        const double rel = std::abs(r.value - out.value) / std::max(std::abs(out.value), 1e-300);
        if (rel > kStabilityTol) out.diagnostics.stable = false;
    }
    out.V = optimal_limiting_covariance(j_ext, d_ext, prob.w, out.P);
    return out;
}

Problem make_problem(const RMat& j_ext, const RMat& d_ext, const RMat& w, int k, int fixed) {
    const auto kext = j_ext.rows();
    if (j_ext.cols() != kext || d_ext.rows() != kext || d_ext.cols() != kext)
        throw ValidationError("holevo_bound: J' and D' must be k' x k'");
    if (k < 1 || k > kext || fixed < k || fixed > kext) throw ValidationError("holevo_bound: invalid k / nuisance count");
    if ((d_ext + d_ext.transpose()).norm() > 1e-8 * std::max(1.0, d_ext.norm()))
        throw ValidationError("holevo_bound: D' must be antisymmetric");
    Problem p;
    p.k = k;
    p.kext = static_cast<int>(kext);
    p.fixed = fixed;
    p.w = validate_weight(w, k);
    p.w_sqrt = psd_sqrt(p.w);
    p.j_inv = spd_inverse(j_ext, "holevo_bound");
    p.a = p.j_inv * d_ext * p.j_inv;
    return p;
}

}  // namespace

bool is_positive_definite(const RMat& w, double floor) {
    Eigen::SelfAdjointEigenSolver<RMat> es(w, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff() > floor;
}

RMat validate_weight(const RMat& w, Eigen::Index k) {
    if (w.rows() != k || w.cols() != k) throw ValidationError("weight matrix has the wrong shape");
    require_symmetric(w, "weight matrix", 1e-10);
    Eigen::SelfAdjointEigenSolver<RMat> es((w + w.transpose()) / 2.0);
    if (es.eigenvalues().minCoeff() < -kEigenFloor) throw ValidationError("weight matrix is not PSD");
    return es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).asDiagonal() * es.eigenvectors().transpose();
}

double sld_bound(const RMat& j, const RMat& w) {
    const RMat wv = validate_weight(w, j.rows());
    return (wv * spd_inverse(j, "sld_bound")).trace();
}

double rld_bound(const CMat& rld, const RMat& w) {
    require_hermitian(rld, "rld_bound", 1e-9);
    const RMat wv = validate_weight(w, rld.rows());
    const CMat g = invert_hermitian(rld, "rld_bound");
    const RMat ws = psd_sqrt(wv);
    return (wv * g.real()).trace() + trace_norm(RMat(ws * g.imag() * ws));
}

double rld_bound_d_invariant(const RMat& j, const RMat& d, const RMat& w) {
    const RMat wv = validate_weight(w, j.rows());
    const RMat ji = spd_inverse(j, "rld_bound_d_invariant");
    const RMat ws = psd_sqrt(wv);
    return (wv * ji).trace() + 0.5 * trace_norm(RMat(ws * ji * d * ji * ws));
}

double holevo_objective(const RMat& p, const RMat& j_inv, const RMat& a, const RMat& w_sqrt, const RMat& w) {
    const RMat re = p * j_inv * p.transpose();
    const RMat im = 0.5 * p * a * p.transpose();
    return (w * re).trace() + trace_norm(RMat(w_sqrt * im * w_sqrt));
}

double holevo_objective_lifted(const RMat& p, const RMat& j_inv, const RMat& a, const RMat& w) {
    const RMat m = p.transpose() * w * p;
    const RMat ms = psd_sqrt(RMat((m + m.transpose()) / 2.0));
    return (m * j_inv).trace() + 0.5 * trace_norm(RMat(ms * a * ms));
}

HolevoResult holevo_bound(const RMat& j_ext, const RMat& d_ext, const RMat& w, int k, const HolevoOptions& options) {
    return minimise(make_problem(j_ext, d_ext, w, k, k), j_ext, d_ext, options);
}

HolevoResult nuisance_bound(const RMat& j_ext, const RMat& d_ext, const RMat& w, int k, int s,
                            const HolevoOptions& options) {
    if (s < 0) throw ValidationError("nuisance_bound: s must be >= 0");
    return minimise(make_problem(j_ext, d_ext, w, k, k + s), j_ext, d_ext, options);
}

double nuisance_closed_form(const RMat& j, const RMat& d, const RMat& w, int k) {
    const auto n = j.rows();
    const RMat wv = validate_weight(w, k);
    RMat wt = RMat::Zero(n, n);
    wt.topLeftCorner(k, k) = wv;
    const RMat ji = spd_inverse(j, "nuisance_closed_form");
    const RMat ws = psd_sqrt(wt);
    return (wt * ji).trace() + 0.5 * trace_norm(RMat(ws * ji * d * ji * ws));
}

RMat covariant_covariance(const RMat& re_z, const RMat& im_z, const RMat& w) {
    const RMat wv = validate_weight(w, re_z.rows());
    if (!is_positive_definite(wv)) throw PreconditionError("covariant_covariance: W must be positive definite");
    const RMat ws = psd_sqrt(wv);
    const RMat wi = pd_inv_sqrt(wv);
    const RMat v = re_z + wi * matrix_abs(RMat(ws * im_z * ws)).abs * wi;
    return (v + v.transpose()) / 2.0;
}

RMat optimal_limiting_covariance(const RMat& j_ext, const RMat& d_ext, const RMat& w, const RMat& p) {
    const RMat ji = spd_inverse(j_ext, "optimal_limiting_covariance");
    const RMat re = p * ji * p.transpose();
    const RMat im = 0.5 * p * ji * d_ext * ji * p.transpose();
    const RMat wv = validate_weight(w, p.rows());
    if (is_positive_definite(wv)) return covariant_covariance(re, im, wv);
    const RMat perp = complement_projector(wv);
    const double eps[3] = {1e-6, 1e-7, 1e-8};
    RMat vs[3];
    for (int i = 0; i < 3; ++i) vs[i] = covariant_covariance(re, im, RMat(wv + eps[i] * perp));
    // Least-squares line through the three points, evaluated at eps = 0.
    const double mean_e = (eps[0] + eps[1] + eps[2]) / 3.0;
    double see = 0.0;
    for (double e : eps) see += (e - mean_e) * (e - mean_e);
    const RMat mean_v = (vs[0] + vs[1] + vs[2]) / 3.0;
    RMat slope = RMat::Zero(re.rows(), re.cols());
    for (int i = 0; i < 3; ++i) slope += (eps[i] - mean_e) * (vs[i] - mean_v);
    slope /= see;
    return mean_v - slope * mean_e;
}

double extrapolate_regularised(const std::function<double(double)>& f) {
    // The trace-norm term moves like sqrt(eps), so fit v = L + a sqrt(eps) + b eps.
    const double eps[3] = {1e-6, 1e-7, 1e-8};
    Eigen::Matrix3d m;
    Eigen::Vector3d v;
    for (int i = 0; i < 3; ++i) {
        m(i, 0) = 1.0;
        m(i, 1) = std::sqrt(eps[i]);
        m(i, 2) = eps[i];
        v(i) = f(eps[i]);
    }
    return m.colPivHouseholderQr().solve(v)(0);
}

double sld_gap_bound(const RMat& j_ext, const RMat& d_ext, int k) {
    if (k < 1 || k > j_ext.rows()) throw ValidationError("sld_gap_bound: invalid k");
    const RMat ji = spd_inverse(j_ext, "sld_gap_bound");
    return 0.5 * trace_norm(RMat((ji * d_ext * ji).topLeftCorner(k, k)));
}

RMat cost_hessian(const std::function<double(const RVec&, const RVec&)>& cost, const RVec& t0, double h) {
    const auto k = t0.size();
    RMat hess(k, k);
    for (Eigen::Index i = 0; i < k; ++i) {
        for (Eigen::Index j = i; j < k; ++j) {
            auto at = [&](double si, double sj) {
                RVec e = t0;
                e(i) += si * h;
                e(j) += sj * h;
                return cost(e, t0);
            };
            hess(i, j) = hess(j, i) = (at(1, 1) - at(1, -1) - at(-1, 1) + at(-1, -1)) / (4.0 * h * h);
        }
    }
    Eigen::SelfAdjointEigenSolver<RMat> es(hess / 2.0);
    const RVec& lam = es.eigenvalues();
    if (lam.minCoeff() < -1e-6 * std::max(1.0, lam.cwiseAbs().maxCoeff()))
        throw PreconditionError("cost_hessian: cost Hessian is indefinite");
    // Differencing noise can leave tiny negative eigenvalues; clamp them.
    return es.eigenvectors() * lam.cwiseMax(0.0).asDiagonal() * es.eigenvectors().transpose();
}

ExtensionQfi extension_qfi(const ParametricModel& model, const RVec& t0) {
    const ModelExtension ext = minimal_d_invariant_extension(model, t0);
    const QfiBundle q = sld_qfi(ext.rho, ext.derivatives);
    return {ext.k, ext.k_ext, q.J, d_matrix(q)};
}

HolevoResult holevo_bound(const ParametricModel& model, const RVec& t0, const RMat& w, const HolevoOptions& options) {
    const ExtensionQfi e = extension_qfi(model, t0);
    return holevo_bound(e.J, e.D, w, e.k, options);
}

HolevoResult nuisance_bound(const ParametricModel& model, const RVec& t0, const RMat& w, int s,
                            const HolevoOptions& options) {
    if (s < 0 || s >= model.params()) throw ValidationError("nuisance_bound: invalid nuisance count");
    const ExtensionQfi e = extension_qfi(model, t0);
    return nuisance_bound(e.J, e.D, w, e.k - s, s, options);
}

double asymptotic_cost_bound(const ParametricModel& model, const RVec& t0, const RMat& w, int nuisance,
                             const HolevoOptions& options) {
    const int k = model.params() - nuisance;
    const RMat wv = validate_weight(w, k);
    const ExtensionQfi e = extension_qfi(model, t0);
    auto value = [&](const RMat& weight) { return nuisance_bound(e.J, e.D, weight, k, nuisance, options).value; };
    if (is_positive_definite(wv)) return value(wv);
    const RMat perp = complement_projector(wv);
    return extrapolate_regularised([&](double eps) { return value(RMat(wv + eps * perp)); });
}

BoundReport bound_ladder(const ParametricModel& model, const RVec& t0, const RMat& w, int s,
                         const HolevoOptions& options) {
    if (s < 0 || s >= model.params()) throw ValidationError("bound_ladder: invalid nuisance count");
    BoundReport r;
    r.k = model.params() - s;
    r.nuisance_count = s;
    const RMat wv = validate_weight(w, r.k);

    std::vector<int> interest(r.k);
    for (int j = 0; j < r.k; ++j) interest[j] = j;
    const ParametricModel sub = s == 0 ? model : restrict_model(model, interest, t0);
    const RVec ts = t0.head(r.k);

    const QfiBundle q = full_qfi(sub, ts);
    r.sld = sld_bound(q.J, wv);
    r.rld = rld_bound(*q.rld, wv);
    const HolevoResult h = holevo_bound(sub, ts, wv, options);
    r.holevo = h.value;
    r.argmin_P = h.P;
    r.V_opt = h.V;
    r.diagnostics = h.diagnostics;
    r.k_ext = static_cast<int>(h.P.cols());

    if (s > 0) {
        const QfiBundle full = sld_qfi(model, t0);
        RMat wt = RMat::Zero(model.params(), model.params());
        wt.topLeftCorner(r.k, r.k) = wv;
        r.sld_nuisance = (wt * spd_inverse(full.J, "bound_ladder")).trace();
        const HolevoResult n = nuisance_bound(model, t0, wv, s, options);
        r.nuisance = n.value;
        r.argmin_P = n.P;
        r.V_opt = n.V;
        r.k_ext = static_cast<int>(n.P.cols());
        r.diagnostics.evaluations += n.diagnostics.evaluations;
        r.diagnostics.converged = r.diagnostics.converged && n.diagnostics.converged;
        r.diagnostics.stable = r.diagnostics.stable && n.diagnostics.stable;
        r.diagnostics.restart_values.insert(r.diagnostics.restart_values.end(), n.diagnostics.restart_values.begin(),
                                            n.diagnostics.restart_values.end());
    }
    return r;
}

}  // namespace qbound
