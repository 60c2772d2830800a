#include "qbound/fisher.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "qbound/errors.hpp"

namespace qbound {

namespace {

cplx log1p_complex(cplx z) {
    const double x = z.real(), y = z.imag();
    return {0.5 * std::log1p(2.0 * x + x * x + y * y), std::atan2(y, 1.0 + x)};
}

cplx expm1_complex(cplx w) {
    const double a = w.real(), b = w.imag();
    const double s = std::sin(b / 2.0);
    return {std::expm1(a) * std::cos(b) - 2.0 * s * s, std::exp(a) * std::sin(b)};
}

CMat inverse_state(const StateBasis& basis) {
    return basis.u() * basis.p().cwiseInverse().cast<cplx>().asDiagonal() * basis.u().adjoint();
}

// Tr[rho_a rho0^-1 rho_b] - 1 evaluated through the differences to avoid cancellation.
cplx overlap_minus_one(const CMat& rho0_inv, const CMat& da, const CMat& db) {
    return (da * rho0_inv * db).trace() + da.trace() + db.trace();
}

RMat real_inverse_checked(const RMat& j, const char* what) { return spd_inverse(j, what); }

}  // namespace

QfiBundle sld_qfi(const CMat& rho, const std::vector<CMat>& derivatives) {
    const StateBasis basis(rho);
    QfiBundle b;
    b.rho = rho;
    b.derivatives = derivatives;
    const auto k = static_cast<Eigen::Index>(derivatives.size());
    for (const auto& g : derivatives) b.sld.push_back(sld_solve(basis, g));
    b.J.resize(k, k);
    for (Eigen::Index i = 0; i < k; ++i)
        for (Eigen::Index j = i; j < k; ++j)
            b.J(i, j) = b.J(j, i) = (rho * b.sld[i] * b.sld[j]).trace().real();
    return b;
}

QfiBundle sld_qfi(const ParametricModel& model, const RVec& t0) {
    QfiBundle b = sld_qfi(state_at(model, t0), derivatives_at(model, t0));
    b.t0 = t0;
    return b;
}

RMat d_matrix(const QfiBundle& bundle) {
    const auto k = static_cast<Eigen::Index>(bundle.sld.size());
    RMat d = RMat::Zero(k, k);
    for (Eigen::Index i = 0; i < k; ++i) {
        for (Eigen::Index j = i + 1; j < k; ++j) {
            const CMat comm = bundle.sld[i] * bundle.sld[j] - bundle.sld[j] * bundle.sld[i];
            const cplx v = cplx(0.0, 1.0) * (bundle.rho * comm).trace();
            d(i, j) = v.real();
            d(j, i) = -v.real();
        }
    }
    return d;
}

RMat d_matrix(const ParametricModel& model, const RVec& t0) { return d_matrix(sld_qfi(model, t0)); }

CMat rld_qfi(const CMat& rho, const std::vector<CMat>& derivatives) {
    const StateBasis basis(rho);
    const CMat inv = inverse_state(basis);
    const auto k = static_cast<Eigen::Index>(derivatives.size());
    CMat r(k, k);
    for (Eigen::Index i = 0; i < k; ++i)
        for (Eigen::Index j = 0; j < k; ++j) r(i, j) = (derivatives[i] * inv * derivatives[j]).trace();
    return (r + r.adjoint()) / 2.0;
}

CMat rld_qfi(const ParametricModel& model, const RVec& t0) {
    return rld_qfi(state_at(model, t0), derivatives_at(model, t0));
}

QfiBundle full_qfi(const CMat& rho, const std::vector<CMat>& derivatives) {
    QfiBundle b = sld_qfi(rho, derivatives);
    b.D = d_matrix(b);
    b.rld = rld_qfi(rho, derivatives);
    return b;
}

QfiBundle full_qfi(const ParametricModel& model, const RVec& t0) {
    QfiBundle b = full_qfi(state_at(model, t0), derivatives_at(model, t0));
    b.t0 = t0;
    return b;
}

CMat d_invariant_inverse_rld(const RMat& j, const RMat& d) {
    const RMat ji = real_inverse_checked(j, "d_invariant_inverse_rld");
    return ji.cast<cplx>() + cplx(0.0, 0.5) * (ji * d * ji).cast<cplx>();
}

EpsRldMatrix eps_rld(const ParametricModel& model, const RVec& t0, double eps) {
    return ncopy_eps_rld(model, t0, eps, 1);
}

EpsRldMatrix ncopy_eps_rld(const ParametricModel& model, const RVec& t0, double eps, long n) {
    if (!(eps > 0.0)) throw ValidationError("eps_rld: eps must be positive");
    if (n < 1) throw ValidationError("ncopy_eps_rld: n must be >= 1");
    const CMat rho0 = state_at(model, t0);
    const StateBasis basis(rho0);
    const CMat inv = inverse_state(basis);
    const double step = eps / std::sqrt(static_cast<double>(n));
    const int k = model.params();
    std::vector<CMat> diffs;
    for (int j = 0; j < k; ++j) {
        RVec t = t0;
        t(j) += step;
        diffs.push_back(state_at(model, t) - rho0);
    }
    CMat m(k, k);
    for (int i = 0; i < k; ++i) {
        for (int j = 0; j < k; ++j) {
            const cplx z = overlap_minus_one(inv, diffs[i], diffs[j]);
            m(i, j) = expm1_complex(static_cast<double>(n) * log1p_complex(z)) / (eps * eps);
        }
    }
    return {eps, (m + m.adjoint()) / 2.0};
}

CMat eps_rld_limit(const CMat& rld, double eps) {
    CMat out(rld.rows(), rld.cols());
    for (Eigen::Index i = 0; i < rld.rows(); ++i)
        for (Eigen::Index j = 0; j < rld.cols(); ++j) out(i, j) = expm1_complex(eps * eps * rld(i, j)) / (eps * eps);
    return out;
}

namespace {

// Square root with eigenvalues at round-off level set to zero; sqrt(1e-17) would otherwise
// perturb F by ~1e-9 for pure states.
CMat fidelity_root(const CMat& rho) {
    const EigenSystem es = hermitian_eig(rho);
    const double floor = 64.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, es.values.cwiseAbs().maxCoeff());
    RVec r(es.values.size());
    for (Eigen::Index i = 0; i < r.size(); ++i) r(i) = es.values(i) > floor ? std::sqrt(es.values(i)) : 0.0;
    return es.vectors * r.asDiagonal() * es.vectors.adjoint();
}

}  // namespace

double fidelity(const CMat& rho, const CMat& sigma) {
    require_hermitian(rho, "fidelity", 1e-10);
    require_hermitian(sigma, "fidelity", 1e-10);
    if (rho.rows() != sigma.rows()) throw ValidationError("fidelity: dimension mismatch");
    return std::min(1.0, trace_norm(CMat(fidelity_root(rho) * fidelity_root(sigma))));
}

FidelitySld fidelity_sld(const ParametricModel& model, const RVec& t0) {
    if (model.params() != 1) throw ValidationError("fidelity_sld: one-parameter model required");
    const CMat rho0 = state_at(model, t0);
    FidelitySld out;
    for (double eps : {1e-2, 5e-3, 2.5e-3}) {
        double acc = 0.0;
        for (double sgn : {1.0, -1.0}) {
            RVec t = t0;
            t(0) += sgn * eps;
            acc += 8.0 * (1.0 - fidelity(rho0, state_at(model, t))) / (eps * eps);
        }
        out.raw.push_back(acc / 2.0);
    }
    const double r1 = (4.0 * out.raw[1] - out.raw[0]) / 3.0;
    const double r2 = (4.0 * out.raw[2] - out.raw[1]) / 3.0;
    out.value = (16.0 * r2 - r1) / 15.0;
    out.converged = std::abs(r2 - r1) <= 1e-4 * std::max(1.0, std::abs(out.value));
    return out;
}

double ncopy_fidelity_quotient(const ParametricModel& model, const RVec& t0, double eps, long n) {
    if (model.params() != 1) throw ValidationError("ncopy_fidelity_quotient: one-parameter model required");
    if (!(eps > 0.0) || n < 1) throw ValidationError("ncopy_fidelity_quotient: need eps > 0 and n >= 1");
    RVec t = t0;
    t(0) += eps / std::sqrt(static_cast<double>(n));
    const double f = fidelity(state_at(model, t0), state_at(model, t));
    const double one_minus_fn = -std::expm1(static_cast<double>(n) * std::log1p(f - 1.0));
    return 8.0 * one_minus_fn / (eps * eps);
}

double fidelity_quotient_limit(double j, double eps) { return -8.0 * std::expm1(-j * eps * eps / 8.0) / (eps * eps); }

QlanCorrespondence qlan_correspondence(const ParametricModel& model, const RVec& t0) {
    const CMat rho = state_at(model, t0);
    const EigenSystem es = hermitian_eig(rho);
    if (es.values.minCoeff() <= kEigenFloor) throw PreconditionError("qlan_correspondence: state is not invertible");
    QlanCorrespondence out;
    out.spectrum = es.values.reverse();
    const auto d = out.spectrum.size();
    for (Eigen::Index j = 1; j < d; ++j)
        if (out.spectrum(j - 1) - out.spectrum(j) <= 1e-8)
            throw PreconditionError("qlan_correspondence: degenerate spectrum");
    for (Eigen::Index j = 0; j < d; ++j) {
        for (Eigen::Index k = j + 1; k < d; ++k) {
            QlanPair p;
            p.j = static_cast<int>(j);
            p.k = static_cast<int>(k);
            p.ratio = out.spectrum(k) / out.spectrum(j);
            p.beta = -std::log(p.ratio);
            p.thermal = p.ratio / (1.0 - p.ratio);
            out.pairs.push_back(p);
        }
    }
    const CMat rld = rld_qfi(rho, derivatives_at(model, t0));
    Eigen::FullPivLU<CMat> lu(rld);
    if (!lu.isInvertible()) throw PreconditionError("qlan_correspondence: RLD matrix is singular");
    CMat g = lu.inverse();
    out.gamma = (g + g.adjoint()) / 2.0;
    return out;
}

QlanBlockCheck qlan_block_check(const RVec& spectrum) {
    const ParametricModel m = qlan_coordinates(spectrum);
    const RVec t0 = RVec::Zero(m.params());
    const CMat g = CMat(rld_qfi(m, t0).inverse());
    const int d = static_cast<int>(spectrum.size());
    const int pairs = d * (d - 1) / 2;
    QlanBlockCheck out;
    int idx = 0;
    for (int j = 0; j < d; ++j) {
        for (int k = j + 1; k < d; ++k, ++idx) {
            const int r = d - 1 + idx, i = d - 1 + pairs + idx;
            const double beta = -std::log(spectrum(k) / spectrum(j));
            const double expect = 0.25 / std::tanh(beta / 2.0);
            out.re_residual = std::max({out.re_residual, std::abs(g(r, r).real() - expect),
                                        std::abs(g(i, i).real() - expect), std::abs(g(r, i).real())});
            out.im_residual = std::max({out.im_residual, std::abs(g(r, i).imag() - 0.5), std::abs(g(i, r).imag() + 0.5)});
            if (idx == 0) out.im_measured = g(r, i).imag();
        }
    }
    return out;
}

}  // namespace qbound
