#include "qbound/models.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "qbound/errors.hpp"

namespace qbound {

namespace {

constexpr double kTraceTol = 1e-10;
constexpr double kSpanCutoff = 1e-8;
constexpr double kMultiphaseFloor = 1e-8;

void require_size(const RVec& t, int params, const std::string& name) {
    if (t.size() != params) {
        std::ostringstream os;
        os << name << ": expected " << params << " parameters, got " << t.size();
        throw ValidationError(os.str());
    }
}

double scalar(const Constants& c, const std::string& key, std::optional<double> fallback = std::nullopt) {
    auto it = c.find(key);
    if (it == c.end()) {
        if (fallback) return *fallback;
        throw ValidationError("missing model constant '" + key + "'");
    }
    if (it->second.size() != 1) throw ValidationError("model constant '" + key + "' must be a scalar");
    return it->second.front();
}

std::optional<RVec> vector_constant(const Constants& c, const std::string& key) {
    auto it = c.find(key);
    if (it == c.end()) return std::nullopt;
    return Eigen::Map<const RVec>(it->second.data(), static_cast<Eigen::Index>(it->second.size()));
}

int integer(const Constants& c, const std::string& key, std::optional<int> fallback = std::nullopt) {
    const double v = scalar(c, key, fallback ? std::optional<double>(*fallback) : std::nullopt);
    if (std::abs(v - std::round(v)) > 1e-12) throw ValidationError("model constant '" + key + "' must be an integer");
    return static_cast<int>(std::lround(v));
}

double ip(const CMat& rho, const CMat& x, const CMat& y) { return (rho * x * y).trace().real(); }

CMat hermitian_expi(const CMat& h) {
    const EigenSystem es = hermitian_eig(h);
    CVec phases(es.values.size());
    for (Eigen::Index j = 0; j < phases.size(); ++j) phases(j) = std::exp(cplx(0.0, es.values(j)));
    return es.vectors * phases.asDiagonal() * es.vectors.adjoint();
}

}  // namespace

ParametricModel::ParametricModel(std::string name, int dim, int params, StateFn state,
                                 DerivativeFn derivatives, DomainFn domain)
    : name_(std::move(name)), dim_(dim), params_(params), state_(std::move(state)),
      derivatives_(std::move(derivatives)), domain_(std::move(domain)) {
    if (dim_ < 1 || params_ < 1) throw ValidationError("model needs dim >= 1 and at least one parameter");
    if (!state_) throw ValidationError("model needs a state map");
    for (int j = 0; j < params_; ++j) param_names_.push_back("t" + std::to_string(j + 1));
}

bool ParametricModel::in_domain(const RVec& t) const {
    if (t.size() != params_ || !t.allFinite()) return false;
    return !domain_ || domain_(t);
}

ParametricModel ParametricModel::with_step(double h) const {
    if (!(h > 0.0)) throw ValidationError("finite-difference step must be positive");
    ParametricModel m = *this;
    m.step_ = h;
    return m;
}

ParametricModel ParametricModel::with_param_names(std::vector<std::string> names) const {
    if (static_cast<int>(names.size()) != params_) throw ValidationError("parameter name count mismatch");
    ParametricModel m = *this;
    m.param_names_ = std::move(names);
    return m;
}

ParametricModel ParametricModel::with_default_point(RVec t) const {
    require_size(t, params_, name_);
    ParametricModel m = *this;
    m.default_point_ = std::move(t);
    return m;
}

ParametricModel ParametricModel::numerical() const {
    ParametricModel m = *this;
    m.derivatives_ = {};
    return m;
}

CMat state_at(const ParametricModel& model, const RVec& t) {
    require_size(t, model.params(), model.name());
    if (!model.in_domain(t)) throw ValidationError(model.name() + ": parameter point outside the model domain");
    CMat rho = model.raw_state(t);
    if (rho.rows() != model.dim() || rho.cols() != model.dim())
        throw ValidationError(model.name() + ": state has the wrong dimension");
    require_hermitian(rho, "state_at", 1e-10);
    if (std::abs(rho.trace() - cplx(1.0, 0.0)) > kTraceTol)
        throw ValidationError(model.name() + ": state is not normalised");
    if (hermitian_eig(rho).values.minCoeff() < -kEigenFloor)
        throw ValidationError(model.name() + ": state is not positive semidefinite");
    return (rho + rho.adjoint()) / 2.0;
}

std::vector<CMat> finite_difference_derivatives(const ParametricModel& model, const RVec& t0, double h) {
    require_size(t0, model.params(), model.name());
    std::vector<CMat> out;
    out.reserve(model.params());
    for (int j = 0; j < model.params(); ++j) {
        RVec up = t0, down = t0;
        up(j) += h;
        down(j) -= h;
        if (!model.in_domain(up) || !model.in_domain(down))
            throw ValidationError(model.name() + ": finite-difference stencil leaves the domain");
        out.push_back((state_at(model, up) - state_at(model, down)) / (2.0 * h));
    }
    return out;
}

std::vector<CMat> derivatives_at(const ParametricModel& model, const RVec& t0) {
    require_size(t0, model.params(), model.name());
    if (!model.in_domain(t0)) throw ValidationError(model.name() + ": parameter point outside the model domain");
    if (!model.has_analytic_derivatives()) return finite_difference_derivatives(model, t0, model.step());
    std::vector<CMat> out = model.raw_derivatives(t0);
    if (static_cast<int>(out.size()) != model.params())
        throw ValidationError(model.name() + ": derivative count mismatch");
    for (auto& g : out) {
        require_hermitian(g, "derivatives_at", 1e-8);
        if (std::abs(g.trace()) > 1e-8) throw ValidationError(model.name() + ": derivative is not traceless");
        g = (g + g.adjoint()) / 2.0;
    }
    return out;
}

TwoObservablesGeometry two_observables_geometry(const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
    if (std::abs(a.norm() - 1.0) > 1e-9 || std::abs(b.norm() - 1.0) > 1e-9)
        throw ValidationError("two_observables: |a| and |b| must be 1");
    const double s = a.dot(b);
    if (s < 0.0 || s >= 1.0) throw ValidationError("two_observables: a.b must lie in [0,1)");
    TwoObservablesGeometry g;
    g.a = a;
    g.b = b;
    g.s = s;
    g.c = a.cross(b).normalized();
    g.a_dual = (a - s * b) / (1.0 - s * s);
    g.b_dual = (b - s * a) / (1.0 - s * s);
    return g;
}

ParametricModel two_observables(const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
    const TwoObservablesGeometry g = two_observables_geometry(a, b);
    auto bloch = [g](const RVec& t) -> Eigen::Vector3d {
        return t(0) * g.a_dual + t(1) * g.b_dual + t(2) * g.c;
    };
    auto state = [bloch](const RVec& t) { return bloch_state(bloch(t)); };
    auto deriv = [g](const RVec&) {
        return std::vector<CMat>{bloch_state(g.a_dual) - pauli(0) / 2.0, bloch_state(g.b_dual) - pauli(0) / 2.0,
                                 bloch_state(g.c) - pauli(0) / 2.0};
    };
    auto domain = [bloch](const RVec& t) { return bloch(t).norm() < 1.0; };
    return ParametricModel("two_observables", 2, 3, state, deriv, domain)
        .with_param_names({"x", "y", "z"})
        .with_default_point((RVec(3) << 0.2, 0.1, 0.3).finished());
}

ParametricModel amplitude_damping() {
    auto bloch = [](const RVec& t) -> Eigen::Vector3d {
        const double th = t(0), ph = t(1), eta = t(2), r = std::sqrt(eta);
        return {r * std::sin(th) * std::sin(ph), r * std::sin(th) * std::cos(ph), 1.0 - eta + eta * std::cos(th)};
    };
    auto state = [bloch](const RVec& t) { return bloch_state(bloch(t)); };
    auto deriv = [](const RVec& t) {
        const double th = t(0), ph = t(1), eta = t(2), r = std::sqrt(eta);
        const Eigen::Vector3d p_th(r * std::cos(th) * std::sin(ph), r * std::cos(th) * std::cos(ph), -eta * std::sin(th));
        const Eigen::Vector3d p_ph(r * std::sin(th) * std::cos(ph), -r * std::sin(th) * std::sin(ph), 0.0);
        const Eigen::Vector3d p_eta(std::sin(th) * std::sin(ph) / (2.0 * r), std::sin(th) * std::cos(ph) / (2.0 * r),
                                    -1.0 + std::cos(th));
        std::vector<CMat> out;
        for (const auto& p : {p_th, p_ph, p_eta}) out.push_back(bloch_state(p) - pauli(0) / 2.0);
        return out;
    };
    auto domain = [bloch](const RVec& t) { return t(2) > 0.0 && t(2) <= 1.0 && bloch(t).squaredNorm() <= 1.0 + 1e-12; };
    return ParametricModel("amplitude_damping", 2, 3, state, deriv, domain)
        .with_param_names({"theta", "phi", "eta"})
        .with_default_point((RVec(3) << std::numbers::pi / 4.0, 0.0, 0.5).finished());
}

ParametricModel multiphase(int d, int photons, double a, double eta) {
    if (d < 1) throw ValidationError("multiphase: d must be >= 1");
    if (photons < 1) throw ValidationError("multiphase: N must be >= 1");
    if (!(a >= 0.0 && a <= 1.0)) throw ValidationError("multiphase: a must lie in [0,1]");
    const double b2 = 1.0 - a * a;
    if (b2 < 0.0 || b2 > 1.0) throw ValidationError("multiphase: b^2 must lie in [0,1]");
    if (!(eta >= 0.0 && eta <= 1.0)) throw ValidationError("multiphase: eta must lie in [0,1]");
    const double p0 = 1.0 - b2 * (1.0 - std::pow(eta, photons));
    if (!(p0 > 0.0)) throw ValidationError("multiphase: p_eta must be positive");
    const double alpha0 = std::acos(std::clamp(a / std::sqrt(p0), -1.0, 1.0));
    const int dim = d + 2;
    const int sink = d + 1;
    const double n = photons;
    const double floor = kMultiphaseFloor;

    auto psi = [=](const RVec& t) {
        const double al = t(d);
        CVec v = CVec::Zero(dim);
        v(0) = std::cos(al);
        for (int j = 0; j < d; ++j) v(j + 1) = std::sin(al) * std::exp(cplx(0.0, n * t(j))) / std::sqrt(double(d));
        return v;
    };
    auto state = [=](const RVec& t) {
        const double p = t(d + 1);
        const CVec v = psi(t);
        CMat rho = p * v * v.adjoint();
        rho(sink, sink) += 1.0 - p;
        return CMat((1.0 - floor) * rho + floor * CMat::Identity(dim, dim) / double(dim));
    };
    auto deriv = [=](const RVec& t) {
        const double al = t(d), p = t(d + 1);
        const CVec v = psi(t);
        std::vector<CMat> out;
        for (int j = 0; j < d; ++j) {
            CVec dv = CVec::Zero(dim);
            dv(j + 1) = cplx(0.0, n) * v(j + 1);
            out.push_back((1.0 - floor) * p * (dv * v.adjoint() + v * dv.adjoint()));
        }
        CVec dv = CVec::Zero(dim);
        dv(0) = -std::sin(al);
        for (int j = 0; j < d; ++j) dv(j + 1) = std::cos(al) * std::exp(cplx(0.0, n * t(j))) / std::sqrt(double(d));
        out.push_back((1.0 - floor) * p * (dv * v.adjoint() + v * dv.adjoint()));
        CMat dp = v * v.adjoint();
        dp(sink, sink) -= 1.0;
        out.push_back((1.0 - floor) * dp);
        return out;
    };
    auto domain = [=](const RVec& t) { return t(d + 1) > 0.0 && t(d + 1) <= 1.0; };

    std::vector<std::string> names;
    RVec point(d + 2);
    for (int j = 0; j < d; ++j) {
        names.push_back("t" + std::to_string(j + 1));
        point(j) = 0.1 * (j + 1);
    }
    names.push_back("alpha");
    names.push_back("p");
    point(d) = alpha0;
    point(d + 1) = p0;
    return ParametricModel("multiphase", dim, d + 2, state, deriv, domain)
        .with_param_names(names)
        .with_default_point(point);
}

std::vector<CMat> gell_mann_basis(int d) {
    if (d < 2) throw ValidationError("gell_mann_basis: d must be >= 2");
    std::vector<CMat> out;
    for (int j = 0; j < d; ++j) {
        for (int k = j + 1; k < d; ++k) {
            CMat s = CMat::Zero(d, d);
            s(j, k) = s(k, j) = 1.0;
            out.push_back(s);
            CMat a = CMat::Zero(d, d);
            a(j, k) = cplx(0, -1);
            a(k, j) = cplx(0, 1);
            out.push_back(a);
        }
    }
    for (int l = 1; l < d; ++l) {
        CMat g = CMat::Zero(d, d);
        const double norm = std::sqrt(2.0 / (l * (l + 1.0)));
        for (int j = 0; j < l; ++j) g(j, j) = norm;
        g(l, l) = -l * norm;
        out.push_back(g);
    }
    return out;
}

ParametricModel linear_model(std::string name, const CMat& rho0, std::vector<CMat> generators) {
    require_hermitian(rho0, "linear_model");
    const int dim = static_cast<int>(rho0.rows());
    const int k = static_cast<int>(generators.size());
    for (const auto& g : generators) {
        require_hermitian(g, "linear_model generator");
        if (g.rows() != dim || std::abs(g.trace()) > 1e-12) throw ValidationError("linear_model: generators must be traceless d x d");
    }
    auto state = [rho0, generators](const RVec& t) {
        CMat rho = rho0;
        for (size_t j = 0; j < generators.size(); ++j) rho += t(static_cast<Eigen::Index>(j)) * generators[j];
        return rho;
    };
    auto deriv = [generators](const RVec&) { return generators; };
    auto domain = [state](const RVec& t) {
        Eigen::SelfAdjointEigenSolver<CMat> es(state(t), Eigen::EigenvaluesOnly);
        return es.eigenvalues().minCoeff() > 0.0;
    };
    return ParametricModel(std::move(name), dim, k, state, deriv, domain);
}

ParametricModel qudit_full(const RVec& spectrum) {
    const int d = static_cast<int>(spectrum.size());
    if (d < 2) throw ValidationError("qudit_full: need d >= 2");
    if (spectrum.minCoeff() <= kEigenFloor) throw ValidationError("qudit_full: rho0 must be invertible");
    if (std::abs(spectrum.sum() - 1.0) > 1e-9) throw ValidationError("qudit_full: spectrum must sum to 1");
    std::vector<double> sorted(spectrum.data(), spectrum.data() + d);
    std::sort(sorted.begin(), sorted.end());
    for (int j = 1; j < d; ++j)
        if (sorted[j] - sorted[j - 1] <= 1e-8) throw ValidationError("qudit_full: rho0 has a degenerate spectrum");
    std::vector<CMat> gens = gell_mann_basis(d);
    for (auto& g : gens) g /= 2.0;
    CMat rho0 = spectrum.cast<cplx>().asDiagonal();
    ParametricModel m = linear_model("qudit_full", rho0, gens);
    return m.with_default_point(RVec::Zero(m.params()));
}

ParametricModel classical_diagonal(int d) {
    if (d < 2) throw ValidationError("classical_diagonal: need d >= 2");
    auto state = [d](const RVec& t) {
        CMat rho = CMat::Zero(d, d);
        double rest = 1.0;
        for (int j = 0; j < d - 1; ++j) {
            rho(j, j) = t(j);
            rest -= t(j);
        }
        rho(d - 1, d - 1) = rest;
        return rho;
    };
    auto deriv = [d](const RVec&) {
        std::vector<CMat> out;
        for (int j = 0; j < d - 1; ++j) {
            CMat g = CMat::Zero(d, d);
            g(j, j) = 1.0;
            g(d - 1, d - 1) = -1.0;
            out.push_back(g);
        }
        return out;
    };
    auto domain = [](const RVec& t) { return t.minCoeff() > 0.0 && t.sum() < 1.0; };
    return ParametricModel("classical_diagonal", d, d - 1, state, deriv, domain)
        .with_default_point(RVec::Constant(d - 1, 1.0 / d));
}

ParametricModel qubit_phase(double r) {
    if (!(r > 0.0 && r <= 1.0)) throw ValidationError("qubit_phase: r must lie in (0,1]");
    auto state = [r](const RVec& t) {
        return bloch_state(Eigen::Vector3d(r * std::cos(t(0)), r * std::sin(t(0)), 0.0));
    };
    auto deriv = [r](const RVec& t) {
        return std::vector<CMat>{bloch_state(Eigen::Vector3d(-r * std::sin(t(0)), r * std::cos(t(0)), 0.0)) - pauli(0) / 2.0};
    };
    return ParametricModel("qubit_phase", 2, 1, state, deriv)
        .with_param_names({"t"})
        .with_default_point(RVec::Zero(1));
}

ParametricModel qlan_coordinates(const RVec& spectrum) {
    const int d = static_cast<int>(spectrum.size());
    if (d < 2) throw ValidationError("qlan_coordinates: need d >= 2");
    if (std::abs(spectrum.sum() - 1.0) > 1e-9 || spectrum.minCoeff() <= 0.0)
        throw ValidationError("qlan_coordinates: spectrum must be a positive probability vector");
    for (int j = 1; j < d; ++j)
        if (spectrum(j - 1) - spectrum(j) <= 1e-8)
            throw ValidationError("qlan_coordinates: spectrum must be strictly decreasing");
    const int pairs = d * (d - 1) / 2;
    auto state = [spectrum, d, pairs](const RVec& t) {
        CMat rho0 = CMat::Zero(d, d);
        double last = spectrum(d - 1);
        for (int j = 0; j < d - 1; ++j) {
            rho0(j, j) = spectrum(j) + t(j);
            last -= t(j);
        }
        rho0(d - 1, d - 1) = last;
        CMat h = CMat::Zero(d, d);
        int idx = 0;
        for (int j = 0; j < d; ++j) {
            for (int k = j + 1; k < d; ++k, ++idx) {
                const double scale = 1.0 / std::sqrt(spectrum(j) - spectrum(k));
                const double tr = t(d - 1 + idx), ti = t(d - 1 + pairs + idx);
                h(j, k) += scale * (tr + cplx(0.0, ti));
                h(k, j) += scale * (tr - cplx(0.0, ti));
            }
        }
        const CMat u = hermitian_expi(h);
        return CMat(u * rho0 * u.adjoint());
    };
    auto domain = [spectrum, d](const RVec& t) {
        double last = spectrum(d - 1);
        for (int j = 0; j < d - 1; ++j) {
            if (spectrum(j) + t(j) <= 0.0) return false;
            last -= t(j);
        }
        return last > 0.0;
    };
    return ParametricModel("qlan_coordinates", d, d - 1 + 2 * pairs, state, {}, domain)
        .with_default_point(RVec::Zero(d - 1 + 2 * pairs));
}

std::vector<std::string> builtin_names() {
    return {"two_observables", "amplitude_damping", "multiphase", "qudit_full", "classical_diagonal", "qubit_phase"};
}

ParametricModel builtin(const std::string& name, const Constants& constants) {
    if (name == "two_observables") {
        auto a = vector_constant(constants, "a");
        auto b = vector_constant(constants, "b");
        if (a || b) {
            if (!a || !b || a->size() != 3 || b->size() != 3)
                throw ValidationError("two_observables: a and b must both be 3-vectors");
            return two_observables(Eigen::Vector3d(*a), Eigen::Vector3d(*b));
        }
        const double s = scalar(constants, "s", 0.0);
        if (s < 0.0 || s >= 1.0) throw ValidationError("two_observables: a.b must lie in [0,1)");
        return two_observables(Eigen::Vector3d(1, 0, 0), Eigen::Vector3d(s, std::sqrt(1.0 - s * s), 0));
    }
    if (name == "amplitude_damping") return amplitude_damping();
    if (name == "multiphase") {
        const int d = integer(constants, "d");
        const int n = integer(constants, "N");
        double a = scalar(constants, "a", std::nullopt);
        if (constants.count("b")) {
            const double b = scalar(constants, "b");
            if (b * b < 0.0 || b * b > 1.0) throw ValidationError("multiphase: b^2 must lie in [0,1]");
            if (std::abs(a * a + b * b - 1.0) > 1e-9) throw ValidationError("multiphase: a^2 + b^2 must equal 1");
        }
        return multiphase(d, n, a, scalar(constants, "eta"));
    }
    if (name == "qudit_full") {
        if (auto spectrum = vector_constant(constants, "spectrum")) return qudit_full(*spectrum);
        const int d = integer(constants, "dim", 2);
        if (d < 2) throw ValidationError("qudit_full: dim must be >= 2");
        RVec weights(d);
        for (int j = 0; j < d; ++j) weights(j) = d - j;
        return qudit_full(weights / weights.sum());
    }
    if (name == "classical_diagonal") return classical_diagonal(integer(constants, "d", 2));
    if (name == "qubit_phase") return qubit_phase(scalar(constants, "r", 1.0));
    throw ValidationError("unknown model '" + name + "'");
}

ParametricModel restrict_model(const ParametricModel& model, const std::vector<int>& keep, const RVec& base) {
    require_size(base, model.params(), model.name());
    if (keep.empty()) throw ValidationError("restrict_model: nothing to keep");
    for (int j : keep)
        if (j < 0 || j >= model.params()) throw ValidationError("restrict_model: index out of range");
    auto full = [keep, base](const RVec& t) {
        RVec x = base;
        for (size_t j = 0; j < keep.size(); ++j) x(keep[j]) = t(static_cast<Eigen::Index>(j));
        return x;
    };
    auto state = [model, full](const RVec& t) { return model.raw_state(full(t)); };
    ParametricModel::DerivativeFn deriv;
    if (model.has_analytic_derivatives()) {
        deriv = [model, full, keep](const RVec& t) {
            const auto all = model.raw_derivatives(full(t));
            std::vector<CMat> out;
            for (int j : keep) out.push_back(all[j]);
            return out;
        };
    }
    auto domain = [model, full](const RVec& t) { return model.in_domain(full(t)); };
    std::vector<std::string> names;
    RVec point(keep.size());
    for (size_t j = 0; j < keep.size(); ++j) {
        names.push_back(model.param_names()[keep[j]]);
        point(static_cast<Eigen::Index>(j)) = base(keep[j]);
    }
    return ParametricModel(model.name() + "|restricted", model.dim(), static_cast<int>(keep.size()), state, deriv, domain)
        .with_step(model.step())
        .with_param_names(names)
        .with_default_point(point);
}

ParametricModel reparametrize(const ParametricModel& model, const RMat& a, const RVec& offset) {
    if (a.rows() != model.params() || offset.size() != model.params())
        throw ValidationError("reparametrize: shape mismatch");
    auto full = [a, offset](const RVec& t) { return RVec(offset + a * t); };
    auto state = [model, full](const RVec& t) { return model.raw_state(full(t)); };
    ParametricModel::DerivativeFn deriv;
    if (model.has_analytic_derivatives()) {
        deriv = [model, full, a](const RVec& t) {
            const auto all = model.raw_derivatives(full(t));
            std::vector<CMat> out;
            for (Eigen::Index j = 0; j < a.cols(); ++j) {
                CMat g = CMat::Zero(model.dim(), model.dim());
                for (Eigen::Index i = 0; i < a.rows(); ++i) g += a(i, j) * all[i];
                out.push_back(g);
            }
            return out;
        };
    }
    auto domain = [model, full](const RVec& t) { return model.in_domain(full(t)); };
    return ParametricModel(model.name() + "|reparametrized", model.dim(), static_cast<int>(a.cols()), state, deriv, domain)
        .with_step(model.step());
}

ModelExtension minimal_d_invariant_extension(const CMat& rho, const std::vector<CMat>& derivatives) {
    const StateBasis basis(rho);
    const int k = static_cast<int>(derivatives.size());
    if (k == 0) throw ValidationError("minimal_d_invariant_extension: no derivatives");

    std::vector<CMat> slds;
    for (const auto& g : derivatives) slds.push_back(sld_solve(basis, g));
    RMat gram(k, k);
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j) gram(i, j) = ip(rho, slds[i], slds[j]);
    Eigen::SelfAdjointEigenSolver<RMat> es(gram, Eigen::EigenvaluesOnly);
    const double top = es.eigenvalues().maxCoeff();
    if (!(top > 0.0) || std::sqrt(std::max(0.0, es.eigenvalues().minCoeff()) / top) < kSpanCutoff)
        throw PreconditionError("minimal_d_invariant_extension: SLDs are linearly dependent");

    // Orthonormal basis; re-orthogonalised twice for stability.
    std::vector<CMat> onb;
    auto orthogonalise = [&](CMat x) {
        for (int pass = 0; pass < 2; ++pass)
            for (const auto& b : onb) x -= ip(rho, b, x) * b;
        return x;
    };
    for (const auto& l : slds) {
        CMat x = orthogonalise(l);
        const double nrm = std::sqrt(std::max(0.0, ip(rho, x, x)));
        onb.push_back(x / nrm);
    }
    for (size_t i = 0; i < onb.size(); ++i) {
        const CMat dx = d_map(basis, onb[i]);
        const double scale = std::max(1.0, std::sqrt(std::max(0.0, ip(rho, dx, dx))));
        CMat x = orthogonalise(dx);
        const double nrm = std::sqrt(std::max(0.0, ip(rho, x, x)));
        if (nrm > kSpanCutoff * scale) onb.push_back((x + x.adjoint()) / (2.0 * nrm));
        if (onb.size() > static_cast<size_t>(rho.rows() * rho.rows()))
            throw PreconditionError("minimal_d_invariant_extension: span failed to stabilise");
    }

    ModelExtension ext;
    ext.k = k;
    ext.k_ext = static_cast<int>(onb.size());
    ext.rho = rho;
    ext.derivatives = derivatives;
    for (size_t i = static_cast<size_t>(k); i < onb.size(); ++i)
        ext.derivatives.push_back((rho * onb[i] + onb[i] * rho) / 2.0);
    ext.sld_basis = std::move(onb);
    return ext;
}

ModelExtension minimal_d_invariant_extension(const ParametricModel& model, const RVec& t0) {
    return minimal_d_invariant_extension(state_at(model, t0), derivatives_at(model, t0));
}

double extension_closure_residual(const ModelExtension& ext) {
    const StateBasis basis(ext.rho);
    double worst = 0.0;
    for (const auto& b : ext.sld_basis) {
        const CMat dx = d_map(basis, b);
        CMat x = dx;
        for (const auto& e : ext.sld_basis) x -= ip(ext.rho, e, x) * e;
        const double ref = std::max(1.0, std::sqrt(std::max(0.0, ip(ext.rho, dx, dx))));
        worst = std::max(worst, std::sqrt(std::max(0.0, ip(ext.rho, x, x))) / ref);
    }
    return worst;
}

}  // namespace qbound
