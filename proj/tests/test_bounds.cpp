#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "qbound/bounds.hpp"
#include "qbound/errors.hpp"
#include "qbound/fisher.hpp"
#include "qbound/models.hpp"
#include "test_support.hpp"

using namespace qbound;
using qbound::testing::Gen;
using qbound::testing::max_abs;

namespace {

RVec vec(std::initializer_list<double> v) {
    RVec out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out(i++) = x;
    return out;
}

RMat diag(std::initializer_list<double> v) { return vec(v).asDiagonal(); }

// Nuisance bound for (x, y) with z unknown, in closed form.
double two_obs_nuisance_closed(double s, double x, double y, double z, const RMat& w) {
    const double xp = (x - y * s) / (1.0 - s * s), yp = (y - x * s) / (1.0 - s * s);
    const double q = 1.0 - (x * xp + y * yp + z * z);
    const double den = q + xp * xp + 2.0 * xp * yp * s + yp * yp + z * z;
    RMat m(2, 2);
    m(0, 0) = (q + yp * yp * (1.0 - s * s) + z * z) / den;
    m(1, 1) = (q + xp * xp * (1.0 - s * s) + z * z) / den;
    m(0, 1) = m(1, 0) = (-xp * yp * (1.0 - s * s) + (q + z * z) * s) / den;
    RMat a = RMat::Zero(2, 2);
    a(0, 1) = -2.0 * z * std::sqrt(1.0 - s * s);
    a(1, 0) = -a(0, 1);
    const RMat ws = psd_sqrt(w);
    return (w * m).trace() + 0.5 * trace_norm(RMat(ws * a * ws));
}

HolevoOptions serial() {
    HolevoOptions o;
    o.parallel = false;
    return o;
}

}  // namespace

TEST_CASE("sld_bound examples") {
    CHECK(sld_bound(diag({4.0, 1.0}), RMat::Identity(2, 2)) == doctest::Approx(1.25).epsilon(1e-14));
    CHECK(sld_bound(diag({2.5}), diag({1.0})) == doctest::Approx(0.4).epsilon(1e-14));

    Gen gen(31);
    for (int trial = 0; trial < 20; ++trial) {
        const RMat j = gen.spd(3), w = gen.psd(3, 3);
        const RMat a = gen.real_matrix(3, 3) + 2.0 * RMat::Identity(3, 3);
        const double lhs = sld_bound(j, w);
        const double rhs = sld_bound(RMat(a.transpose() * j * a), RMat(a.transpose() * w * a));
        CHECK(rhs == doctest::Approx(lhs).epsilon(1e-8));
    }
    CHECK_THROWS_AS(sld_bound(diag({1.0, 0.0}), RMat::Identity(2, 2)), PreconditionError);
}

TEST_CASE("validate_weight") {
    CHECK_THROWS_AS(validate_weight(RMat::Identity(2, 2), 3), ValidationError);
    RMat ns = RMat::Identity(2, 2);
    ns(0, 1) = 0.5;
    CHECK_THROWS_AS(validate_weight(ns, 2), ValidationError);
    CHECK_THROWS_AS(validate_weight(diag({1.0, -0.1}), 2), ValidationError);
    const RMat clamped = validate_weight(diag({1.0, -1e-12}), 2);
    CHECK(clamped.minCoeff() >= 0.0);
}

TEST_CASE("rld_bound examples") {
    Gen gen(32);
    const RMat j = gen.spd(3);
    const RMat w = gen.psd(3, 3);
    CHECK(rld_bound(j.cast<cplx>(), w) == doctest::Approx(sld_bound(j, w)).epsilon(1e-12));

    const ParametricModel full = qudit_full(vec({0.75, 0.25}));
    const QfiBundle q = full_qfi(full, RVec::Zero(3));
    for (int trial = 0; trial < 10; ++trial) {
        const RMat wr = gen.psd(3, gen.integer(1, 3));
        CHECK(std::abs(rld_bound(*q.rld, wr) - rld_bound_d_invariant(q.J, *q.D, wr)) < 1e-8);
    }

    // Singular W: W + eps I tends to the value at W at rate sqrt(eps).
    const RMat ws = diag({1.0, 0.0, 2.0});
    const double at = rld_bound(*q.rld, ws);
    CHECK(std::isfinite(at));
    std::vector<double> gaps;
    for (double eps : {1e-4, 1e-6, 1e-8}) gaps.push_back(std::abs(rld_bound(*q.rld, RMat(ws + eps * RMat::Identity(3, 3))) - at));
    CHECK(gaps[1] < gaps[0] / 5.0);
    CHECK(gaps[2] < gaps[1] / 5.0);
    CHECK(gaps[2] < 1e-3);
}

TEST_CASE("holevo_bound on D-invariant models equals the RLD bound") {
    Gen gen(33);
    for (const RVec& spectrum : {vec({0.75, 0.25}), vec({0.5, 0.3, 0.2})}) {
        const ParametricModel full = qudit_full(spectrum);
        const RVec t = RVec::Zero(full.params());
        const QfiBundle q = full_qfi(full, t);
        const RMat w = gen.spd(full.params(), 0.2);
        const HolevoResult h = holevo_bound(full, t, w, serial());
        CHECK(h.diagnostics.free_parameters == 0);
        CHECK(max_abs(h.P - RMat::Identity(full.params(), full.params())) == 0.0);
        CHECK(h.value == doctest::Approx(rld_bound(*q.rld, w)).epsilon(1e-7));
        CHECK((w * h.V).trace() == doctest::Approx(h.value).epsilon(1e-6));
    }
}

TEST_CASE("two-observables nuisance bound matches its closed form") {
    Gen gen(34);
    int evaluated = 0;
    while (evaluated < 20) {
        const double s = gen.uniform(0.0, 0.9);
        const double x = gen.uniform(-0.5, 0.5), y = gen.uniform(-0.5, 0.5), z = gen.uniform(-0.5, 0.5);
        const ParametricModel two = builtin("two_observables", {{"s", {s}}});
        const RVec t = vec({x, y, z});
        if (!two.in_domain(t) || bloch_vector(state_at(two, t)).norm() > 0.9) continue;
        ++evaluated;
        const RMat w = gen.spd(2, 0.3);
        const double closed = two_obs_nuisance_closed(s, x, y, z, w);
        const HolevoResult n = nuisance_bound(two, t, w, 1, serial());
        CHECK(n.value == doctest::Approx(closed).epsilon(1e-4));
        const BoundReport r = bound_ladder(two, t, w, 1, serial());
        CHECK(r.holevo <= *r.nuisance + 1e-7);
    }
}

TEST_CASE("holevo of a one-parameter submodel is the SLD bound") {
    const ParametricModel full = qudit_full(vec({0.7, 0.3}));
    for (int j = 0; j < 3; ++j) {
        const ParametricModel one = restrict_model(full, {j}, vec({0.05, -0.1, 0.08}));
        const RVec t = *one.default_point();
        const HolevoResult h = holevo_bound(one, t, RMat::Identity(1, 1), serial());
        CHECK(h.value == doctest::Approx(1.0 / sld_qfi(one, t).J(0, 0)).epsilon(1e-7));
    }
}

TEST_CASE("nuisance_bound with orthogonal nuisance equals the interest-block bound") {
    Gen gen(35);
    for (int trial = 0; trial < 5; ++trial) {
        const RMat j1 = gen.spd(2), j2 = gen.spd(2);
        // D blocks small enough that J +- iD/... stays a valid D-invariant pair.
        RMat d1 = RMat::Zero(2, 2), d2 = RMat::Zero(2, 2);
        d1(0, 1) = 0.3;
        d1(1, 0) = -0.3;
        d2(0, 1) = -0.2;
        d2(1, 0) = 0.2;
        RMat j = RMat::Zero(4, 4), d = RMat::Zero(4, 4);
        j.topLeftCorner(2, 2) = j1;
        j.bottomRightCorner(2, 2) = j2;
        d.topLeftCorner(2, 2) = d1;
        d.bottomRightCorner(2, 2) = d2;
        const RMat w = gen.spd(2, 0.2);
        const HolevoResult n = nuisance_bound(j, d, w, 2, 2, serial());
        CHECK(n.value == doctest::Approx(rld_bound_d_invariant(j1, d1, w)).epsilon(1e-7));
        CHECK(n.value == doctest::Approx(nuisance_closed_form(j, d, w, 2)).epsilon(1e-7));
    }
}

TEST_CASE("nuisance_bound with s = 0 is holevo_bound") {
    const ParametricModel two = builtin("two_observables", {{"s", {0.3}}});
    const ParametricModel xy = restrict_model(two, {0, 1}, vec({0.2, 0.1, 0.3}));
    const ExtensionQfi e = extension_qfi(xy, vec({0.2, 0.1}));
    const RMat w = diag({1.0, 2.0});
    CHECK(nuisance_bound(e.J, e.D, w, 2, 0, serial()).value ==
          doctest::Approx(holevo_bound(e.J, e.D, w, 2, serial()).value).epsilon(1e-12));
}

TEST_CASE("multiphase nuisance bound matches its closed form") {
    const int d = 2, n = 2;
    const double a = 0.6, eta = 0.8;
    const ParametricModel mp = builtin("multiphase", {{"d", {d}}, {"N", {n}}, {"a", {a}}, {"eta", {eta}}});
    const RVec t = *mp.default_point();
    const double alpha = t(d), p = t(d + 1);
    const double s2 = std::sin(alpha) * std::sin(alpha);
    RMat jt(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) jt(i, j) = 4.0 * p * n * n * s2 / d * ((i == j ? 1.0 : 0.0) - s2 / d);
    const RMat w = RMat::Identity(d, d);
    const HolevoResult nb = nuisance_bound(mp, t, w, 2, serial());
    CHECK(nb.value == doctest::Approx((w * jt.inverse()).trace()).epsilon(1e-5));
}

TEST_CASE("optimal_limiting_covariance examples") {
    Gen gen(36);
    const RMat j = gen.spd(3);
    RMat p = RMat::Zero(2, 3);
    p(0, 0) = p(1, 1) = 1.0;
    p(0, 2) = 0.3;
    p(1, 2) = -0.2;
    const RMat v0 = optimal_limiting_covariance(j, RMat::Zero(3, 3), gen.spd(2), p);
    CHECK(max_abs(v0 - p * j.inverse() * p.transpose()) < 1e-10);

    const ParametricModel full = qudit_full(vec({0.75, 0.25}));
    const QfiBundle q = full_qfi(full, RVec::Zero(3));
    const RMat ji = q.J.inverse();
    const RMat expect = ji + 0.5 * matrix_abs(RMat(ji * *q.D * ji)).abs;
    CHECK(max_abs(optimal_limiting_covariance(q.J, *q.D, RMat::Identity(3, 3), RMat::Identity(3, 3)) - expect) < 1e-10);

    const ParametricModel amp = amplitude_damping();
    const RVec t = vec({0.9, 0.4, 0.45});
    const RMat w = diag({1.0, 0.5});
    const HolevoResult h = nuisance_bound(amp, t, w, 1, serial());
    CHECK((w * h.V).trace() == doctest::Approx(h.value).epsilon(1e-6));
}

TEST_CASE("sld_gap_bound examples") {
    Gen gen(37);
    for (int trial = 0; trial < 10; ++trial) {
        const double s = gen.uniform(0.0, 0.9);
        const double x = gen.uniform(-0.3, 0.3), y = gen.uniform(-0.3, 0.3), z = gen.uniform(-0.5, 0.5);
        const ParametricModel two = builtin("two_observables", {{"s", {s}}});
        const ExtensionQfi e = extension_qfi(two, vec({x, y, z}));
        CHECK(sld_gap_bound(e.J, e.D, 2) == doctest::Approx(2.0 * std::abs(z) * std::sqrt(1.0 - s * s)).epsilon(1e-8));
    }
    const ExtensionQfi c = extension_qfi(classical_diagonal(3), vec({0.2, 0.3}));
    CHECK(sld_gap_bound(c.J, c.D, 2) < 1e-14);
}

TEST_CASE("SLD gaps obey the product tradeoff") {
    // Delta_1 + a^2 Delta_2 >= a G for every a > 0 forces Delta_1 Delta_2 >= G^2 / 4.
    const double s = 0.3;
    const ParametricModel two = builtin("two_observables", {{"s", {s}}});
    for (double z : {-0.4, -0.1, 0.05, 0.2, 0.45}) {
        const RVec t = vec({0.1, -0.15, z});
        const ExtensionQfi e = extension_qfi(two, t);
        const double g = sld_gap_bound(e.J, e.D, 2);
        const RMat ji = e.J.inverse();
        for (double a : {0.5, 1.0, 2.0}) {
            const HolevoResult h = nuisance_bound(e.J, e.D, diag({1.0, a * a}), 2, 1, serial());
            const double d1 = h.V(0, 0) - ji(0, 0), d2 = h.V(1, 1) - ji(1, 1);
            CHECK(d1 + a * a * d2 >= a * g - 1e-7);
            CHECK(d1 * d2 >= g * g / 4.0 - 1e-7);
        }
    }
}

TEST_CASE("cost-function reduction") {
    const ParametricModel phase = qubit_phase(0.8);
    const RVec t0 = vec({0.3});
    const auto cos_cost = [](const RVec& est, const RVec& t) { return 2.0 * (1.0 - std::cos(est(0) - t(0))); };
    const RMat w = cost_hessian(cos_cost, t0);
    CHECK(w(0, 0) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(asymptotic_cost_bound(phase, t0, w) == doctest::Approx(1.0 / 0.64).epsilon(1e-5));

    const ParametricModel two = builtin("two_observables", {{"s", {0.3}}});
    const RVec t = vec({0.2, 0.1, 0.3});
    RMat wq(3, 3);
    wq << 2.0, 0.3, 0.0, 0.3, 1.0, 0.1, 0.0, 0.1, 0.5;
    const auto quad = [&wq](const RVec& est, const RVec& tt) { return (est - tt).dot(wq * (est - tt)); };
    const RMat wh = cost_hessian(quad, t);
    CHECK(max_abs(wh - wq) < 1e-6);
    CHECK(asymptotic_cost_bound(two, t, wq) == doctest::Approx(holevo_bound(two, t, wq, serial()).value).epsilon(1e-9));

    const auto bad = [](const RVec& est, const RVec& tt) { return -(est - tt).squaredNorm(); };
    CHECK_THROWS_AS(cost_hessian(bad, t), PreconditionError);
}

TEST_CASE("singular weights are continuous under regularisation") {
    const ParametricModel amp = amplitude_damping();
    const RVec t = vec({0.9, 0.4, 0.45});
    const RMat w = diag({1.0, 0.0});
    const double at = asymptotic_cost_bound(amp, t, w, 1, serial());
    const ExtensionQfi e = extension_qfi(amp, t);
    CHECK(at == doctest::Approx(nuisance_bound(e.J, e.D, w, 2, 1, serial()).value).epsilon(1e-7));
    std::vector<double> gaps;
    for (double eps : {1e-2, 1e-4, 1e-6}) {
        const double reg = nuisance_bound(e.J, e.D, RMat(w + eps * diag({0.0, 1.0})), 2, 1, serial()).value;
        CHECK(reg >= at - 1e-8);
        gaps.push_back(reg - at);
    }
    CHECK(gaps[1] < gaps[0] / 5.0);
    CHECK(gaps[2] < gaps[1] / 5.0);
}

TEST_CASE("bound ladder ordering") {
    Gen gen(38);
    struct Case {
        ParametricModel model;
        RVec t;
        int s;
    };
    const ParametricModel two = builtin("two_observables", {{"s", {0.4}}});
    const std::vector<Case> cases = {
        {two, vec({0.2, -0.1, 0.3}), 0},
        {restrict_model(two, {0, 1}, vec({0.2, -0.1, 0.3})), vec({0.2, -0.1}), 0},
        {amplitude_damping(), vec({0.9, 0.4, 0.45}), 1},
        {qudit_full(vec({0.5, 0.3, 0.2})), RVec::Zero(8), 0},
    };
    for (const auto& c : cases) {
        INFO(c.model.name());
        const int k = c.model.params() - c.s;
        const RMat w = gen.spd(k, 0.2);
        const BoundReport r = bound_ladder(c.model, c.t, w, c.s, serial());
        CHECK(r.sld <= r.holevo + 1e-7);
        CHECK(r.rld <= r.holevo + 1e-7);
        CHECK(r.diagnostics.stable);
        CHECK((w * r.V_opt).trace() == doctest::Approx(r.nuisance ? *r.nuisance : r.holevo).epsilon(1e-6));

        const ExtensionQfi e = extension_qfi(restrict_model(c.model, [k] {
            std::vector<int> keep(k);
            for (int j = 0; j < k; ++j) keep[j] = j;
            return keep;
        }(), c.t), c.t.head(k));
        RMat p0 = RMat::Zero(k, e.k_ext);
        p0.leftCols(k).setIdentity();
        const RMat ji = e.J.inverse();
        CHECK(r.holevo <= holevo_objective(p0, ji, RMat(ji * e.D * ji), psd_sqrt(w), w) + 1e-9);
    }

    const ParametricModel full = qudit_full(vec({0.5, 0.3, 0.2}));
    const BoundReport eq = bound_ladder(full, RVec::Zero(8), RMat::Identity(8, 8), 0, serial());
    CHECK(std::abs(eq.rld - eq.holevo) < 1e-7);

    // For larger |z| the RLD bound is attained even without D-invariance.
    const ParametricModel xy = restrict_model(two, {0, 1}, vec({0.2, -0.1, 0.05}));
    const BoundReport gap = bound_ladder(xy, vec({0.2, -0.1}), RMat::Identity(2, 2), 0, serial());
    CHECK(gap.holevo - gap.rld > 1e-4);
}

TEST_CASE("bounds are monotone in the weight") {
    Gen gen(39);
    const ParametricModel amp = amplitude_damping();
    const RVec t = vec({0.9, 0.4, 0.45});
    for (int trial = 0; trial < 5; ++trial) {
        const RMat w1 = gen.spd(2, 0.1);
        const RMat w2 = w1 + gen.psd(2, 1);
        const BoundReport a = bound_ladder(amp, t, w1, 1, serial());
        const BoundReport b = bound_ladder(amp, t, w2, 1, serial());
        CHECK(a.sld <= b.sld + 1e-8);
        CHECK(a.rld <= b.rld + 1e-8);
        CHECK(a.holevo <= b.holevo + 1e-8);
        CHECK(*a.nuisance <= *b.nuisance + 1e-8);
    }
}

TEST_CASE("nuisance bound dominates the fixed-parameter bound on amplitude damping") {
    const ParametricModel amp = amplitude_damping();
    for (double eta : {0.1, 0.5, 0.9}) {
        for (double th : {0.3, 0.9, 1.5, 2.2}) {
            const BoundReport r = bound_ladder(amp, vec({th, 0.2, eta}), RMat::Identity(2, 2), 1, serial());
            CHECK(r.holevo <= *r.nuisance + 1e-7);
        }
    }
}

TEST_CASE("lifted objective equals the direct one") {
    Gen gen(40);
    for (int trial = 0; trial < 20; ++trial) {
        const RMat j = gen.spd(4);
        const RMat d = 0.2 * gen.antisymmetric(4);
        const RMat ji = j.inverse();
        const RMat a = ji * d * ji;
        const RMat w = gen.psd(2, gen.integer(1, 2));
        RMat p = gen.real_matrix(2, 4);
        p.leftCols(2).setIdentity();
        // P^T W P is rank deficient, so its square root carries ~1e-8 noise.
        CHECK(holevo_objective(p, ji, a, psd_sqrt(w), w) ==
              doctest::Approx(holevo_objective_lifted(p, ji, a, w)).epsilon(1e-6));
    }
}

TEST_CASE("holevo_bound input validation") {
    CHECK_THROWS_AS(holevo_bound(RMat::Identity(3, 3), RMat::Zero(2, 2), RMat::Identity(2, 2), 2), ValidationError);
    CHECK_THROWS_AS(holevo_bound(RMat::Identity(3, 3), RMat::Identity(3, 3), RMat::Identity(2, 2), 2), ValidationError);
    CHECK_THROWS_AS(holevo_bound(RMat::Identity(3, 3), RMat::Zero(3, 3), RMat::Identity(2, 2), 4), ValidationError);
    CHECK_THROWS_AS(nuisance_bound(amplitude_damping(), vec({0.9, 0.4, 0.45}), RMat::Identity(2, 2), 3), ValidationError);
}

TEST_CASE("holevo minimiser is deterministic and parallel-safe") {
    const ParametricModel two = builtin("two_observables", {{"s", {0.4}}});
    const ParametricModel xy = restrict_model(two, {0, 1}, vec({0.2, -0.1, 0.3}));
    HolevoOptions par;
    par.parallel = true;
    const HolevoResult a = holevo_bound(xy, vec({0.2, -0.1}), RMat::Identity(2, 2), serial());
    const HolevoResult b = holevo_bound(xy, vec({0.2, -0.1}), RMat::Identity(2, 2), par);
    CHECK(a.value == b.value);
    CHECK(a.diagnostics.restart_values == b.diagnostics.restart_values);
    CHECK(a.diagnostics.restarts == 8);
    CHECK(a.diagnostics.converged);
}
