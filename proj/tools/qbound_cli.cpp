#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "qbound/bounds.hpp"
#include "qbound/errors.hpp"
#include "qbound/estimate.hpp"
#include "qbound/fisher.hpp"
#include "qbound/gaussian.hpp"
#include "qbound/io.hpp"
#include "qbound/models.hpp"

using namespace qbound;
using nlohmann::json;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitConvergence = 3;
constexpr int kExitPrecondition = 4;

struct ModelArgs {
    std::string model;
    std::string constants;
    std::string point;
};

void add_model_options(CLI::App* cmd, ModelArgs& m) {
    cmd->add_option("--model", m.model, "Built-in model name")->required();
    cmd->add_option("--constants", m.constants, "Model constants k=v,... (vector entries separated by ':')");
    cmd->add_option("--point", m.point, "Evaluation point v1,v2,...");
}

ModelSpec model_spec(const ModelArgs& m) {
    return {m.model, parse_constants(m.constants), parse_number_list(m.point)};
}

RVec resolve_point(const ParametricModel& model, const ModelSpec& ms) {
    RVec t;
    if (!ms.point.empty()) {
        t = Eigen::Map<const RVec>(ms.point.data(), static_cast<Eigen::Index>(ms.point.size()));
    } else if (model.default_point()) {
        t = *model.default_point();
    } else {
        throw ValidationError("--point is required for model '" + model.name() + "'");
    }
    if (t.size() != model.params()) throw ValidationError("--point must have one entry per parameter");
    if (!model.in_domain(t)) throw ValidationError("point lies outside the model domain");
    return t;
}

void emit(const std::string& text, const std::string& out) {
    std::cout << text;
    if (!out.empty()) {
        std::ofstream f(out);
        if (!f) throw ValidationError("cannot open output file '" + out + "'");
        f << text;
    }
}

std::string json_text(const json& j) { return j.dump(2) + "\n"; }

std::string csv_text(const CsvTable& t) {
    std::ostringstream os;
    write_csv(os, t);
    return os.str();
}

std::vector<double> to_vector(const RVec& v) { return {v.data(), v.data() + v.size()}; }

int cmd_bounds(const ModelArgs& m, const std::string& weight, int nuisance, const HolevoOptions& opts, const std::string& out) {
    const ModelSpec ms = model_spec(m);
    const ParametricModel model = builtin(ms.name, ms.constants);
    const RVec t0 = resolve_point(model, ms);
    if (nuisance < 0 || nuisance >= model.params()) throw ValidationError("--nuisance must lie in [0, params)");
    const RMat w = parse_weight(weight, model.params() - nuisance);
    const BoundReport r = bound_ladder(model, t0, w, nuisance, opts);
    ModelSpec resolved = ms;
    resolved.point = to_vector(t0);
    const json doc = {{"model", to_json(resolved)}, {"weight", matrix_json(w)}, {"report", to_json(r)}};
    emit(json_text(doc), out);
    return r.diagnostics.converged ? 0 : kExitConvergence;
}

int cmd_sweep(const ModelArgs& m, const std::string& weight, int nuisance, const std::vector<std::string>& grids,
              const HolevoOptions& opts, const std::string& out) {
    const ModelSpec ms = model_spec(m);
    const ParametricModel model = builtin(ms.name, ms.constants);
    const RVec base = resolve_point(model, ms);
    if (grids.empty() || grids.size() > 2) throw ValidationError("sweep needs one or two --grid axes");
    if (nuisance < 0 || nuisance >= model.params()) throw ValidationError("--nuisance must lie in [0, params)");
    const RMat w = parse_weight(weight, model.params() - nuisance);
    std::vector<GridAxis> axes;
    std::vector<int> index;
    for (const auto& g : grids) {
        axes.push_back(parse_grid(g));
        const auto& names = model.param_names();
        const auto it = std::find(names.begin(), names.end(), axes.back().param);
        if (it == names.end()) throw ValidationError("grid parameter '" + axes.back().param + "' is not a model parameter");
        index.push_back(static_cast<int>(it - names.begin()));
    }
    CsvTable table;
    table.kind = "sweep";
    table.meta = {{"model", ms.name}, {"nuisance", std::to_string(nuisance)}};
    for (const auto& a : axes) table.columns.push_back(a.param);
    for (const char* c : {"sld", "rld", "holevo", "nuisance"}) table.columns.emplace_back(c);
    const int outer = axes.size() == 2 ? axes[1].steps : 1;
    std::vector<RVec> points;
    for (int j = 0; j < outer; ++j) {
        for (int i = 0; i < axes[0].steps; ++i) {
            RVec t = base;
            t(index[0]) = axes[0].value(i);
            if (axes.size() == 2) t(index[1]) = axes[1].value(j);
            if (!model.in_domain(t)) throw ValidationError("grid point lies outside the model domain");
            points.push_back(t);
        }
    }
    bool converged = true;
    for (const RVec& t : points) {
        const BoundReport r = bound_ladder(model, t, w, nuisance, opts);
        converged = converged && r.diagnostics.converged;
        std::vector<double> row;
        for (int idx : index) row.push_back(t(idx));
        row.push_back(r.sld);
        row.push_back(r.rld);
        row.push_back(r.holevo);
        row.push_back(r.nuisance ? *r.nuisance : std::numeric_limits<double>::quiet_NaN());
        table.rows.push_back(row);
    }
    emit(csv_text(table), out);
    return converged ? 0 : kExitConvergence;
}

struct SimulateArgs {
    std::optional<double> t_true;
    long copies = 256;
    long trials = 1000;
    std::optional<std::uint64_t> seed;
    bool two_step = false;
    double x = 0.1;
    std::string format = "csv";
};

int cmd_simulate(const ModelArgs& m, const SimulateArgs& a, const std::string& out) {
    if (!a.seed) throw ValidationError("simulate requires --seed");
    const ModelSpec ms = model_spec(m);
    const ParametricModel model = builtin(ms.name, ms.constants);
    const RVec t0 = resolve_point(model, ms);
    if (t0.size() != 1) throw ValidationError("simulate supports one-parameter models only");
    const double t_true = a.t_true.value_or(t0(0));
    const SimulationRun run = a.two_step ? two_step_simulate(model, t_true, a.copies, a.x, a.trials, *a.seed)
                                         : simulate_mse(model, t_true, t0(0), a.copies, a.trials, *a.seed);
    if (a.format == "json") {
        json doc = {{"seed", run.seed},
                    {"n", run.n},
                    {"trials", run.trials},
                    {"local_copies", run.local_copies},
                    {"mean", run.mean},
                    {"n_mse", run.n_mse},
                    {"n_mse_se", run.n_mse_se},
                    {"fallback_frequency", run.fallback_frequency},
                    {"tail_levels", run.tail_levels},
                    {"tail_frequencies", run.tail_frequencies}};
        emit(json_text(doc), out);
    } else {
        emit(csv_text(simulation_table(run)), out);
    }
    return 0;
}

struct TailArgs {
    std::optional<std::uint64_t> seed;
    double c = 1.0;
    long samples = 1000000;
    std::string classical;
    std::string thermal;
};

int cmd_tail(const ModelArgs& m, const std::string& weight, const TailArgs& a, const std::string& out) {
    if (!a.seed) throw ValidationError("tail requires --seed");
    TailOptions opt;
    opt.seed = *a.seed;
    opt.samples = a.samples;
    TailEstimate est;
    json doc;
    if (!a.classical.empty() || !a.thermal.empty()) {
        const auto c = parse_number_list(a.classical);
        const auto n = parse_number_list(a.thermal);
        const auto dc = static_cast<Eigen::Index>(c.size());
        const RMat gamma_c = dc ? RMat(Eigen::Map<const RVec>(c.data(), dc).asDiagonal()) : RMat(0, 0);
        const RVec nv = Eigen::Map<const RVec>(n.data(), static_cast<Eigen::Index>(n.size()));
        est = gaussian_tail_bound(gamma_c, nv, parse_weight(weight, dc + 2 * nv.size()), a.c, opt);
        doc["kind"] = "gaussian";
    } else {
        if (m.model.empty()) throw ValidationError("tail needs --model or --classical/--thermal");
        const ModelSpec ms = model_spec(m);
        const ParametricModel model = builtin(ms.name, ms.constants);
        const RVec t0 = resolve_point(model, ms);
        const QfiBundle q = full_qfi(model, t0);
        est = qudit_tail_bound(q.J, *q.D, parse_weight(weight, model.params()), a.c, opt);
        doc["kind"] = "qudit";
        doc["model"] = to_json(ModelSpec{ms.name, ms.constants, to_vector(t0)});
    }
    doc["c"] = a.c;
    doc["seed"] = *a.seed;
    doc["tail"] = to_json(est);
    emit(json_text(doc), out);
    return 0;
}

int cmd_gaussian(const std::string& input, const std::string& action, const std::string& weight, const std::string& out) {
    std::ifstream f(input);
    if (!f) throw ValidationError("cannot open '" + input + "'");
    json in;
    try {
        f >> in;
    } catch (const json::exception& e) {
        throw ValidationError(std::string("gaussian input: ") + e.what());
    }
    const GaussianModel g = parse_gaussian(in);
    json doc = {{"action", action}};
    if (action == "canonical") {
        doc["canonical"] = to_json(canonical_form(g.gamma));
    } else if (action == "d-invariance") {
        const DInvarianceReport r = is_d_invariant_submodel(g.gamma, g.t);
        doc["invariant"] = r.invariant;
        doc["residual"] = r.residual;
        doc["rank"] = r.rank;
    } else if (action == "covariance") {
        const CMat rld = g.t.transpose().cast<cplx>() * rld_of_gaussian(g.gamma) * g.t.cast<cplx>();
        Eigen::FullPivLU<CMat> lu(rld);
        if (!lu.isInvertible()) throw PreconditionError("gaussian: T^T Gamma^-1 T is singular");
        CMat z = lu.inverse();
        z = (z + z.adjoint()) / 2.0;
        const RMat w = parse_weight(weight, g.t.cols());
        const RMat v = measurement_covariance(z, w);
        doc["covariance"] = matrix_json(v);
        doc["weighted_mse"] = (w * v).trace();
    } else if (action == "rld") {
        const CMat r = rld_of_gaussian(g.gamma);
        doc["rld_re"] = matrix_json(r.real());
        doc["rld_im"] = matrix_json(r.imag());
    } else {
        throw ValidationError("unknown gaussian action '" + action + "'");
    }
    emit(json_text(doc), out);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Quantum estimation bounds toolkit"};
    app.require_subcommand(1);
    std::string out;
    std::string format = "json";
    std::string weight = "identity";
    int nuisance = 0;
    HolevoOptions holevo;

    ModelArgs bm;
    auto* bounds = app.add_subcommand("bounds", "Bound ladder at one point");
    add_model_options(bounds, bm);
    bounds->add_option("--weight", weight, "identity | diag:w1,w2,... | file:path");
    bounds->add_option("--nuisance", nuisance, "Number of trailing nuisance parameters");
    bounds->add_option("--max-evals", holevo.nelder_mead.max_evaluations, "Simplex evaluation budget per restart")
        ->check(CLI::PositiveNumber);
    bounds->add_option("--out", out, "Also write the output to this file");
    bounds->add_option("--format", format, "json")->check(CLI::IsMember({"json"}));

    ModelArgs sm;
    std::vector<std::string> grids;
    auto* sweep = app.add_subcommand("sweep", "Bounds over a 1-D or 2-D grid");
    add_model_options(sweep, sm);
    sweep->add_option("--weight", weight, "identity | diag:w1,w2,... | file:path");
    sweep->add_option("--nuisance", nuisance, "Number of trailing nuisance parameters");
    sweep->add_option("--max-evals", holevo.nelder_mead.max_evaluations, "Simplex evaluation budget per restart")
        ->check(CLI::PositiveNumber);
    sweep->add_option("--grid", grids, "param:lo:hi:steps (repeat for a 2-D grid)")->required();
    sweep->add_option("--out", out, "Also write the output to this file");
    sweep->add_option("--format", format, "csv")->check(CLI::IsMember({"csv"}));

    ModelArgs im;
    SimulateArgs sa;
    auto* simulate = app.add_subcommand("simulate", "Monte-Carlo MSE of the local measurement");
    add_model_options(simulate, im);
    simulate->add_option("--true", sa.t_true, "True parameter (default: the point)");
    simulate->add_option("--copies", sa.copies, "Copies per trial");
    simulate->add_option("--trials", sa.trials, "Number of trials");
    simulate->add_option("--seed", sa.seed, "RNG seed")->required();
    simulate->add_flag("--two-step", sa.two_step, "Use the two-stage protocol");
    simulate->add_option("--x", sa.x, "First-stage exponent for --two-step");
    simulate->add_option("--out", out, "Also write the output to this file");
    simulate->add_option("--format", sa.format, "csv | json")->check(CLI::IsMember({"csv", "json"}));

    ModelArgs tm;
    TailArgs ta;
    auto* tail = app.add_subcommand("tail", "Limiting tail probability");
    tail->add_option("--model", tm.model, "Built-in model name");
    tail->add_option("--constants", tm.constants, "Model constants");
    tail->add_option("--point", tm.point, "Evaluation point");
    tail->add_option("--weight", weight, "identity | diag:w1,w2,... | file:path");
    tail->add_option("--c", ta.c, "Tail threshold");
    tail->add_option("--samples", ta.samples, "Monte-Carlo samples");
    tail->add_option("--classical", ta.classical, "Classical variances g1,g2,... (Gaussian tail)");
    tail->add_option("--thermal", ta.thermal, "Thermal occupations N1,N2,... (Gaussian tail)");
    tail->add_option("--seed", ta.seed, "RNG seed")->required();
    tail->add_option("--out", out, "Also write the output to this file");
    tail->add_option("--format", format, "json")->check(CLI::IsMember({"json"}));

    std::string input;
    std::string action = "canonical";
    auto* gauss = app.add_subcommand("gaussian", "Gaussian shift model queries");
    gauss->add_option("--input", input, "Model JSON {dC, dQ, Gamma_re, Gamma_im, T}")->required();
    gauss->add_option("--action", action, "canonical | d-invariance | covariance | rld");
    gauss->add_option("--weight", weight, "identity | diag:w1,w2,... | file:path");
    gauss->add_option("--out", out, "Also write the output to this file");
    gauss->add_option("--format", format, "json")->check(CLI::IsMember({"json"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitValidation;
    }

    try {
        if (*bounds) return cmd_bounds(bm, weight, nuisance, holevo, out);
        if (*sweep) return cmd_sweep(sm, weight, nuisance, grids, holevo, out);
        if (*simulate) return cmd_simulate(im, sa, out);
        if (*tail) return cmd_tail(tm, weight, ta, out);
        if (*gauss) return cmd_gaussian(input, action, weight, out);
    } catch (const PreconditionError& e) {
        std::cerr << "precondition failed: " << e.what() << '\n';
        return kExitPrecondition;
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid input: " << e.what() << '\n';
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
