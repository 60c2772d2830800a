#include "qbound/io.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "qbound/errors.hpp"

namespace qbound {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(s);
    while (std::getline(is, cur, sep)) out.push_back(cur);
    if (!s.empty() && s.back() == sep) out.emplace_back();
    return out;
}

double parse_double(const std::string& text) {
    const std::string t = trim(text);
    if (t.empty()) throw ValidationError("expected a number, got an empty field");
    char* end = nullptr;
    const double v = std::strtod(t.c_str(), &end);
    if (end != t.c_str() + t.size()) throw ValidationError("malformed number '" + t + "'");
    return v;
}

}  // namespace

std::string format_double(double v) {
    char buf[40];
    for (int prec = 1; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

void write_csv(std::ostream& os, const CsvTable& table) {
    os << "# qbound-csv v" << kCsvVersion << ' ' << table.kind << '\n';
    for (const auto& [k, v] : table.meta) os << "# " << k << '=' << v << '\n';
    for (size_t i = 0; i < table.columns.size(); ++i) os << (i ? "," : "") << table.columns[i];
    os << '\n';
    for (const auto& row : table.rows) {
        for (size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << format_double(row[i]);
        os << '\n';
    }
}

CsvTable parse_csv(std::istream& is) {
    CsvTable t;
    std::string line;
    if (!std::getline(is, line)) throw ValidationError("csv: empty input");
    const std::string prefix = "# qbound-csv v";
    if (line.rfind(prefix, 0) != 0) throw ValidationError("csv: missing version header");
    std::istringstream head(line.substr(prefix.size()));
    int version = 0;
    head >> version >> t.kind;
    if (version != kCsvVersion) throw ValidationError("csv: unsupported version " + std::to_string(version));
    bool have_columns = false;
    while (std::getline(is, line)) {
        line = trim(line);
        if (line.empty()) continue;
        if (!have_columns && line.rfind("# ", 0) == 0) {
            const auto body = line.substr(2);
            const auto eq = body.find('=');
            if (eq == std::string::npos) throw ValidationError("csv: malformed metadata line");
            t.meta.emplace_back(body.substr(0, eq), body.substr(eq + 1));
            continue;
        }
        if (!have_columns) {
            t.columns = split(line, ',');
            have_columns = true;
            continue;
        }
        std::vector<double> row;
        for (const auto& f : split(line, ',')) row.push_back(parse_double(f));
        if (row.size() != t.columns.size()) throw ValidationError("csv: row width differs from the header");
        t.rows.push_back(std::move(row));
    }
    if (!have_columns) throw ValidationError("csv: missing column line");
    return t;
}

std::vector<double> parse_number_list(const std::string& text, char sep) {
    std::vector<double> out;
    if (trim(text).empty()) return out;
    for (const auto& f : split(text, sep)) out.push_back(parse_double(f));
    return out;
}

Constants parse_constants(const std::string& text) {
    Constants out;
    if (trim(text).empty()) return out;
    for (const auto& item : split(text, ',')) {
        const auto eq = item.find('=');
        if (eq == std::string::npos) throw ValidationError("constants: expected key=value, got '" + item + "'");
        const std::string key = trim(item.substr(0, eq));
        if (key.empty()) throw ValidationError("constants: empty key");
        out[key] = parse_number_list(item.substr(eq + 1), ':');
        if (out[key].empty()) throw ValidationError("constants: empty value for '" + key + "'");
    }
    return out;
}

RMat parse_weight(const std::string& text, Eigen::Index k) {
    RMat w;
    if (text == "identity") {
        w = RMat::Identity(k, k);
    } else if (text.rfind("diag:", 0) == 0) {
        const std::string body = text.substr(5);
        const auto v = parse_number_list(body, body.find(',') != std::string::npos ? ',' : ':');
        if (static_cast<Eigen::Index>(v.size()) != k) throw ValidationError("weight: diag needs one entry per parameter");
        w = Eigen::Map<const RVec>(v.data(), k).asDiagonal();
    } else if (text.rfind("file:", 0) == 0) {
        std::ifstream f(text.substr(5));
        if (!f) throw ValidationError("weight: cannot open '" + text.substr(5) + "'");
        std::vector<double> v;
        std::string tok;
        while (f >> tok)
            for (const auto& part : split(tok, ','))
                if (!trim(part).empty()) v.push_back(parse_double(part));
        if (static_cast<Eigen::Index>(v.size()) != k * k) throw ValidationError("weight: file must hold a k x k matrix");
        w = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(v.data(), k, k);
    } else {
        throw ValidationError("weight: expected identity, diag:... or file:...");
    }
    return validate_weight(w, k);
}

GridAxis parse_grid(const std::string& text) {
    const auto parts = split(text, ':');
    if (parts.size() != 4) throw ValidationError("grid: expected param:lo:hi:steps");
    GridAxis g;
    g.param = trim(parts[0]);
    g.lo = parse_double(parts[1]);
    g.hi = parse_double(parts[2]);
    const double steps = parse_double(parts[3]);
    if (steps < 1 || steps != static_cast<int>(steps)) throw ValidationError("grid: steps must be a positive integer");
    g.steps = static_cast<int>(steps);
    if (g.param.empty()) throw ValidationError("grid: missing parameter name");
    return g;
}

nlohmann::json matrix_json(const RMat& m) {
    nlohmann::json out = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        out.push_back(row);
    }
    return out;
}

RMat matrix_from_json(const nlohmann::json& j) {
    if (!j.is_array()) throw ValidationError("matrix: expected an array of rows");
    const auto rows = static_cast<Eigen::Index>(j.size());
    if (rows == 0) return RMat(0, 0);
    const auto cols = static_cast<Eigen::Index>(j[0].size());
    RMat m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const auto& row = j[static_cast<size_t>(r)];
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
            throw ValidationError("matrix: ragged rows");
        for (Eigen::Index c = 0; c < cols; ++c) {
            if (!row[static_cast<size_t>(c)].is_number()) throw ValidationError("matrix: non-numeric entry");
            m(r, c) = row[static_cast<size_t>(c)].get<double>();
        }
    }
    return m;
}

ModelSpec parse_model_spec(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("name") || !j["name"].is_string())
        throw ValidationError("model: missing name");
    ModelSpec s;
    s.name = j["name"].get<std::string>();
    if (j.contains("constants")) {
        for (const auto& [k, v] : j["constants"].items()) {
            if (v.is_number()) {
                s.constants[k] = {v.get<double>()};
            } else if (v.is_array()) {
                for (const auto& x : v) {
                    if (!x.is_number()) throw ValidationError("model: constant '" + k + "' is not numeric");
                    s.constants[k].push_back(x.get<double>());
                }
            } else {
                throw ValidationError("model: constant '" + k + "' is not numeric");
            }
        }
    }
    if (j.contains("point")) {
        for (const auto& x : j["point"]) {
            if (!x.is_number()) throw ValidationError("model: point must be numeric");
            s.point.push_back(x.get<double>());
        }
    }
    return s;
}

nlohmann::json to_json(const ModelSpec& model) {
    nlohmann::json c = nlohmann::json::object();
    for (const auto& [k, v] : model.constants) {
        if (v.size() == 1) c[k] = v[0];
        else c[k] = v;
    }
    return {{"name", model.name}, {"constants", c}, {"point", model.point}};
}

nlohmann::json to_json(const BoundReport& r) {
    nlohmann::json out = {
        {"k", r.k},
        {"nuisance_count", r.nuisance_count},
        {"k_ext", r.k_ext},
        {"sld", r.sld},
        {"rld", r.rld},
        {"holevo", r.holevo},
        {"nuisance", r.nuisance ? nlohmann::json(*r.nuisance) : nlohmann::json(nullptr)},
        {"sld_nuisance", r.sld_nuisance ? nlohmann::json(*r.sld_nuisance) : nlohmann::json(nullptr)},
        {"argmin_P", matrix_json(r.argmin_P)},
        {"V_opt", matrix_json(r.V_opt)},
        {"diagnostics",
         {{"restarts", r.diagnostics.restarts},
          {"evaluations", r.diagnostics.evaluations},
          {"free_parameters", r.diagnostics.free_parameters},
          {"converged", r.diagnostics.converged},
          {"stable", r.diagnostics.stable},
          {"restart_values", r.diagnostics.restart_values}}},
    };
    return out;
}

GaussianModel parse_gaussian(const nlohmann::json& j) {
    for (const char* key : {"dC", "dQ", "Gamma_re"})
        if (!j.contains(key)) throw ValidationError(std::string("gaussian: missing '") + key + "'");
    GaussianModel g;
    g.d_c = j["dC"].get<int>();
    g.d_q = j["dQ"].get<int>();
    const RMat re = matrix_from_json(j["Gamma_re"]);
    const RMat im = j.contains("Gamma_im") ? matrix_from_json(j["Gamma_im"]) : RMat::Zero(re.rows(), re.cols());
    if (re.rows() != im.rows() || re.cols() != im.cols()) throw ValidationError("gaussian: Gamma_re and Gamma_im differ in shape");
    g.gamma = re.cast<cplx>() + cplx(0.0, 1.0) * im.cast<cplx>();
    g.t = j.contains("T") ? matrix_from_json(j["T"]) : RMat::Identity(re.rows(), re.rows());
    validate_gaussian(g);
    return g;
}

nlohmann::json to_json(const GaussianModel& g) {
    return {{"dC", g.d_c},
            {"dQ", g.d_q},
            {"Gamma_re", matrix_json(g.gamma.real())},
            {"Gamma_im", matrix_json(g.gamma.imag())},
            {"T", matrix_json(g.t)}};
}

nlohmann::json to_json(const CanonicalForm& c) {
    std::vector<double> nu(c.symplectic.data(), c.symplectic.data() + c.symplectic.size());
    std::vector<double> th(c.thermal.data(), c.thermal.data() + c.thermal.size());
    return {{"dC", c.d_c}, {"dQ", c.d_q}, {"T", matrix_json(c.T)}, {"classical", matrix_json(c.classical)},
            {"symplectic", nu}, {"thermal", th}};
}

CsvTable simulation_table(const SimulationRun& run) {
    CsvTable t;
    t.kind = "simulation";
    t.meta = {{"seed", std::to_string(run.seed)},
              {"n", std::to_string(run.n)},
              {"trials", std::to_string(run.trials)},
              {"local_copies", std::to_string(run.local_copies)},
              {"mean", format_double(run.mean)},
              {"n_mse", format_double(run.n_mse)},
              {"n_mse_se", format_double(run.n_mse_se)},
              {"fallback_frequency", format_double(run.fallback_frequency)}};
    for (size_t i = 0; i < run.tail_levels.size(); ++i)
        t.meta.emplace_back("tail_c" + format_double(run.tail_levels[i]), format_double(run.tail_frequencies[i]));
    t.columns = {"trial", "rescaled", "fallback"};
    for (size_t i = 0; i < run.rescaled.size(); ++i)
        t.rows.push_back({static_cast<double>(i), run.rescaled[i], static_cast<double>(run.fallback[i])});
    return t;
}

nlohmann::json to_json(const TailEstimate& t) {
    return {{"probability", t.probability},
            {"standard_error", t.standard_error},
            {"samples", t.samples},
            {"closed_form", t.closed_form ? nlohmann::json(*t.closed_form) : nlohmann::json(nullptr)},
            {"covariance", matrix_json(t.covariance)}};
}

}  // namespace qbound
