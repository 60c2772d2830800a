#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "qbound/bounds.hpp"
#include "qbound/estimate.hpp"
#include "qbound/gaussian.hpp"
#include "qbound/models.hpp"

namespace qbound {

inline constexpr int kCsvVersion = 1;

/// Versioned CSV: "# qbound-csv v1 <kind>", "# key=value" metadata lines, a column line, numeric rows.
struct CsvTable {
    std::string kind;
    std::vector<std::pair<std::string, std::string>> meta;
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
};

void write_csv(std::ostream& os, const CsvTable& table);
CsvTable parse_csv(std::istream& is);
/// Shortest decimal text that reads back to the same double.
std::string format_double(double v);

struct ModelSpec {
    std::string name;
    Constants constants;
    std::vector<double> point;
};

ModelSpec parse_model_spec(const nlohmann::json& j);
nlohmann::json to_json(const ModelSpec& model);

/// "k=v,k2=v1:v2" with ':' separating vector entries.
Constants parse_constants(const std::string& text);
std::vector<double> parse_number_list(const std::string& text, char sep = ',');

/// "identity", "diag:w1,w2,..." or "file:path" (whitespace or comma separated rows).
RMat parse_weight(const std::string& text, Eigen::Index k);

struct GridAxis {
    std::string param;
    double lo = 0.0;
    double hi = 0.0;
    int steps = 1;
    double value(int i) const { return steps == 1 ? lo : lo + (hi - lo) * i / (steps - 1); }
};

/// "param:lo:hi:steps".
GridAxis parse_grid(const std::string& text);

nlohmann::json matrix_json(const RMat& m);
RMat matrix_from_json(const nlohmann::json& j);

nlohmann::json to_json(const BoundReport& report);

/// {"dC", "dQ", "Gamma_re", "Gamma_im", "T"}.
GaussianModel parse_gaussian(const nlohmann::json& j);
nlohmann::json to_json(const GaussianModel& g);
nlohmann::json to_json(const CanonicalForm& c);

CsvTable simulation_table(const SimulationRun& run);
nlohmann::json to_json(const TailEstimate& t);

}  // namespace qbound
