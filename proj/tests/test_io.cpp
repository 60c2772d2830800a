#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "qbound/errors.hpp"
#include "qbound/io.hpp"
#include "test_support.hpp"

using namespace qbound;
using qbound::testing::Gen;
using qbound::testing::max_abs;

TEST_CASE("format_double round trips") {
    CHECK(format_double(0.5) == "0.5");
    CHECK(format_double(1.0) == "1");
    CHECK(format_double(0.1) == "0.1");
    Gen gen(61);
    for (int i = 0; i < 1000; ++i) {
        const double v = gen.normal() * std::pow(10.0, gen.integer(-20, 20));
        CHECK(std::strtod(format_double(v).c_str(), nullptr) == v);
    }
    CHECK(std::strtod(format_double(std::numeric_limits<double>::denorm_min()).c_str(), nullptr) ==
          std::numeric_limits<double>::denorm_min());
}

TEST_CASE("CSV round trip") {
    Gen gen(62);
    CsvTable t;
    t.kind = "sweep";
    t.meta = {{"model", "two_observables"}, {"seed", "7"}};
    t.columns = {"x", "sld", "holevo"};
    for (int i = 0; i < 20; ++i) t.rows.push_back({gen.normal(), gen.normal() * 1e-9, gen.normal() * 1e12});
    std::stringstream ss;
    write_csv(ss, t);
    const CsvTable back = parse_csv(ss);
    CHECK(back.kind == t.kind);
    CHECK(back.meta == t.meta);
    CHECK(back.columns == t.columns);
    CHECK(back.rows == t.rows);

    std::stringstream again;
    write_csv(again, back);
    std::stringstream first;
    write_csv(first, t);
    CHECK(again.str() == first.str());
}

TEST_CASE("CSV parser rejects malformed input") {
    const auto parse = [](const std::string& text) {
        std::istringstream is(text);
        return parse_csv(is);
    };
    CHECK_THROWS_AS(parse(""), ValidationError);
    CHECK_THROWS_AS(parse("a,b\n1,2\n"), ValidationError);
    CHECK_THROWS_AS(parse("# qbound-csv v2 sweep\na\n1\n"), ValidationError);
    CHECK_THROWS_AS(parse("# qbound-csv v1 sweep\n# novalue\na\n1\n"), ValidationError);
    CHECK_THROWS_AS(parse("# qbound-csv v1 sweep\na,b\n1\n"), ValidationError);
    CHECK_THROWS_AS(parse("# qbound-csv v1 sweep\na\nx\n"), ValidationError);
    CHECK_THROWS_AS(parse("# qbound-csv v1 sweep\n"), ValidationError);
    CHECK(parse("# qbound-csv v1 sweep\na,b\n").rows.empty());
}

TEST_CASE("parse_constants and parse_number_list") {
    const Constants c = parse_constants("s=0.3,a=1:0:0.5, d = 3");
    CHECK(c.at("s") == std::vector<double>{0.3});
    CHECK(c.at("a") == std::vector<double>{1.0, 0.0, 0.5});
    CHECK(c.at("d") == std::vector<double>{3.0});
    CHECK(parse_constants("").empty());
    CHECK_THROWS_AS(parse_constants("s"), ValidationError);
    CHECK_THROWS_AS(parse_constants("=1"), ValidationError);
    CHECK_THROWS_AS(parse_constants("s=abc"), ValidationError);

    CHECK(parse_number_list("0.2, 0.1,-3e-2") == std::vector<double>{0.2, 0.1, -0.03});
    CHECK(parse_number_list("1:2", ':') == std::vector<double>{1.0, 2.0});
    CHECK_THROWS_AS(parse_number_list("1,,2"), ValidationError);
    CHECK_THROWS_AS(parse_number_list("1,2x"), ValidationError);
}

TEST_CASE("parse_weight") {
    CHECK(max_abs(parse_weight("identity", 3) - RMat::Identity(3, 3)) == 0.0);
    const RMat d = parse_weight("diag:1,2", 2);
    CHECK(d(0, 0) == 1.0);
    CHECK(d(1, 1) == 2.0);
    CHECK(d(0, 1) == 0.0);
    CHECK_THROWS_AS(parse_weight("diag:1,2,3", 2), ValidationError);
    CHECK_THROWS_AS(parse_weight("eye", 2), ValidationError);
    CHECK_THROWS_AS(parse_weight("file:/nonexistent/qbound_weight.txt", 2), ValidationError);

    const std::string path = "qbound_test_weight.txt";
    {
        std::ofstream f(path);
        f << "2 0.5\n0.5, 1\n";
    }
    const RMat w = parse_weight("file:" + path, 2);
    RMat expect(2, 2);
    expect << 2.0, 0.5, 0.5, 1.0;
    CHECK(max_abs(w - expect) < 1e-15);
    CHECK_THROWS_AS(parse_weight("file:" + path, 3), ValidationError);
    std::remove(path.c_str());
}

TEST_CASE("parse_grid") {
    const GridAxis g = parse_grid("theta:0.1:3.0:30");
    CHECK(g.param == "theta");
    CHECK(g.steps == 30);
    CHECK(g.value(0) == 0.1);
    CHECK(g.value(29) == doctest::Approx(3.0).epsilon(1e-15));
    const GridAxis one = parse_grid("z:0.5:0.9:1");
    CHECK(one.value(0) == 0.5);
    CHECK_THROWS_AS(parse_grid("theta:0:1"), ValidationError);
    CHECK_THROWS_AS(parse_grid("theta:0:1:0"), ValidationError);
    CHECK_THROWS_AS(parse_grid("theta:0:1:2.5"), ValidationError);
    CHECK_THROWS_AS(parse_grid(":0:1:3"), ValidationError);
}

TEST_CASE("matrix and model JSON") {
    Gen gen(63);
    const RMat m = gen.real_matrix(3, 2);
    CHECK(matrix_from_json(matrix_json(m)) == m);
    CHECK_THROWS_AS(matrix_from_json(nlohmann::json::parse("[[1,2],[3]]")), ValidationError);
    CHECK_THROWS_AS(matrix_from_json(nlohmann::json::parse("[[1,\"a\"]]")), ValidationError);
    CHECK_THROWS_AS(matrix_from_json(nlohmann::json::parse("3")), ValidationError);

    const auto j = nlohmann::json::parse(R"({"name": "two_observables", "constants": {"s": 0.3, "a": [1, 0, 0]},
                                             "point": [0.2, 0.1, 0.3]})");
    const ModelSpec model = parse_model_spec(j);
    CHECK(model.name == "two_observables");
    CHECK(model.constants.at("s") == std::vector<double>{0.3});
    CHECK(model.constants.at("a") == std::vector<double>{1.0, 0.0, 0.0});
    CHECK(model.point == std::vector<double>{0.2, 0.1, 0.3});
    const ModelSpec back = parse_model_spec(to_json(model));
    CHECK(back.name == model.name);
    CHECK(back.constants == model.constants);
    CHECK(back.point == model.point);
    CHECK_THROWS_AS(parse_model_spec(nlohmann::json::parse(R"({"constants": {}})")), ValidationError);
    CHECK_THROWS_AS(parse_model_spec(nlohmann::json::parse(R"({"name": "x", "constants": {"s": "a"}})")), ValidationError);
}

TEST_CASE("Gaussian model JSON") {
    const auto j = nlohmann::json::parse(R"({"dC": 1, "dQ": 1,
        "Gamma_re": [[1, 0, 0], [0, 0.8, 0], [0, 0, 0.8]],
        "Gamma_im": [[0, 0, 0], [0, 0, 0.5], [0, -0.5, 0]]})");
    const GaussianModel g = parse_gaussian(j);
    CHECK(g.d_c == 1);
    CHECK(g.d_q == 1);
    CHECK(max_abs(g.t - RMat::Identity(3, 3)) == 0.0);
    const GaussianModel back = parse_gaussian(to_json(g));
    CHECK(max_abs(back.gamma - g.gamma) == 0.0);

    auto missing = j;
    missing.erase("dQ");
    CHECK_THROWS_AS(parse_gaussian(missing), ValidationError);
    auto classical_im = j;
    classical_im["Gamma_im"] = nlohmann::json::parse("[[0, 0.1, 0], [-0.1, 0, 0.5], [0, -0.5, 0]]");
    CHECK_THROWS_AS(parse_gaussian(classical_im), ValidationError);
    auto bad_shape = j;
    bad_shape["Gamma_im"] = nlohmann::json::parse("[[0, 1], [-1, 0]]");
    CHECK_THROWS_AS(parse_gaussian(bad_shape), ValidationError);
}

TEST_CASE("simulation table") {
    SimulationRun run;
    run.seed = 9;
    run.n = 16;
    run.trials = 3;
    run.rescaled = {0.25, -1.5, 0.125};
    run.fallback = {0, 1, 0};
    run.tail_levels = {1.0};
    run.tail_frequencies = {1.0 / 3.0};
    const CsvTable t = simulation_table(run);
    CHECK(t.kind == "simulation");
    REQUIRE(t.rows.size() == 3);
    CHECK(t.rows[1] == std::vector<double>{1.0, -1.5, 1.0});
    std::stringstream ss;
    write_csv(ss, t);
    const CsvTable back = parse_csv(ss);
    CHECK(back.rows == t.rows);
    bool found = false;
    for (const auto& [k, v] : back.meta)
        if (k == "seed") found = v == "9";
    CHECK(found);
}
