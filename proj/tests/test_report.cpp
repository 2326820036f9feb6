#include <gencrit/problem_io.hpp>
#include <gencrit/report.hpp>

#include <catch2/catch_amalgamated.hpp>

#include <json.hpp>

#include <cmath>
#include <limits>

using namespace gencrit;

TEST_CASE("json_real renders 17 significant digits and round-trips") {
    CHECK(json_real(1.0 / 3.0) == "0.33333333333333331");
    CHECK(json_real(0.1) == "0.10000000000000001");
    CHECK(json_real(1.0) == "1");
    CHECK(json_real(-4.0) == "-4");
    const double values[] = {0.6, 0.8, -98.0, 1e-300, 6.02214076e23, -0.0};
    for (double v : values) {
        const double back = std::stod(json_real(v));
        CHECK(back == v);
    }
    CHECK(json_real(std::numeric_limits<double>::quiet_NaN()) == "\"NaN\"");
    CHECK(json_real(std::numeric_limits<double>::infinity()) == "\"Infinity\"");
    CHECK(json_real(-std::numeric_limits<double>::infinity()) == "\"-Infinity\"");
}

TEST_CASE("JsonBuilder emits valid JSON with insertion-ordered keys") {
    JsonBuilder jb;
    jb.begin_object();
    jb.key("zeta").value(1);
    jb.key("alpha").begin_array();
    jb.value(1.5);
    jb.value("two");
    jb.value(true);
    jb.begin_object().key("nested").value(3).end_object();
    jb.end_array();
    jb.key("text").value("quote \" backslash \\ newline \n");
    jb.end_object();

    const auto parsed = nlohmann::json::parse(jb.str());
    CHECK(parsed["zeta"] == 1);
    CHECK(parsed["alpha"][0] == 1.5);
    CHECK(parsed["alpha"][1] == "two");
    CHECK(parsed["alpha"][2] == true);
    CHECK(parsed["alpha"][3]["nested"] == 3);
    CHECK(parsed["text"] == "quote \" backslash \\ newline \n");
    // key order is insertion order
    CHECK(jb.str().find("zeta") < jb.str().find("alpha"));
}

TEST_CASE("JsonBuilder serializes vectors and matrices") {
    Vec v(2);
    v << 0.5, -1.25;
    Mat m(2, 2);
    m << 1, 2, 3, 4;
    JsonBuilder jb;
    jb.begin_object();
    jb.key("v").value(v);
    jb.key("m").value(m);
    jb.end_object();
    const auto parsed = nlohmann::json::parse(jb.str());
    CHECK(parsed["v"][1] == -1.25);
    CHECK(parsed["m"][1][0] == 3);
}

TEST_CASE("identical inputs produce identical report bytes") {
    StationarityCheck sc;
    sc.point = Vec::Constant(2, 1.0 / 3.0);
    sc.constraint_residual = 1e-12;
    sc.tangent_residual = 2e-9;
    sc.is_critical = true;

    JsonBuilder a, b;
    write_check(a, sc);
    write_check(b, sc);
    CHECK(a.str() == b.str());
}

TEST_CASE("problem files parse with validation") {
    const std::string good = R"({
        "schema": "gencrit-problem/1",
        "n": 2, "m": 1,
        "f": "(x1 - 3)^2 + (x2 - 4)^2",
        "g": ["x1^2 + x2^2"],
        "y0": [1.0],
        "x_init": [1.0, 0.0],
        "tolerances": {"residual_abs": 1e-9},
        "seed": 7
    })";
    const ProblemFile pf = parse_problem_json(good);
    CHECK(pf.n == 2);
    CHECK(pf.m == 1);
    CHECK(pf.tolerances.residual_abs == 1e-9);
    CHECK(pf.tolerances.rank_rel == 1e-10);  // untouched default
    CHECK(pf.seed == 7);
    REQUIRE(pf.x_init.has_value());
    const Problem p = to_problem(pf);
    CHECK(p.m == 1);
    CHECK(eval(p.g[0], Vec(Vec::Constant(2, 1.0))) == Catch::Approx(2.0));
}

TEST_CASE("problem file error paths") {
    CHECK_THROWS_AS(parse_problem_json("{not json"), InputError);
    CHECK_THROWS_AS(parse_problem_json("[]"), InputError);
    CHECK_THROWS_AS(parse_problem_json(R"({"n": 2, "m": 1})"), InputError);
    // g count mismatch
    CHECK_THROWS_AS(parse_problem_json(
                        R"({"n":2,"m":2,"f":"x1","g":["x1"],"y0":[0,0]})"),
                    InputError);
    // y0 length mismatch
    CHECK_THROWS_AS(parse_problem_json(
                        R"({"n":2,"m":1,"f":"x1","g":["x1"],"y0":[0,0]})"),
                    InputError);
    // x_init length mismatch
    CHECK_THROWS_AS(parse_problem_json(
                        R"({"n":2,"m":1,"f":"x1","g":["x1"],"y0":[0],"x_init":[1]})"),
                    InputError);
    // bad tolerance
    CHECK_THROWS_AS(parse_problem_json(
                        R"({"n":2,"m":1,"f":"x1","g":["x1"],"y0":[0],
                            "tolerances":{"residual_abs":-1}})"),
                    InputError);
    // unsupported schema tag
    CHECK_THROWS_AS(parse_problem_json(
                        R"({"schema":"other/9","n":2,"m":1,"f":"x1","g":["x1"],"y0":[0]})"),
                    InputError);
    CHECK_THROWS_AS(load_problem_file("/nonexistent/path.json"), InputError);
}

TEST_CASE("expression errors are wrapped as input errors with field context") {
    const std::string bad_f = R"({"n":2,"m":1,"f":"x1 +","g":["x1"],"y0":[0]})";
    try {
        to_problem(parse_problem_json(bad_f));
        FAIL("expected InputError");
    } catch (const InputError& e) {
        CHECK(std::string(e.what()).find("field 'f'") != std::string::npos);
        CHECK(std::string(e.what()).find("offset") != std::string::npos);
    }

    const std::string bad_g = R"({"n":2,"m":1,"f":"x1","g":["x9"],"y0":[0]})";
    try {
        to_problem(parse_problem_json(bad_g));
        FAIL("expected InputError");
    } catch (const InputError& e) {
        CHECK(std::string(e.what()).find("g[0]") != std::string::npos);
    }
}

TEST_CASE("classification report covers all verdicts") {
    RegularityReport rep;
    rep.point = Vec::Zero(2);
    rep.on_constraint = true;
    rep.rank = 1;
    rep.regular = false;
    rep.tangent_basis = SubspaceBasis(Mat::Identity(2, 1));

    rep.verdict = GenRegVerdict::Confirmed;
    rep.samples = 64;
    JsonBuilder confirmed;
    write_classification(confirmed, rep);
    CHECK(nlohmann::json::parse(confirmed.str())["generalized_regular"]["verdict"] ==
          "confirmed");

    rep.verdict = GenRegVerdict::Refuted;
    rep.refuted_witness = Vec::Constant(2, 0.5);
    JsonBuilder refuted;
    write_classification(refuted, rep);
    const auto parsed = nlohmann::json::parse(refuted.str());
    CHECK(parsed["generalized_regular"]["verdict"] == "refuted");
    CHECK(parsed["generalized_regular"]["witness"][0] == 0.5);

    rep.verdict = GenRegVerdict::Unknown;
    JsonBuilder unknown;
    write_classification(unknown, rep);
    CHECK(nlohmann::json::parse(unknown.str())["generalized_regular"]["verdict"] == "unknown");
}

TEST_CASE("certificate report for both kinds") {
    MultiplierCertificate cert;
    cert.kind = CertificateKind::UniqueRegular;
    cert.L = Vec::Constant(1, -4.0);
    JsonBuilder regular;
    write_certificate(regular, cert);
    auto parsed = nlohmann::json::parse(regular.str());
    CHECK(parsed["kind"] == "unique_regular");
    CHECK(parsed["L"][0] == -4.0);
    CHECK_FALSE(parsed.contains("L1"));

    cert.kind = CertificateKind::IllPosed;
    cert.L1 = Vec::Zero(3);
    cert.witness = Vec::Constant(3, 14.0);
    cert.gap = 1.0;
    JsonBuilder illposed;
    write_certificate(illposed, cert);
    parsed = nlohmann::json::parse(illposed.str());
    CHECK(parsed["kind"] == "ill_posed");
    CHECK(parsed["gap"] == 1.0);
    CHECK(parsed["witness"][2] == 14.0);
}
