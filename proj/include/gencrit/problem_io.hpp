#pragma once

#include <gencrit/exprdsl.hpp>
#include <gencrit/geometry.hpp>
#include <gencrit/types.hpp>

#include <json.hpp>

#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace gencrit {

/// Anything wrong with user-provided input: unreadable file, malformed JSON,
/// schema violations, expression syntax errors, dimension mismatches.
struct InputError : Error {
    using Error::Error;
};

/// On-disk description of a Problem plus run parameters.
struct ProblemFile {
    int n = 0;
    int m = 0;
    std::string f_src;
    std::vector<std::string> g_src;
    std::vector<double> y0;
    std::optional<std::vector<double>> x_init;
    Tolerances tolerances;
    std::uint64_t seed = 0;
};

namespace detail {

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw InputError(msg);
}

}  // namespace detail

inline ProblemFile parse_problem_json(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw InputError("problem file: " + std::string(e.what()));
    }
    detail::require(doc.is_object(), "problem file: top level must be a JSON object");
    if (doc.contains("schema"))
        detail::require(doc["schema"] == "gencrit-problem/1",
                        "problem file: unsupported schema '" +
                            doc["schema"].dump() + "'");

    ProblemFile pf;
    detail::require(doc.contains("n") && doc["n"].is_number_integer(),
                    "problem file: missing integer field 'n'");
    detail::require(doc.contains("m") && doc["m"].is_number_integer(),
                    "problem file: missing integer field 'm'");
    pf.n = doc["n"].get<int>();
    pf.m = doc["m"].get<int>();
    detail::require(pf.n >= 1 && pf.m >= 1, "problem file: n and m must be >= 1");

    detail::require(doc.contains("f") && doc["f"].is_string(),
                    "problem file: missing string field 'f'");
    pf.f_src = doc["f"].get<std::string>();

    detail::require(doc.contains("g") && doc["g"].is_array(),
                    "problem file: missing array field 'g'");
    for (const auto& item : doc["g"]) {
        detail::require(item.is_string(), "problem file: 'g' entries must be strings");
        pf.g_src.push_back(item.get<std::string>());
    }
    detail::require(static_cast<int>(pf.g_src.size()) == pf.m,
                    "problem file: 'g' must have exactly m entries");

    detail::require(doc.contains("y0") && doc["y0"].is_array(),
                    "problem file: missing array field 'y0'");
    for (const auto& item : doc["y0"]) {
        detail::require(item.is_number(), "problem file: 'y0' entries must be numbers");
        pf.y0.push_back(item.get<double>());
    }
    detail::require(static_cast<int>(pf.y0.size()) == pf.m,
                    "problem file: 'y0' must have exactly m entries");

    if (doc.contains("x_init")) {
        detail::require(doc["x_init"].is_array(), "problem file: 'x_init' must be an array");
        std::vector<double> start;
        for (const auto& item : doc["x_init"]) {
            detail::require(item.is_number(), "problem file: 'x_init' entries must be numbers");
            start.push_back(item.get<double>());
        }
        detail::require(static_cast<int>(start.size()) == pf.n,
                        "problem file: 'x_init' must have exactly n entries");
        pf.x_init = std::move(start);
    }

    if (doc.contains("tolerances")) {
        const auto& t = doc["tolerances"];
        detail::require(t.is_object(), "problem file: 'tolerances' must be an object");
        if (t.contains("rank_rel")) pf.tolerances.rank_rel = t["rank_rel"].get<double>();
        if (t.contains("residual_abs"))
            pf.tolerances.residual_abs = t["residual_abs"].get<double>();
        if (t.contains("ortho")) pf.tolerances.ortho = t["ortho"].get<double>();
        try {
            pf.tolerances.validate();
        } catch (const std::invalid_argument& e) {
            throw InputError(std::string("problem file: ") + e.what());
        }
    }

    if (doc.contains("seed")) {
        detail::require(doc["seed"].is_number_integer() && doc["seed"].get<std::int64_t>() >= 0,
                        "problem file: 'seed' must be a non-negative integer");
        pf.seed = doc["seed"].get<std::uint64_t>();
    }
    return pf;
}

inline ProblemFile load_problem_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open problem file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_problem_json(buf.str());
}

/// Compile the expression sources into a validated Problem. Expression
/// errors are reported with the offending field and byte offset.
inline Problem to_problem(const ProblemFile& pf) {
    Problem p;
    p.n = pf.n;
    p.m = pf.m;
    try {
        p.f = parse(pf.f_src, pf.n);
    } catch (const Error& e) {
        throw InputError("field 'f': " + std::string(e.what()));
    }
    for (std::size_t i = 0; i < pf.g_src.size(); ++i) {
        try {
            p.g.push_back(parse(pf.g_src[i], pf.n));
        } catch (const Error& e) {
            throw InputError("field 'g[" + std::to_string(i) + "]': " + std::string(e.what()));
        }
    }
    p.y0 = Eigen::Map<const Vec>(pf.y0.data(), static_cast<Index>(pf.y0.size()));
    p.validate();
    return p;
}

}  // namespace gencrit
