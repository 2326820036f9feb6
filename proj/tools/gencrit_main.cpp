// gencrit: find and certify critical points of a functional restricted to an
// equality constraint whose Jacobian may be rank-deficient.

#include <gencrit/gencrit.hpp>

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

using namespace gencrit;

constexpr int kExitOk = 0;
constexpr int kExitSuiteFailure = 1;
constexpr int kExitInputError = 2;
constexpr int kExitDomainError = 3;
constexpr int kExitNoConvergence = 4;

struct CommonOpts {
    std::string out_path;
    bool timings = false;
};

double elapsed_ms(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
        .count();
}

Vec parse_point(const std::string& text, int expected_dim) {
    std::vector<double> vals;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            vals.push_back(std::stod(item, &used));
            while (used < item.size() && std::isspace(static_cast<unsigned char>(item[used])))
                ++used;
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw InputError("cannot parse coordinate '" + item + "'");
        }
    }
    if (static_cast<int>(vals.size()) != expected_dim)
        throw InputError("point has " + std::to_string(vals.size()) + " coordinates, problem needs " +
                         std::to_string(expected_dim));
    return Eigen::Map<const Vec>(vals.data(), static_cast<Index>(vals.size()));
}

void write_out(const CommonOpts& opts, const JsonBuilder& jb) {
    if (opts.out_path.empty()) return;
    std::ofstream out(opts.out_path, std::ios::binary);
    if (!out) throw InputError("cannot open output path '" + opts.out_path + "'");
    out << jb.str() << "\n";
}

void begin_report(JsonBuilder& jb, const std::string& command,
                  const std::vector<std::pair<std::string, std::string>>& args) {
    jb.begin_object();
    jb.key("schema").value(kReportSchema);
    jb.key("tool").value("gencrit");
    jb.key("version").value(kToolVersion);
    jb.key("command").value(command);
    jb.key("arguments").begin_object();
    for (const auto& [k, v] : args) jb.key(k).value(v);
    jb.end_object();
}

void write_problem_echo(JsonBuilder& jb, const ProblemFile& pf) {
    jb.key("problem").begin_object();
    jb.key("n").value(pf.n);
    jb.key("m").value(pf.m);
    jb.key("f").value(pf.f_src);
    jb.key("g").begin_array();
    for (const auto& s : pf.g_src) jb.value(s);
    jb.end_array();
    jb.key("y0").begin_array();
    for (double v : pf.y0) jb.value(v);
    jb.end_array();
    jb.end_object();
}

void finish_report(JsonBuilder& jb, const CommonOpts& opts, double ms) {
    if (opts.timings) {
        jb.key("timings").begin_object();
        jb.key("total_ms").value(ms);
        jb.end_object();
    }
    jb.end_object();
}

/// Writes an error report (when --out was given) and picks the exit code for
/// a failure that surfaced as an exception.
int fail(const CommonOpts& opts, const std::string& command,
         const std::vector<std::pair<std::string, std::string>>& args, const std::string& type,
         const std::string& message, int code) {
    JsonBuilder jb;
    begin_report(jb, command, args);
    jb.key("error").begin_object();
    jb.key("type").value(type);
    jb.key("message").value(message);
    jb.end_object();
    jb.end_object();
    try {
        write_out(opts, jb);
    } catch (const InputError&) {
        // Failing to write the failure report must not mask the original error.
    }
    std::cerr << "error (" << type << "): " << message << "\n";
    return code;
}

int run_classify(const std::string& file, const std::string& at, int probes, double radius,
                 std::uint64_t seed, bool seed_given, const CommonOpts& opts) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::vector<std::pair<std::string, std::string>> args = {
        {"file", file},
        {"at", at},
        {"probes", std::to_string(probes)},
        {"radius", json_real(radius)},
        {"seed", std::to_string(seed)}};
    CommonOpts o = opts;
    try {
        const ProblemFile pf = load_problem_file(file);
        const Problem p = to_problem(pf);
        const Vec x = parse_point(at, p.n);
        const std::uint64_t effective_seed = seed_given ? seed : pf.seed;
        const RegularityReport rep = classify(p, x, pf.tolerances, probes, radius, effective_seed);

        JsonBuilder jb;
        begin_report(jb, "classify", args);
        write_problem_echo(jb, pf);
        jb.key("classify");
        write_classification(jb, rep);
        finish_report(jb, o, elapsed_ms(t0));
        write_out(o, jb);

        std::cout << "point: " << at << "\n"
                  << "on_constraint: " << (rep.on_constraint ? "yes" : "no") << "\n"
                  << "rank(g'(x)): " << rep.rank << " of m = " << p.m << "\n"
                  << "regular: " << (rep.regular ? "yes" : "no") << "\n"
                  << "generalized_regular: "
                  << (rep.verdict == GenRegVerdict::Confirmed ? "confirmed"
                      : rep.verdict == GenRegVerdict::Refuted ? "refuted"
                                                              : "unknown")
                  << "\n"
                  << "tangent_dim: " << rep.tangent_basis.count() << "\n";
        std::cout << "elapsed_ms: " << elapsed_ms(t0) << "\n";
        return kExitOk;
    } catch (const InputError& e) {
        return fail(o, "classify", args, "InputError", e.what(), kExitInputError);
    } catch (const DomainError& e) {
        return fail(o, "classify", args, "DomainError", e.what(), kExitDomainError);
    } catch (const Error& e) {
        return fail(o, "classify", args, "Error", e.what(), kExitInputError);
    }
}

int run_solve(const std::string& file, const std::optional<std::string>& start_text,
              int max_iter, std::optional<double> tol_override, const CommonOpts& opts) {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<std::pair<std::string, std::string>> args = {
        {"file", file}, {"max_iter", std::to_string(max_iter)}};
    if (start_text) args.push_back({"start", *start_text});
    if (tol_override) args.push_back({"tol", json_real(*tol_override)});
    CommonOpts o = opts;
    try {
        const ProblemFile pf = load_problem_file(file);
        const Problem p = to_problem(pf);
        Tolerances tol = pf.tolerances;
        if (tol_override) {
            tol.residual_abs = *tol_override;
            tol.validate();
        }
        Vec x0;
        if (start_text) {
            x0 = parse_point(*start_text, p.n);
        } else if (pf.x_init) {
            x0 = Eigen::Map<const Vec>(pf.x_init->data(),
                                       static_cast<Index>(pf.x_init->size()));
        } else {
            throw InputError("no starting point: provide --start or x_init in the problem file");
        }

        const SolveResult sr = solve(p, x0, tol, max_iter);

        JsonBuilder jb;
        begin_report(jb, "solve", args);
        write_problem_echo(jb, pf);
        jb.key("solve").begin_object();
        jb.key("status").value(sr.status == SolveStatus::Converged ? "converged"
                                                                   : "max_iter_exceeded");
        jb.key("iterations").value(sr.iterations);
        jb.key("start").value(x0);
        jb.end_object();
        jb.key("check");
        write_check(jb, sr.check);

        bool wrote_certificate = false;
        std::string cert_note;
        if (sr.status == SolveStatus::Converged) {
            try {
                const MultiplierCertificate cert = certify_multiplier(p, sr.check.point, tol);
                jb.key("certificate");
                write_certificate(jb, cert);
                wrote_certificate = true;
                cert_note = cert.kind == CertificateKind::UniqueRegular
                                ? "unique_regular, L = " + json_real(cert.L(0))
                                : "ill_posed, gap = " + json_real(cert.gap.value_or(0.0));
            } catch (const ZeroGradient& e) {
                jb.key("certificate_error").value(e.what());
                cert_note = std::string("not produced: ") + e.what();
            }
        }
        finish_report(jb, o, elapsed_ms(t0));
        write_out(o, jb);

        std::cout << "status: "
                  << (sr.status == SolveStatus::Converged ? "converged" : "max_iter_exceeded")
                  << " after " << sr.iterations << " iterations\n"
                  << "point:";
        for (Index i = 0; i < sr.check.point.size(); ++i)
            std::cout << " " << json_real(sr.check.point(i));
        std::cout << "\nconstraint_residual: " << json_real(sr.check.constraint_residual)
                  << "\ntangent_residual: " << json_real(sr.check.tangent_residual) << "\n";
        if (wrote_certificate || !cert_note.empty())
            std::cout << "certificate: " << cert_note << "\n";
        std::cout << "elapsed_ms: " << elapsed_ms(t0) << "\n";
        return sr.status == SolveStatus::Converged ? kExitOk : kExitNoConvergence;
    } catch (const InputError& e) {
        return fail(o, "solve", args, "InputError", e.what(), kExitInputError);
    } catch (const DomainError& e) {
        return fail(o, "solve", args, "DomainError", e.what(), kExitDomainError);
    } catch (const SingularStep& e) {
        return fail(o, "solve", args, "SingularStep", e.what(), kExitNoConvergence);
    } catch (const Error& e) {
        return fail(o, "solve", args, "Error", e.what(), kExitInputError);
    }
}

int run_certify(const std::string& file, const std::string& at, const CommonOpts& opts) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::vector<std::pair<std::string, std::string>> args = {{"file", file}, {"at", at}};
    CommonOpts o = opts;
    try {
        const ProblemFile pf = load_problem_file(file);
        const Problem p = to_problem(pf);
        const Vec x = parse_point(at, p.n);

        const StationarityCheck sc = check(p, x, pf.tolerances);
        JsonBuilder jb;
        begin_report(jb, "certify", args);
        write_problem_echo(jb, pf);
        jb.key("check");
        write_check(jb, sc);

        if (!sc.is_critical) {
            jb.key("certificate_error")
                .value("point is not critical at the configured tolerances");
            finish_report(jb, o, elapsed_ms(t0));
            write_out(o, jb);
            std::cout << "point is not critical: residuals ("
                      << json_real(sc.constraint_residual) << ", "
                      << json_real(sc.tangent_residual) << ")\n";
            return kExitNoConvergence;
        }

        const MultiplierCertificate cert = certify_multiplier(p, x, pf.tolerances);
        jb.key("certificate");
        write_certificate(jb, cert);
        finish_report(jb, o, elapsed_ms(t0));
        write_out(o, jb);

        if (cert.kind == CertificateKind::UniqueRegular) {
            std::cout << "certificate: unique_regular\nL:";
            for (Index i = 0; i < cert.L.size(); ++i) std::cout << " " << json_real(cert.L(i));
            std::cout << "\n";
        } else {
            std::cout << "certificate: ill_posed\ngap: " << json_real(cert.gap.value_or(0.0))
                      << "\n";
        }
        std::cout << "elapsed_ms: " << elapsed_ms(t0) << "\n";
        return kExitOk;
    } catch (const InputError& e) {
        return fail(o, "certify", args, "InputError", e.what(), kExitInputError);
    } catch (const ZeroGradient& e) {
        return fail(o, "certify", args, "ZeroGradient", e.what(), kExitDomainError);
    } catch (const DomainError& e) {
        return fail(o, "certify", args, "DomainError", e.what(), kExitDomainError);
    } catch (const NotCritical& e) {
        return fail(o, "certify", args, "NotCritical", e.what(), kExitNoConvergence);
    } catch (const Error& e) {
        return fail(o, "certify", args, "Error", e.what(), kExitInputError);
    }
}

int run_paper_suite_cmd(const CommonOpts& opts) {
    const auto t0 = std::chrono::steady_clock::now();
    CommonOpts o = opts;
    const std::vector<FixtureResult> results = run_paper_suite();
    bool all_pass = true;

    std::printf("%-34s %-6s %s\n", "fixture", "result", "detail");
    for (const FixtureResult& fx : results) {
        all_pass = all_pass && fx.pass;
        std::printf("%-34s %-6s %s\n", fx.name.c_str(), fx.pass ? "PASS" : "FAIL",
                    fx.detail.c_str());
    }
    std::printf("%d/%zu fixtures passed\n", static_cast<int>(std::count_if(
                                                results.begin(), results.end(),
                                                [](const FixtureResult& f) { return f.pass; })),
                results.size());

    JsonBuilder jb;
    begin_report(jb, "paper-suite", {});
    jb.key("fixtures").begin_array();
    for (const FixtureResult& fx : results) {
        jb.begin_object();
        jb.key("name").value(fx.name);
        jb.key("pass").value(fx.pass);
        jb.key("detail").value(fx.detail);
        jb.end_object();
    }
    jb.end_array();
    jb.key("all_pass").value(all_pass);
    finish_report(jb, o, elapsed_ms(t0));
    try {
        write_out(o, jb);
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInputError;
    }
    std::cout << "elapsed_ms: " << elapsed_ms(t0) << "\n";
    return all_pass ? kExitOk : kExitSuiteFailure;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"critical points under possibly rank-deficient equality constraints"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kToolVersion));

    std::string file, at, start;
    int probes = 64;
    double radius = 1e-3;
    std::uint64_t seed = 0;
    int max_iter = 100;
    double tol_override = 0.0;
    CommonOpts opts;

    auto add_common = [&opts](CLI::App* cmd) {
        cmd->add_option("--out", opts.out_path, "write the full JSON report to this path");
        cmd->add_flag("--timings", opts.timings, "include wall-clock timings in the JSON report");
    };

    CLI::App* classify_cmd =
        app.add_subcommand("classify", "feasibility, rank and regularity at a point");
    classify_cmd->add_option("file", file, "problem JSON file")->required();
    CLI::Option* at_opt_c =
        classify_cmd->add_option("--at", at, "point, comma-separated coordinates")->required();
    classify_cmd->add_option("--probes", probes, "sample count for the neighborhood verdict");
    classify_cmd->add_option("--radius", radius, "probe ball radius");
    CLI::Option* seed_opt = classify_cmd->add_option("--seed", seed, "probe direction seed");
    add_common(classify_cmd);

    CLI::App* solve_cmd =
        app.add_subcommand("solve", "find a critical point and certify its multiplier");
    solve_cmd->add_option("file", file, "problem JSON file")->required();
    CLI::Option* start_opt =
        solve_cmd->add_option("--start", start, "starting point, comma-separated");
    solve_cmd->add_option("--max-iter", max_iter, "iteration budget");
    CLI::Option* tol_opt =
        solve_cmd->add_option("--tol", tol_override, "override the residual tolerance");
    add_common(solve_cmd);

    CLI::App* certify_cmd =
        app.add_subcommand("certify", "multiplier certificate at a given critical point");
    certify_cmd->add_option("file", file, "problem JSON file")->required();
    certify_cmd->add_option("--at", at, "point, comma-separated coordinates")->required();
    add_common(certify_cmd);

    CLI::App* suite_cmd =
        app.add_subcommand("paper-suite", "run the bundled worked-example fixtures");
    add_common(suite_cmd);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitInputError;
    }

    if (classify_cmd->parsed()) {
        (void)at_opt_c;
        return run_classify(file, at, probes, radius, seed, seed_opt->count() > 0, opts);
    }
    if (solve_cmd->parsed()) {
        std::optional<std::string> start_text;
        if (start_opt->count() > 0) start_text = start;
        std::optional<double> tol_value;
        if (tol_opt->count() > 0) tol_value = tol_override;
        return run_solve(file, start_text, max_iter, tol_value, opts);
    }
    if (certify_cmd->parsed()) return run_certify(file, at, opts);
    if (suite_cmd->parsed()) return run_paper_suite_cmd(opts);
    return kExitInputError;
}
