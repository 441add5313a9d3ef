#pragma once

// Command-line driver. Flags are resolved into a JSON config, which is
// validated, executed and echoed into a manifest; a manifest passed back via
// --config replays the same run.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "purify/axis.hpp"
#include "purify/bellman.hpp"
#include "purify/conditions.hpp"
#include "purify/errors.hpp"
#include "purify/renyi.hpp"
#include "purify/sde.hpp"
#include "purify/version.hpp"
#include "purify/wr_analytic.hpp"

namespace purify::cli {

using nlohmann::json;

/// 64-bit FNV-1a, rendered as 16 hex digits.
inline std::string fnv1a_hex(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

/// Settings that steer where and how a run executes but not what it computes.
struct Execution {
    unsigned threads = 0;
    std::string output = "-";
    std::string manifest;
    std::string paths;
};

inline json order_to_json(const std::string& text) {
    if (text == "inf" || text == "infinity") return "inf";
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
}

inline std::optional<double> order_value(const json& j) {
    if (j.is_string() && j.get<std::string>() == "inf") return std::numeric_limits<double>::infinity();
    if (j.is_number()) return j.get<double>();
    return std::nullopt;
}

inline RenyiOrder to_order(const json& j) {
    const auto v = order_value(j);
    if (!v) throw ConfigError("order must be a number or \"inf\"");
    return std::isinf(*v) && *v > 0 ? RenyiOrder::infinity() : RenyiOrder(*v);
}

inline std::string default_format(const std::string& command) {
    return command == "scan" || command == "simulate" || command == "wr-cost" ? "csv" : "json";
}

// ---------------------------------------------------------------------------
// Validation

/// Schema and domain checks; an empty list means the config is runnable.
inline std::vector<std::string> validate(const json& config) {
    std::vector<std::string> out;
    const auto num = [&](const char* key) -> std::optional<double> {
        if (!config.contains(key) || !config[key].is_number()) {
            out.push_back(std::string("missing or non-numeric field '") + key + "'");
            return std::nullopt;
        }
        return config[key].get<double>();
    };
    const auto check_order = [&](const json& a) {
        const auto v = order_value(a);
        if (!v) {
            out.push_back("order must be a number or \"inf\"");
        } else if (!(*v > 0.0)) {
            out.push_back("order must be positive");
        }
    };
    const auto check_orders = [&](const char* key) {
        if (!config.contains(key) || !config[key].is_array()) {
            out.push_back(std::string("missing list '") + key + "'");
            return;
        }
        for (const auto& a : config[key]) check_order(a);
    };
    const auto check_impurity = [&](double L) {
        if (!(L >= 0.0)) out.push_back("impurity must be nonnegative");
        if (L > 0.5) out.push_back("impurity exceeds 1/2");
    };
    const auto check_tau = [&](double tau) {
        if (!(tau > 0.0)) out.push_back("tau must be positive");
    };
    const auto check_range = [&](const char* key) -> std::optional<Range> {
        if (!config.contains(key) || !config[key].is_string()) {
            out.push_back(std::string("missing range '") + key + "'");
            return std::nullopt;
        }
        try {
            const Range r = parse_range(config[key].get<std::string>());
            r.size();
            return r;
        } catch (const std::exception& e) {
            out.push_back(std::string(key) + ": " + e.what());
            return std::nullopt;
        }
    };
    const auto check_sim = [&]() {
        const auto dt = num("dt");
        const auto N = num("N");
        if (dt && !(*dt > 0.0)) out.push_back("dt must be positive");
        if (N && !(*N >= 1.0)) out.push_back("N must be at least 1");
        if (!config.contains("seed") || !config["seed"].is_number_unsigned()) {
            out.push_back("seed must be a nonnegative integer");
        }
    };

    if (!config.is_object() || !config.contains("command") || !config["command"].is_string()) {
        return {"config has no command"};
    }
    const std::string cmd = config["command"];
    if (!config.contains("format") || (config["format"] != "csv" && config["format"] != "json")) {
        out.push_back("format must be csv or json");
    }

    if (cmd == "scan") {
        if (const auto a = check_range("alpha"); a && a->start < 0.0) out.push_back("order must be positive");
        if (const auto L = check_range("L")) {
            if (L->start < kScanFloorL) out.push_back("L range must start at or above 1e-4");
            if (L->stop > 0.5) out.push_back("impurity exceeds 1/2");
        }
    } else if (cmd == "critical-alpha") {
        if (const auto tol = num("tolerance"); tol && !(*tol > 0.0)) out.push_back("tolerance must be positive");
    } else if (cmd == "simulate") {
        if (!config.contains("protocol") || !config["protocol"].is_string()) {
            out.push_back("missing protocol");
        } else {
            try {
                parse_protocol(config["protocol"].get<std::string>());
            } catch (const std::exception& e) {
                out.push_back(e.what());
            }
        }
        if (const auto L0 = num("L0")) check_impurity(*L0);
        check_orders("alpha");
        check_sim();
        const auto t0 = num("t0");
        const auto T = num("T");
        const auto dt = config.contains("dt") && config["dt"].is_number() ? config["dt"].get<double>() : 0.0;
        if (t0 && T) {
            if (!(*t0 >= 0.0) || !(*T > *t0)) {
                out.push_back("need 0 <= t0 < T");
            } else if (dt > 0.0) {
                try {
                    step_count(*t0, *T, dt);
                } catch (const std::exception& e) {
                    out.push_back(e.what());
                }
            }
        }
    } else if (cmd == "wr-cost") {
        check_orders("alpha");
        for (const char* key : {"L0", "tau"}) {
            if (!config.contains(key) || !config[key].is_array() || config[key].empty()) {
                out.push_back(std::string("missing list '") + key + "'");
                continue;
            }
            for (const auto& v : config[key]) {
                if (!v.is_number()) {
                    out.push_back(std::string("non-numeric entry in '") + key + "'");
                } else if (std::string(key) == "L0") {
                    check_impurity(v.get<double>());
                } else {
                    check_tau(v.get<double>());
                }
            }
        }
    } else if (cmd == "bellman") {
        if (!config.contains("source") || (config["source"] != "jacobs" && config["source"] != "wr")) {
            out.push_back("source must be jacobs or wr");
        }
        if (config.contains("alpha")) {
            check_order(config["alpha"]);
        } else {
            out.push_back("missing field 'alpha'");
        }
        if (!config.contains("prefactor") || (config["prefactor"] != "1-2L" && config["prefactor"] != "1-L")) {
            out.push_back("prefactor must be 1-2L or 1-L");
        }
        const auto Lmin = num("L_min"), Lmax = num("L_max"), tmin = num("tau_min"), tmax = num("tau_max");
        const auto nL = num("L_points"), nt = num("tau_points");
        if (Lmin) check_impurity(*Lmin);
        if (Lmax) check_impurity(*Lmax);
        if (Lmin && Lmax && !(*Lmax > *Lmin)) out.push_back("L_max must exceed L_min");
        if (tmin && !(*tmin >= 0.0)) out.push_back("tau must be nonnegative");
        if (tmin && config.value("source", "") == "wr") check_tau(*tmin);
        if (tmin && tmax && !(*tmax > *tmin)) out.push_back("tau_max must exceed tau_min");
        if ((nL && *nL < 5.0) || (nt && *nt < 5.0)) out.push_back("grids need at least 5 points per axis");
    } else if (cmd == "compare") {
        check_orders("alpha");
        if (const auto L0 = num("L0")) check_impurity(*L0);
        if (const auto tau = num("tau")) check_tau(*tau);
        if (config.value("monte_carlo", false)) {
            check_sim();
            if (!config.contains("protocols") || !config["protocols"].is_array()) {
                out.push_back("missing list 'protocols'");
            } else {
                for (const auto& p : config["protocols"]) {
                    try {
                        parse_protocol(p.get<std::string>());
                    } catch (const std::exception& e) {
                        out.push_back(e.what());
                    }
                }
            }
        }
    } else {
        out.push_back("unknown command '" + cmd + "'");
    }
    return out;
}

// ---------------------------------------------------------------------------
// Execution

inline std::vector<RenyiOrder> orders_of(const json& list) {
    std::vector<RenyiOrder> out;
    for (const auto& a : list) out.push_back(to_order(a));
    return out;
}

inline SimulationConfig simulation_of(const json& c, unsigned threads) {
    SimulationConfig s;
    s.L0 = c.value("L0", 0.5);
    s.t0 = c.value("t0", 0.0);
    s.T = c.value("T", 1.0);
    s.dt = c["dt"].get<double>();
    s.n_paths = c["N"].get<std::size_t>();
    s.seed = c["seed"].get<std::uint64_t>();
    s.threads = threads;
    return s;
}

/// Runs a validated config and returns the primary output bytes.
inline std::string execute(const json& c, const Execution& exec) {
    const std::string cmd = c["command"];
    const bool csv = c["format"] == "csv";
    std::ostringstream out;

    if (cmd == "scan") {
        const auto grid = scan_regions(parse_range(c["alpha"]), parse_range(c["L"]), exec.threads);
        if (csv) {
            write_csv(out, grid);
        } else {
            out << to_json(grid).dump(2) << '\n';
        }
    } else if (cmd == "critical-alpha") {
        CriticalSearch search;
        search.tolerance = c["tolerance"];
        const auto crit = critical_alphas(search);
        if (csv) {
            out << "alpha_lo,alpha_hi\n"
                << detail::full_precision(crit.alpha_lo) << ',' << detail::full_precision(crit.alpha_hi) << '\n';
        } else {
            out << json{{"alpha_lo", crit.alpha_lo}, {"alpha_hi", crit.alpha_hi}}.dump(2) << '\n';
        }
    } else if (cmd == "simulate") {
        auto config = simulation_of(c, exec.threads);
        config.keep_paths = !exec.paths.empty();
        const auto ens = simulate_ensemble(parse_protocol(c["protocol"]), config);
        if (!exec.paths.empty()) {
            std::ofstream paths(exec.paths, std::ios::binary);
            if (!paths) throw ConfigError("cannot open " + exec.paths);
            write_paths_csv(paths, ens);
        }
        if (csv) {
            out << "path_id,terminal_L\n";
            for (std::size_t p = 0; p < ens.n_paths; ++p) {
                out << p << ',' << detail::full_precision(ens.terminal[p]) << '\n';
            }
        } else {
            const auto orders = orders_of(c["alpha"]);
            out << summary_json(ens, orders).dump(2) << '\n';
        }
    } else if (cmd == "wr-cost") {
        const auto orders = orders_of(c["alpha"]);
        const auto L0s = c["L0"].get<std::vector<double>>();
        const auto taus = c["tau"].get<std::vector<double>>();
        if (csv) {
            write_wr_table_csv(out, orders, L0s, taus);
        } else {
            json rows = json::array();
            for (const auto& order : orders) {
                for (double L0 : L0s) {
                    for (double tau : taus) {
                        rows.push_back({{"alpha", order_json(order)},
                                        {"L0", L0},
                                        {"tau", tau},
                                        {"expected_entropy", wr_expected_entropy(order, Impurity(L0), tau)}});
                    }
                }
            }
            out << rows.dump(2) << '\n';
        }
    } else if (cmd == "bellman") {
        const auto source = c["source"] == "jacobs" ? ValueSource::jacobs_closed_form : ValueSource::wr_quadrature;
        BellmanOptions options;
        options.prefactor = c["prefactor"] == "1-L" ? DtildePrefactor::one_minus_L : DtildePrefactor::one_minus_2L;
        options.threads = exec.threads;
        const auto grid = build_value_grid(
            source, to_order(c["alpha"]),
            uniform_axis(c["L_min"].get<double>(), c["L_max"].get<double>(), c["L_points"].get<std::size_t>()),
            uniform_axis(c["tau_min"].get<double>(), c["tau_max"].get<double>(), c["tau_points"].get<std::size_t>()),
            exec.threads);
        const auto report = bellman_residual(grid, options);
        if (csv) {
            write_residual_csv(out, report);
        } else {
            out << to_json(report).dump(2) << '\n';
        }
    } else if (cmd == "compare") {
        const auto orders = orders_of(c["alpha"]);
        std::optional<SimulationConfig> mc;
        std::vector<ControlProtocol> protocols;
        if (c.value("monte_carlo", false)) {
            mc = simulation_of(c, exec.threads);
            for (const auto& p : c["protocols"]) protocols.push_back(parse_protocol(p.get<std::string>()));
        }
        const auto rows = protocol_compare(orders, Impurity(c["L0"].get<double>()), c["tau"].get<double>(), mc,
                                           protocols);
        if (csv) {
            write_comparison_csv(out, rows);
        } else {
            out << json{{"L0", c["L0"]}, {"tau", c["tau"]}, {"rows", to_json(rows)}}.dump(2) << '\n';
        }
    }
    return out.str();
}

inline json make_manifest(const json& config, const Execution& exec, const std::string& output) {
    return {{"tool", "purify"},
            {"version", kVersion},
            {"config", config},
            {"input_hash", "fnv1a64:" + fnv1a_hex(config.dump())},
            {"output_hash", "fnv1a64:" + fnv1a_hex(output)},
            {"execution", {{"threads", exec.threads}, {"output", exec.output}, {"paths", exec.paths}}}};
}

// ---------------------------------------------------------------------------
// Argument parsing

inline constexpr int kExitOk = 0;
inline constexpr int kExitDomain = 1;
inline constexpr int kExitUsage = 2;

/// Parses argv, runs the command and writes outputs. Returns the exit status.
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Optimal qubit purification toolkit: condition scans, trajectory simulation, "
                 "null-control quadrature and Bellman residual checks."};
    app.name("purify");
    app.set_version_flag("--version", std::string(kVersion));

    Execution exec;
    std::string config_path, format;
    app.add_option("--config", config_path, "Replay the config stored in a manifest (or a bare config object)")
        ->check(CLI::ExistingFile);
    app.add_option("--threads", exec.threads, "Worker threads (0 = all cores); never changes results")
        ->capture_default_str();
    app.add_option("-o,--output", exec.output, "Output file ('-' = stdout)")->capture_default_str();
    app.add_option("--manifest", exec.manifest,
                   "Manifest file (default: <output>.manifest.json, or stderr when writing to stdout)");
    app.add_option("--format", format, "csv or json (default depends on the command)")
        ->check(CLI::IsMember({"csv", "json"}));
    app.add_option("--paths", exec.paths, "simulate: also write every path as CSV (path_id,step,t,L)");
    app.require_subcommand(0, 1);

    // scan
    std::string scan_alpha = "0:50:0.01", scan_L = "1e-4:0.5:1e-3";
    auto* scan = app.add_subcommand("scan", "Local-optimality and convexity margins over an (alpha, L) grid");
    scan->add_option("--alpha", scan_alpha, "Order range start:stop:step (alpha <= 0 nodes are dropped)")
        ->capture_default_str();
    scan->add_option("--L", scan_L, "Impurity range start:stop:step, start >= 1e-4")->capture_default_str();
    scan->footer("CSV header: alpha,L,local_opt_bracket,convexity_margin,local_opt_ok,convex_ok");

    // critical-alpha
    double tolerance = 1e-6;
    auto* crit = app.add_subcommand("critical-alpha", "Orders bounding the region where both conditions hold");
    crit->add_option("--tolerance", tolerance, "Bisection tolerance")->capture_default_str();
    crit->footer("CSV header: alpha_lo,alpha_hi");

    // simulate
    std::string protocol = "jacobs";
    double L0 = 0.5, t0 = 0.0, T = 1.0, dt = 1e-3;
    std::size_t N = 100000;
    std::uint64_t seed = 0;
    std::vector<std::string> alphas{"2"};
    auto* sim = app.add_subcommand("simulate", "Euler-Maruyama ensemble of the impurity SDE");
    sim->add_option("--protocol", protocol, "jacobs, wr or constant:<u>")->capture_default_str();
    sim->add_option("--L0", L0, "Initial impurity")->capture_default_str();
    sim->add_option("--t0", t0, "Start time")->capture_default_str();
    sim->add_option("--T", T, "Final time")->capture_default_str();
    sim->add_option("--dt", dt, "Step size; must divide T - t0")->capture_default_str();
    sim->add_option("--N", N, "Number of paths")->capture_default_str();
    sim->add_option("--seed", seed, "RNG seed")->capture_default_str();
    sim->add_option("--alpha", alphas, "Orders for terminal costs in JSON output ('inf' allowed)")
        ->capture_default_str();
    sim->footer("CSV header: path_id,terminal_L");

    // wr-cost
    std::vector<std::string> wr_alphas{"0.3", "1", "2"};
    std::vector<double> wr_L0{0.375}, wr_tau{1.0};
    auto* wr = app.add_subcommand("wr-cost", "Expected Renyi entropy under u = 1 by quadrature");
    wr->add_option("--alpha", wr_alphas, "Orders ('inf' allowed)")->capture_default_str();
    wr->add_option("--L0", wr_L0, "Initial impurities")->capture_default_str();
    wr->add_option("--tau", wr_tau, "Elapsed times")->capture_default_str();
    wr->footer("CSV header: alpha,L0,tau,expected_entropy");

    // bellman
    std::string source = "wr", b_alpha = "0.3", prefactor = "1-2L";
    double L_min = 0.01, L_max = 0.49, tau_min = 0.05, tau_max = 3.0;
    std::size_t L_points = 101, tau_points = 61;
    auto* bell = app.add_subcommand("bellman", "Finite-difference Bellman residual of a value function");
    bell->add_option("--source", source, "jacobs or wr")->capture_default_str();
    bell->add_option("--alpha", b_alpha, "Order ('inf' allowed)")->capture_default_str();
    bell->add_option("--prefactor", prefactor, "Dt prefactor: 1-2L or 1-L")->capture_default_str();
    bell->add_option("--L-min", L_min)->capture_default_str();
    bell->add_option("--L-max", L_max)->capture_default_str();
    bell->add_option("--L-points", L_points)->capture_default_str();
    bell->add_option("--tau-min", tau_min)->capture_default_str();
    bell->add_option("--tau-max", tau_max)->capture_default_str();
    bell->add_option("--tau-points", tau_points)->capture_default_str();
    bell->footer("CSV header: L,tau,residual,dtilde,dtilde_sign (interior nodes)");

    // compare
    std::vector<std::string> cmp_alphas{"0.3", "2"};
    double cmp_L0 = 0.375, cmp_tau = 1.0, cmp_dt = 1e-3;
    std::size_t cmp_N = 100000;
    std::uint64_t cmp_seed = 0;
    bool monte_carlo = false;
    std::vector<std::string> cmp_protocols{"jacobs", "wr"};
    auto* cmp = app.add_subcommand("compare", "Jacobs and WR expected costs, optionally with Monte Carlo");
    cmp->add_option("--alpha", cmp_alphas, "Orders ('inf' allowed)")->capture_default_str();
    cmp->add_option("--L0", cmp_L0)->capture_default_str();
    cmp->add_option("--tau", cmp_tau)->capture_default_str();
    cmp->add_flag("--mc", monte_carlo, "Add Monte Carlo estimates");
    cmp->add_option("--protocols", cmp_protocols, "Protocols for --mc")->capture_default_str();
    cmp->add_option("--N", cmp_N)->capture_default_str();
    cmp->add_option("--dt", cmp_dt)->capture_default_str();
    cmp->add_option("--seed", cmp_seed)->capture_default_str();
    cmp->footer("CSV header: alpha,protocol,method,cost,standard_error");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::CallForVersion&) {
        out << kVersion << '\n';
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    }

    const auto orders_json = [&](const std::vector<std::string>& list) -> std::optional<json> {
        json a = json::array();
        for (const auto& s : list) {
            try {
                a.push_back(order_to_json(s));
            } catch (const std::exception&) {
                err << "error: cannot parse order '" << s << "'\n";
                return std::nullopt;
            }
        }
        return a;
    };

    json config;
    const auto subs = app.get_subcommands();
    if (!config_path.empty()) {
        if (!subs.empty() || !format.empty()) {
            err << "error: --config cannot be combined with a command or --format\n";
            return kExitUsage;
        }
        std::ifstream in(config_path);
        try {
            const json loaded = json::parse(in);
            config = loaded.contains("config") ? loaded["config"] : loaded;
        } catch (const json::exception& e) {
            err << "error: cannot read config: " << e.what() << '\n';
            return kExitUsage;
        }
    } else if (subs.empty()) {
        err << "error: a command is required\n" << app.help();
        return kExitUsage;
    } else {
        const std::string cmd = subs.front()->get_name();
        config["command"] = cmd;
        if (cmd == "scan") {
            config["alpha"] = scan_alpha;
            config["L"] = scan_L;
        } else if (cmd == "critical-alpha") {
            config["tolerance"] = tolerance;
        } else if (cmd == "simulate") {
            const auto a = orders_json(alphas);
            if (!a) return kExitUsage;
            config.update({{"protocol", protocol}, {"L0", L0}, {"t0", t0}, {"T", T}, {"dt", dt}, {"N", N},
                           {"seed", seed}, {"alpha", *a}});
        } else if (cmd == "wr-cost") {
            const auto a = orders_json(wr_alphas);
            if (!a) return kExitUsage;
            config.update({{"alpha", *a}, {"L0", wr_L0}, {"tau", wr_tau}});
        } else if (cmd == "bellman") {
            json a;
            try {
                a = order_to_json(b_alpha);
            } catch (const std::exception&) {
                err << "error: cannot parse order '" << b_alpha << "'\n";
                return kExitUsage;
            }
            config.update({{"source", source}, {"alpha", a}, {"prefactor", prefactor}, {"L_min", L_min},
                           {"L_max", L_max}, {"L_points", L_points}, {"tau_min", tau_min}, {"tau_max", tau_max},
                           {"tau_points", tau_points}});
        } else if (cmd == "compare") {
            const auto a = orders_json(cmp_alphas);
            if (!a) return kExitUsage;
            config.update({{"alpha", *a}, {"L0", cmp_L0}, {"tau", cmp_tau}, {"monte_carlo", monte_carlo}});
            if (monte_carlo) {
                config.update({{"protocols", cmp_protocols}, {"N", cmp_N}, {"dt", cmp_dt}, {"seed", cmp_seed}});
            }
        }
        config["format"] = format.empty() ? default_format(cmd) : format;
    }

    const auto diagnostics = validate(config);
    if (!diagnostics.empty()) {
        for (const auto& d : diagnostics) err << "error: " << d << '\n';
        return kExitDomain;
    }

    std::string output;
    try {
        output = execute(config, exec);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitDomain;
    }

    const std::string manifest = make_manifest(config, exec, output).dump(2) + "\n";
    if (exec.output == "-") {
        out << output;
    } else {
        std::ofstream file(exec.output, std::ios::binary);
        if (!file || !(file << output)) {
            err << "error: cannot write " << exec.output << '\n';
            return kExitDomain;
        }
    }
    const std::string manifest_path =
        !exec.manifest.empty() ? exec.manifest : (exec.output == "-" ? "" : exec.output + ".manifest.json");
    if (manifest_path.empty()) {
        err << manifest;
    } else {
        std::ofstream file(manifest_path, std::ios::binary);
        if (!file || !(file << manifest)) {
            err << "error: cannot write " << manifest_path << '\n';
            return kExitDomain;
        }
    }
    return kExitOk;
}

}  // namespace purify::cli
