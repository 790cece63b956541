#include "app.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "runmax/errors.hpp"
#include "runmax/lipschitz.hpp"

#ifndef RUNMAX_VERSION
#define RUNMAX_VERSION "0.0.0"
#endif

namespace runmax::app {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

double now_seconds() {
    using clock = std::chrono::steady_clock;
    return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

const char* version() { return RUNMAX_VERSION; }

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

void RunReport::check(const std::string& name, double margin, const std::string& detail) {
    checks.push_back({name, margin >= 0.0 ? "pass" : "fail", margin, detail});
}

void RunReport::skip(const std::string& name, const std::string& why) {
    checks.push_back({name, "skipped", std::nan(""), why});
}

bool RunReport::any_failed() const {
    for (const auto& c : checks)
        if (c.status == "fail") return true;
    return false;
}

json RunReport::to_json() const {
    json j;
    j["command"] = command;
    j["config_hash"] = config_hash;
    j["version"] = version;
    j["timings"] = json::object();
    for (const auto& [k, v] : timings) j["timings"][k] = v;
    j["checks"] = json::array();
    for (const auto& c : checks)
        j["checks"].push_back({{"name", c.name}, {"status", c.status}, {"margin", number(c.margin)},
                               {"detail", c.detail}});
    j["artifacts"] = artifacts;
    j["warnings"] = warnings;
    j["results"] = results;
    if (!error.empty()) j["error"] = error;
    j["exit_code"] = exit_code;
    return j;
}

std::ofstream Context::open_csv(const std::string& name) const {
    fs::path p = out_dir / name;
    std::ofstream os(p);
    if (!os) throw ConfigError("cannot write " + p.string());
    os << "# runmax " << version() << "\n";
    report->artifacts.push_back(p.string());
    return os;
}

std::ofstream Context::open_json(const std::string& name) const {
    fs::path p = out_dir / name;
    std::ofstream os(p);
    if (!os) throw ConfigError("cannot write " + p.string());
    report->artifacts.push_back(p.string());
    return os;
}

Timer::Timer(RunReport& report, std::string name) : report_(report), name_(std::move(name)), start_(now_seconds()) {}
Timer::~Timer() { report_.timings.emplace_back(name_, now_seconds() - start_); }

void discount_check(Context& ctx) {
    const auto& cfg = ctx.cfg;
    if (cfg.dynamics != "sir") return;
    LipschitzProfile profile;
    {
        Timer t(*ctx.report, "lipschitz_profile");
        profile = sir_lipschitz_profile(cfg.model, cfg.grid.u_levels, cfg.grid.si_side, cfg.grid.x_nodes);
    }
    const auto& p = cfg.model.params;
    DiscountCheck dc = check_discount(p.h, p.lambda, profile, cfg.model.claims, ctx.strict_h);
    ctx.report->results["discount"] = {{"h", dc.h},
                                       {"required", dc.required},
                                       {"moment_bound", dc.moment_bound},
                                       {"lipschitz_bound", dc.lipschitz_bound},
                                       {"ok", dc.ok},
                                       {"strict", ctx.strict_h}};
    if (!dc.ok) ctx.report->warnings.push_back(dc.message);
}

int run(int argc, char** argv, std::ostream& out, std::ostream& err) {
    CLI::App cli{"Running-maximum risk values for a firewalled SIR insurance model"};
    cli.require_subcommand(1);
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out_dir;
    bool strict_h = false;
    bool plot = false;
    cli.add_option("--config", config_path, "scenario JSON file")->required();
    cli.add_option("--seed", seed, "override run.seed");
    cli.add_option("--out", out_dir, "override output_dir");
    cli.add_flag("--strict-h", strict_h, "fail when h is below the well-posedness bound");
    cli.add_flag("--emit-plot-data", plot, "also write tidy long-format CSV");

    auto* sim = cli.add_subcommand("simulate", "simulate paths and the occupation measure");
    std::string method;
    auto* val = cli.add_subcommand("value", "compute a value function");
    val->add_option("--method", method)->required()->check(CLI::IsMember({"lp", "hjb", "obstacle", "sweep"}));
    std::string suite;
    auto* ver = cli.add_subcommand("verify", "run a verification suite");
    ver->add_option("--suite", suite)
        ->required()
        ->check(CLI::IsMember({"moments", "generator", "premium", "duality", "crosscheck", "hamiltonian-limit"}));
    auto* prem = cli.add_subcommand("premium", "print the net premium at the query state");

    try {
        cli.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = cli.exit(e, out, err);
        return code == 0 ? 0 : 3;
    }

    RunReport report;
    report.version = version();
    report.command = sim->parsed() ? "simulate" : val->parsed() ? "value " + method
                     : ver->parsed() ? "verify " + suite : "premium";
    (void)prem;
    Context ctx;
    ctx.report = &report;
    ctx.log = &out;
    ctx.emit_plot_data = plot;

    fs::path report_path;
    try {
        ctx.cfg = load_config(config_path);
        if (seed) ctx.cfg.run.seed = *seed;
        ctx.strict_h = strict_h || ctx.cfg.solver.strict_h;
        ctx.cfg.solver.strict_h = ctx.strict_h;
        report.config_hash = hex64(ctx.cfg.hash ^ ctx.cfg.run.seed);
        ctx.out_dir = out_dir.empty() ? fs::path(ctx.cfg.output_dir) : fs::path(out_dir);
        fs::create_directories(ctx.out_dir);
        std::string stem = report.command;
        for (char& c : stem)
            if (c == ' ') c = '_';
        report_path = ctx.out_dir / ("report_" + stem + ".json");

        Timer total(report, "total");
        if (sim->parsed()) cmd_simulate(ctx);
        else if (val->parsed()) cmd_value(ctx, method);
        else if (ver->parsed()) cmd_verify(ctx, suite);
        else cmd_premium(ctx);
    } catch (const ConfigError& e) {
        report.error = e.what();
        report.exit_code = 3;
    } catch (const AssemblyError& e) {
        report.error = e.what();
        report.exit_code = 3;
    } catch (const ContractViolation& e) {
        report.error = e.what();
        report.exit_code = 3;
    } catch (const PreconditionError& e) {
        report.error = e.what();
        report.exit_code = 3;
    } catch (const ConsistencyError& e) {
        report.error = e.what();
        report.exit_code = 2;
    } catch (const NonConvergence& e) {
        report.error = e.what();
        report.exit_code = 4;
    } catch (const IntegrationError& e) {
        report.error = e.what();
        report.exit_code = 4;
    } catch (const std::exception& e) {
        report.error = e.what();
        report.exit_code = 1;
    }
    if (report.exit_code == 0 && report.any_failed()) report.exit_code = 2;

    for (const auto& w : report.warnings) err << "warning: " << w << "\n";
    for (const auto& c : report.checks)
        out << c.status << "  " << c.name << "  margin=" << fmt(c.margin)
            << (c.detail.empty() ? "" : "  " + c.detail) << "\n";
    if (!report.error.empty()) err << "error: " << report.error << "\n";

    if (!report_path.empty()) {
        std::ofstream os(report_path);
        if (os) {
            os << report.to_json().dump(2) << "\n";
            out << "report: " << report_path.string() << "\n";
        }
    }
    return report.exit_code;
}

}  // namespace runmax::app
