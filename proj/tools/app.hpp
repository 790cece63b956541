#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"
#include "runmax/config.hpp"

namespace runmax::app {

/// One pass/fail line of a report. Every status carries a number.
struct Check {
    std::string name;
    /// "pass", "fail" or "skipped" (precondition not met on this model).
    std::string status;
    /// Distance to the failure threshold; negative means failed.
    double margin = 0.0;
    std::string detail;
};

struct RunReport {
    std::string command;
    std::string config_hash;
    std::string version;
    std::vector<std::pair<std::string, double>> timings;
    std::vector<Check> checks;
    std::vector<std::string> artifacts;
    std::vector<std::string> warnings;
    nlohmann::json results = nlohmann::json::object();
    std::string error;
    int exit_code = 0;

    /// Adds a check; status is pass when margin >= 0.
    void check(const std::string& name, double margin, const std::string& detail = "");
    void skip(const std::string& name, const std::string& why);
    bool any_failed() const;
    nlohmann::json to_json() const;
};

struct Context {
    ScenarioConfig cfg;
    std::filesystem::path out_dir;
    bool emit_plot_data = false;
    bool strict_h = false;
    RunReport* report = nullptr;
    std::ostream* log = nullptr;

    /// Opens out_dir/name for writing, registers it as an artifact and writes the version line.
    std::ofstream open_csv(const std::string& name) const;
    std::ofstream open_json(const std::string& name) const;
};

/// Measures the wall time of a scope into the report.
class Timer {
public:
    Timer(RunReport& report, std::string name);
    ~Timer();

private:
    RunReport& report_;
    std::string name_;
    double start_;
};

/// Shortest round-trip text for a double.
std::string fmt(double v);
std::string hex64(std::uint64_t v);
const char* version();

/// Applies the discount-rate check; strict mode throws ConfigError.
void discount_check(Context& ctx);

void cmd_simulate(Context& ctx);
void cmd_value(Context& ctx, const std::string& method);
void cmd_verify(Context& ctx, const std::string& suite);
void cmd_premium(Context& ctx);

/// Whole command line; returns the process exit code.
int run(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace runmax::app
