#include "runmax/config.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include "json.hpp"
#include <sstream>

#include "runmax/errors.hpp"
#include "runmax/hjb.hpp"

namespace runmax {

using nlohmann::json;

namespace {

// Maps JSON pointers ("/model/beta/0") to the line where the value starts.
// Runs on text nlohmann has already accepted, so it can skip validation.
class LineIndex {
public:
    explicit LineIndex(const std::string& text) : t_(text) {
        skip_ws();
        value("");
    }

    std::size_t line(const std::string& pointer) const {
        std::string p = pointer;
        while (true) {
            auto it = lines_.find(p);
            if (it != lines_.end()) return it->second;
            auto cut = p.rfind('/');
            if (cut == std::string::npos || p.empty()) return 1;
            p.resize(cut);
        }
    }

private:
    void skip_ws() {
        while (i_ < t_.size() && std::isspace(static_cast<unsigned char>(t_[i_]))) {
            if (t_[i_] == '\n') ++line_;
            ++i_;
        }
    }

    std::string string_token() {
        std::string out;
        ++i_;  // opening quote
        while (i_ < t_.size() && t_[i_] != '"') {
            if (t_[i_] == '\\') {
                out += t_[i_++];
            }
            out += t_[i_++];
        }
        ++i_;
        return out;
    }

    void value(const std::string& ptr) {
        lines_[ptr] = line_;
        if (i_ >= t_.size()) return;
        char c = t_[i_];
        if (c == '{') {
            ++i_;
            skip_ws();
            while (i_ < t_.size() && t_[i_] != '}') {
                std::string key = string_token();
                skip_ws();
                ++i_;  // colon
                skip_ws();
                value(ptr + "/" + key);
                skip_ws();
                if (t_[i_] == ',') {
                    ++i_;
                    skip_ws();
                }
            }
            ++i_;
        } else if (c == '[') {
            ++i_;
            skip_ws();
            std::size_t k = 0;
            while (i_ < t_.size() && t_[i_] != ']') {
                value(ptr + "/" + std::to_string(k++));
                skip_ws();
                if (t_[i_] == ',') {
                    ++i_;
                    skip_ws();
                }
            }
            ++i_;
        } else if (c == '"') {
            string_token();
        } else {
            while (i_ < t_.size() && !std::isspace(static_cast<unsigned char>(t_[i_])) && t_[i_] != ',' &&
                   t_[i_] != ']' && t_[i_] != '}')
                ++i_;
        }
    }

    const std::string& t_;
    std::size_t i_ = 0;
    std::size_t line_ = 1;
    std::map<std::string, std::size_t> lines_;
};

// Typed access to one JSON object with errors that name the field and line.
class Node {
public:
    Node(const json& j, std::string ptr, const LineIndex& idx, const std::string& src)
        : j_(j), ptr_(std::move(ptr)), idx_(idx), src_(src) {}

    [[noreturn]] void fail(const std::string& msg, const std::string& at = "") const {
        std::string p = at.empty() ? ptr_ : at;
        throw ConfigError(src_ + ":" + std::to_string(idx_.line(p)) + ": " + name(p) + ": " + msg);
    }

    bool has(const std::string& key) const { return j_.is_object() && j_.contains(key); }

    Node child(const std::string& key) const {
        if (!has(key)) fail("missing required field '" + key + "'");
        return Node(j_.at(key), ptr_ + "/" + key, idx_, src_);
    }

    Node at(std::size_t k) const { return Node(j_.at(k), ptr_ + "/" + std::to_string(k), idx_, src_); }

    const json& raw() const { return j_; }
    const std::string& pointer() const { return ptr_; }

    double number() const {
        if (!j_.is_number()) fail("expected a number");
        double v = j_.get<double>();
        if (!std::isfinite(v)) fail("expected a finite number");
        return v;
    }

    std::size_t count() const {
        if (!j_.is_number_unsigned() && !(j_.is_number_integer() && j_.get<long long>() >= 0))
            fail("expected a non-negative integer");
        return j_.get<std::size_t>();
    }

    std::string text() const {
        if (!j_.is_string()) fail("expected a string");
        return j_.get<std::string>();
    }

    bool flag() const {
        if (!j_.is_boolean()) fail("expected true or false");
        return j_.get<bool>();
    }

    std::size_t size() const {
        if (!j_.is_array()) fail("expected an array");
        return j_.size();
    }

    std::vector<double> numbers(std::optional<std::size_t> expected = std::nullopt) const {
        std::size_t n = size();
        if (expected && n != *expected)
            fail("expected " + std::to_string(*expected) + " entries, found " + std::to_string(n));
        std::vector<double> out;
        for (std::size_t k = 0; k < n; ++k) out.push_back(at(k).number());
        return out;
    }

    double number_or(const std::string& key, double def) const { return has(key) ? child(key).number() : def; }
    std::size_t count_or(const std::string& key, std::size_t def) const {
        return has(key) ? child(key).count() : def;
    }

    void require_object() const {
        if (!j_.is_object()) fail("expected an object");
    }

private:
    static std::string name(const std::string& p) {
        if (p.empty()) return "config";
        std::string out = p.substr(1);
        for (char& c : out)
            if (c == '/') c = '.';
        return out;
    }

    const json& j_;
    std::string ptr_;
    const LineIndex& idx_;
    const std::string& src_;
};

ClaimLaw parse_claims(const Node& c) {
    c.require_object();
    try {
        if (c.has("dirac")) return ClaimLaw::dirac(c.child("dirac").number());
        std::size_t points = c.count_or("points", 32);
        if (c.has("uniform")) {
            auto ab = c.child("uniform").numbers(2);
            return ClaimLaw::quantize([&](double u) { return ab[0] + (ab[1] - ab[0]) * u; }, points);
        }
        if (c.has("exponential")) {
            double mean = c.child("exponential").number();
            return ClaimLaw::quantize([&](double u) { return -mean * std::log1p(-u); }, points);
        }
        auto support = c.child("support").numbers();
        auto weights = c.child("weights").numbers(support.size());
        return ClaimLaw(support, weights);
    } catch (const ConfigError& e) {
        std::string msg = e.what();
        if (msg.rfind("claim law", 0) == 0) c.fail(msg);
        throw;
    }
}

ControlPoint parse_control(const Node& n, std::size_t edges) {
    n.require_object();
    ControlPoint cp;
    cp.u = n.child("u").number();
    cp.p = n.child("p").numbers(edges);
    return cp;
}

NetworkState parse_state(const Node& n, std::size_t edges) {
    n.require_object();
    NetworkState st;
    st.s = n.child("s").numbers(edges);
    st.i = n.child("i").numbers(edges);
    st.x = n.number_or("x", 0.0);
    if (!st.in_triangle(1e-12)) n.fail("each (s_j, i_j) must satisfy s, i >= 0 and s + i <= 1");
    return st;
}

PolicySpec parse_policy(const Node& n, const SirParams& params) {
    n.require_object();
    if (n.has("constant")) return PolicySpec::constant(parse_control(n.child("constant"), params.n));
    if (n.has("schedule")) {
        Node s = n.child("schedule");
        std::vector<ScheduleEntry> entries;
        for (std::size_t k = 0; k < s.size(); ++k) {
            Node e = s.at(k);
            entries.push_back({e.child("start").number(), parse_control(e, params.n)});
        }
        try {
            return PolicySpec::piecewise(entries);
        } catch (const std::exception& e) {
            s.fail(e.what());
        }
    }
    n.fail("policy needs either 'constant' or 'schedule'");
}

void check_resolution(const Node& g, const std::string& key, std::size_t v) {
    if (v < 3) g.child(key).fail("resolution must be at least 3 nodes per axis");
}

}  // namespace

std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

ScenarioConfig parse_config(const std::string& text, const std::string& source) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        std::size_t line = 1;
        for (std::size_t k = 0; k < std::min<std::size_t>(e.byte ? e.byte - 1 : 0, text.size()); ++k)
            if (text[k] == '\n') ++line;
        throw ConfigError(source + ":" + std::to_string(line) + ": JSON syntax error: " + e.what());
    }
    LineIndex idx(text);
    Node root(doc, "", idx, source);
    root.require_object();

    ScenarioConfig cfg;
    cfg.source = source;
    cfg.hash = fnv1a64(doc.dump());

    // model
    Node m = root.child("model");
    m.require_object();
    SirParams& p = cfg.model.params;
    if (m.has("dynamics")) {
        cfg.dynamics = m.child("dynamics").text();
        if (cfg.dynamics != "sir" && cfg.dynamics != "frozen")
            m.child("dynamics").fail("expected \"sir\" or \"frozen\"");
    }
    p.n = m.child("n").count();
    if (p.n == 0) m.child("n").fail("must be >= 1");
    p.beta = m.child("beta").numbers(p.n);
    p.gamma = m.child("gamma").numbers(p.n);
    p.lambda = m.number_or("lambda", p.lambda);
    p.u_min = m.number_or("u_min", p.u_min);
    p.u_max = m.number_or("u_max", p.u_max);
    p.h = m.number_or("h", p.h);
    {
        Node pl = m.child("prev_levels");
        p.prev_levels.clear();
        for (std::size_t k = 0; k < pl.size(); ++k) p.prev_levels.push_back(pl.at(k).numbers(p.n));
    }
    if (m.has("premium")) {
        Node pr = m.child("premium");
        pr.require_object();
        std::string mode = pr.has("mode") ? pr.child("mode").text() : "net";
        if (mode == "table") {
            p.premium_mode = PremiumMode::Table;
            Node t = pr.child("table");
            PremiumTable tab;
            tab.i_mean = t.child("i_mean").numbers();
            tab.u = t.child("u").numbers();
            Node vals = t.child("values");
            for (std::size_t l = 0; l < vals.size(); ++l) {
                std::vector<std::vector<double>> slice;
                Node sl = vals.at(l);
                for (std::size_t r = 0; r < sl.size(); ++r) slice.push_back(sl.at(r).numbers(tab.u.size()));
                tab.values.push_back(std::move(slice));
            }
            p.premium_table = std::move(tab);
        } else if (mode != "net") {
            pr.child("mode").fail("expected \"net\" or \"table\"");
        }
        p.premium_offset = pr.number_or("offset", 0.0);
    }
    if (m.has("truncation")) {
        Node tr = m.child("truncation");
        tr.require_object();
        p.truncation.x_lo = tr.number_or("x_lo", p.truncation.x_lo);
        p.truncation.x_hi = tr.number_or("x_hi", p.truncation.x_hi);
        p.truncation.margin = tr.number_or("margin", p.truncation.margin);
    }
    cfg.model.claims = parse_claims(m.child("claims"));
    try {
        p.validate();
    } catch (const ConfigError& e) {
        m.fail(e.what());
    }

    // cost
    if (root.has("cost")) {
        Node c = root.child("cost");
        c.require_object();
        cfg.cost.base = c.number_or("base", cfg.cost.base);
        cfg.cost.capital_weight = c.number_or("capital_weight", 0.0);
        cfg.cost.infection_weight = c.number_or("infection_weight", 0.0);
        try {
            cfg.cost.validate();
        } catch (const ConfigError& e) {
            c.fail(e.what());
        }
    }

    // grid
    if (root.has("grid")) {
        Node g = root.child("grid");
        g.require_object();
        cfg.grid.si_side = g.count_or("si_side", cfg.grid.si_side);
        cfg.grid.x_nodes = g.count_or("x_nodes", cfg.grid.x_nodes);
        cfg.grid.u_levels = g.count_or("u_levels", cfg.grid.u_levels);
        cfg.grid.a_nodes = g.count_or("a_nodes", cfg.grid.a_nodes);
        cfg.grid.a_ratio = g.number_or("a_ratio", cfg.grid.a_ratio);
        if (g.has("si_side")) check_resolution(g, "si_side", cfg.grid.si_side);
        if (g.has("x_nodes")) check_resolution(g, "x_nodes", cfg.grid.x_nodes);
        if (cfg.grid.u_levels == 0) g.child("u_levels").fail("must be >= 1");
        if (cfg.grid.a_nodes == 0) g.child("a_nodes").fail("must be >= 1");
        if (!(cfg.grid.a_ratio > 1.0)) g.child("a_ratio").fail("must be > 1");
    }

    // solver
    cfg.solver.q_list = extended_q_list();
    if (root.has("solver")) {
        Node s = root.child("solver");
        s.require_object();
        cfg.solver.dt = s.number_or("dt", cfg.solver.dt);
        cfg.solver.tol = s.number_or("tol", cfg.solver.tol);
        cfg.solver.max_sweeps = s.count_or("max_sweeps", cfg.solver.max_sweeps);
        cfg.solver.q = s.number_or("q", cfg.solver.q);
        cfg.solver.band_factor = s.number_or("band_factor", cfg.solver.band_factor);
        if (s.has("strict_h")) cfg.solver.strict_h = s.child("strict_h").flag();
        if (s.has("q_list")) {
            cfg.solver.q_list = s.child("q_list").numbers();
            for (std::size_t k = 0; k < cfg.solver.q_list.size(); ++k) {
                if (!(cfg.solver.q_list[k] >= 2.0)) s.child("q_list").at(k).fail("every q must be >= 2");
                if (k > 0 && !(cfg.solver.q_list[k] > cfg.solver.q_list[k - 1]))
                    s.child("q_list").fail("must be strictly increasing");
            }
        }
        if (!(cfg.solver.dt > 0.0)) s.child("dt").fail("must be > 0");
        if (!(cfg.solver.tol > 0.0)) s.child("tol").fail("must be > 0");
        if (s.has("q") && !(cfg.solver.q >= 2.0)) s.child("q").fail("must be >= 2");
        if (!(cfg.solver.band_factor >= 0.0)) s.child("band_factor").fail("must be >= 0");
    }

    // run
    Node r = root.child("run");
    r.require_object();
    cfg.run.x0 = parse_state(r.child("x0"), p.n);
    if (r.has("policy")) {
        cfg.run.policy = parse_policy(r.child("policy"), p);
        try {
            cfg.run.policy->validate(p);
        } catch (const std::exception& e) {
            r.child("policy").fail(e.what());
        }
    }
    cfg.run.paths = r.count_or("paths", cfg.run.paths);
    cfg.run.horizon = r.number_or("horizon", cfg.run.horizon);
    cfg.run.dt = r.number_or("dt", cfg.run.dt);
    cfg.run.record_dt = r.number_or("record_dt", cfg.run.record_dt);
    cfg.run.seed = r.count_or("seed", cfg.run.seed);
    if (r.has("t_values")) cfg.run.t_values = r.child("t_values").numbers();
    if (r.has("premium_clock")) {
        std::string clock = r.child("premium_clock").text();
        if (clock == "frozen") cfg.run.premium_clock = PremiumClock::Frozen;
        else if (clock == "tracking") cfg.run.premium_clock = PremiumClock::Tracking;
        else r.child("premium_clock").fail("expected \"frozen\" or \"tracking\"");
    }
    if (r.has("perturbation")) cfg.run.perturbation = r.child("perturbation").numbers(2 * p.n + 1);
    if (r.has("query")) cfg.run.query = parse_state(r.child("query"), p.n);
    if (cfg.run.paths == 0) r.child("paths").fail("must be >= 1");
    if (!(cfg.run.horizon > 0.0)) r.child("horizon").fail("must be > 0");
    if (!(cfg.run.dt > 0.0)) r.child("dt").fail("must be > 0");

    if (root.has("output_dir")) cfg.output_dir = root.child("output_dir").text();
    return cfg;
}

ScenarioConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path + ": cannot open config file");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path);
}

Dynamics ScenarioConfig::make_dynamics() const {
    const auto& p = model.params;
    if (dynamics == "frozen") return Dynamics::frozen(2 * p.n + 1, model.claims, p.lambda, p.h);
    return Dynamics::sir(model);
}

std::vector<ControlPoint> ScenarioConfig::controls() const { return control_grid(model.params, grid.u_levels); }

CostFn ScenarioConfig::make_cost() const { return sir_cost(cost, model.params); }

std::vector<double> ScenarioConfig::x0_flat() const { return to_flat(run.x0); }

}  // namespace runmax
