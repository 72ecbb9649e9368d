#include "lcvx/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "lcvx/error.hpp"

namespace lcvx
{

using nlohmann::json;

namespace
{

const json& field(const json& obj, const std::string& path, const char* key)
{
    if (!obj.is_object())
    {
        throw ConfigError(path, "expected an object");
    }
    const auto it = obj.find(key);
    if (it == obj.end())
    {
        throw ConfigError(path + "/" + key, "missing required field");
    }
    return *it;
}

const json* optional_field(const json& obj, const char* key)
{
    const auto it = obj.find(key);
    return it == obj.end() || it->is_null() ? nullptr : &*it;
}

double real(const json& v, const std::string& path)
{
    if (!v.is_number())
    {
        throw ConfigError(path, "expected a number");
    }
    const double x = v.get<double>();
    if (!std::isfinite(x))
    {
        throw ConfigError(path, "expected a finite number");
    }
    return x;
}

int integer(const json& v, const std::string& path)
{
    if (!v.is_number_integer())
    {
        throw ConfigError(path, "expected an integer");
    }
    return v.get<int>();
}

Eigen::VectorXd vector(const json& v, const std::string& path, Eigen::Index expected = -1)
{
    if (!v.is_array())
    {
        throw ConfigError(path, "expected an array of numbers");
    }
    if (expected >= 0 && static_cast<Eigen::Index>(v.size()) != expected)
    {
        throw ConfigError(path, "expected " + std::to_string(expected) + " entries, got " + std::to_string(v.size()));
    }
    Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
    for (std::size_t j = 0; j < v.size(); ++j)
    {
        out(static_cast<Eigen::Index>(j)) = real(v[j], path + "/" + std::to_string(j));
    }
    return out;
}

Eigen::MatrixXd matrix(const json& v, const std::string& path, Eigen::Index rows = -1, Eigen::Index cols = -1)
{
    if (!v.is_array() || v.empty())
    {
        throw ConfigError(path, "expected a non-empty array of rows");
    }
    if (rows >= 0 && static_cast<Eigen::Index>(v.size()) != rows)
    {
        throw ConfigError(path, "expected " + std::to_string(rows) + " rows, got " + std::to_string(v.size()));
    }
    const Eigen::Index c = cols >= 0 ? cols : (v[0].is_array() ? static_cast<Eigen::Index>(v[0].size()) : -1);
    Eigen::MatrixXd out(static_cast<Eigen::Index>(v.size()), std::max<Eigen::Index>(c, 0));
    for (std::size_t r = 0; r < v.size(); ++r)
    {
        out.row(static_cast<Eigen::Index>(r)) = vector(v[r], path + "/" + std::to_string(r), c).transpose();
    }
    return out;
}

json to_json(const Eigen::VectorXd& v)
{
    json a = json::array();
    for (Eigen::Index j = 0; j < v.size(); ++j)
    {
        a.push_back(v(j));
    }
    return a;
}

json to_json(const Eigen::MatrixXd& M)
{
    json a = json::array();
    for (Eigen::Index r = 0; r < M.rows(); ++r)
    {
        a.push_back(to_json(Eigen::VectorXd(M.row(r).transpose())));
    }
    return a;
}

void parse_dynamics(const json& d, ProblemConfig& cfg)
{
    const std::string path = "/dynamics";
    const json& model = field(d, path, "model");
    if (!model.is_string())
    {
        throw ConfigError(path + "/model", "expected a string");
    }
    cfg.dynamics_model = model.get<std::string>();
    if (cfg.dynamics_model == "rotating-station")
    {
        Eigen::VectorXd w = vector(field(d, path, "omega"), path + "/omega", 3);
        std::string units = "rad/s";
        if (const json* u = optional_field(d, "omega_units"))
        {
            if (!u->is_string())
            {
                throw ConfigError(path + "/omega_units", "expected a string");
            }
            units = u->get<std::string>();
        }
        if (units == "rpm")
        {
            w *= kRpm;
        }
        else if (units != "rad/s")
        {
            throw ConfigError(path + "/omega_units", "expected \"rad/s\" or \"rpm\", got \"" + units + "\"");
        }
        cfg.omega = w;
        cfg.spec.sys = station_dynamics(cfg.omega);
    }
    else if (cfg.dynamics_model == "explicit")
    {
        const Eigen::MatrixXd A = matrix(field(d, path, "A"), path + "/A");
        if (A.rows() != A.cols())
        {
            throw ConfigError(path + "/A", "expected a square matrix");
        }
        const Eigen::MatrixXd B = matrix(field(d, path, "B"), path + "/B", A.rows());
        Eigen::VectorXd w = Eigen::VectorXd::Zero(A.rows());
        if (const json* wj = optional_field(d, "w"))
        {
            w = vector(*wj, path + "/w", A.rows());
        }
        cfg.spec.sys = LtiSystem{A, B, w};
    }
    else
    {
        throw ConfigError(path + "/model", "expected \"explicit\" or \"rotating-station\"");
    }
}

void parse_inputs(const json& in, ProblemConfig& cfg)
{
    const std::string path = "/inputs";
    const int m = cfg.spec.sys.inputs();
    const json& cones = field(in, path, "cones");
    if (!cones.is_array() || cones.empty())
    {
        throw ConfigError(path + "/cones", "expected a non-empty array");
    }
    for (std::size_t i = 0; i < cones.size(); ++i)
    {
        const std::string cp = path + "/cones/" + std::to_string(i);
        const json& c = cones[i];
        if (!c.is_object())
        {
            throw ConfigError(cp, "expected an object with \"ray\", \"facets\" or \"unrestricted\"");
        }
        try
        {
            if (const json* r = optional_field(c, "ray"))
            {
                cfg.spec.cones.push_back(PointingCone::ray(vector(*r, cp + "/ray", m)));
            }
            else if (const json* f = optional_field(c, "facets"))
            {
                cfg.spec.cones.push_back(PointingCone::from_facets(matrix(*f, cp + "/facets", -1, m)));
            }
            else if (const json* a = optional_field(c, "unrestricted"))
            {
                if (!a->is_boolean() || !a->get<bool>())
                {
                    throw ConfigError(cp + "/unrestricted", "expected true");
                }
                cfg.spec.cones.push_back(PointingCone::unrestricted(m));
            }
            else
            {
                throw ConfigError(cp, "expected \"ray\", \"facets\" or \"unrestricted\"");
            }
        }
        catch (const ConfigError&)
        {
            throw;
        }
        catch (const InvalidInput& e)
        {
            throw ConfigError(cp, e.what());
        }
    }
    cfg.spec.rho1 = real(field(in, path, "rho1"), path + "/rho1");
    cfg.spec.rho2 = real(field(in, path, "rho2"), path + "/rho2");
    cfg.spec.K = integer(field(in, path, "K"), path + "/K");
}

void parse_terminal(const json& t, ProblemConfig& cfg)
{
    const std::string path = "/terminal";
    const int n = cfg.spec.sys.states();
    TerminalSpec term;
    if (const json* s = optional_field(t, "state"))
    {
        if (!s->is_array() || static_cast<int>(s->size()) != n)
        {
            throw ConfigError(path + "/state", "expected " + std::to_string(n) + " entries (null for free)");
        }
        std::vector<int> idx;
        std::vector<double> vals;
        for (int j = 0; j < n; ++j)
        {
            const json& e = (*s)[static_cast<std::size_t>(j)];
            if (e.is_null())
            {
                cfg.terminal_state.emplace_back(std::nullopt);
                continue;
            }
            const double v = real(e, path + "/state/" + std::to_string(j));
            cfg.terminal_state.emplace_back(v);
            idx.push_back(j);
            vals.push_back(v);
        }
        term = TerminalSpec::fixed_state(n, idx, Eigen::Map<Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size())));
    }
    else if (const json* hx = optional_field(t, "Hx"))
    {
        term.Hx = matrix(*hx, path + "/Hx", -1, n);
        term.ht = vector(field(t, path, "h_t"), path + "/h_t", term.Hx.rows());
        term.h0 = vector(field(t, path, "h0"), path + "/h0", term.Hx.rows());
    }
    else
    {
        term.Hx.resize(0, n);
        term.ht.resize(0);
        term.h0.resize(0);
    }
    if (const json* ft = optional_field(t, "final_time"))
    {
        cfg.final_time = real(*ft, path + "/final_time");
        term.fix_final_time(*cfg.final_time);
    }
    const json& cost = field(t, path, "cost");
    const std::string cpath = path + "/cost";
    const json& kind = field(cost, cpath, "kind");
    if (!kind.is_string())
    {
        throw ConfigError(cpath + "/kind", "expected a string");
    }
    const std::string k = kind.get<std::string>();
    if (k == "minimum-time")
    {
        term.cost = TerminalSpec::Cost::MinimumTime;
    }
    else if (k == "affine")
    {
        term.cost = TerminalSpec::Cost::Affine;
        term.q = vector(field(cost, cpath, "q"), cpath + "/q", n);
        term.c = optional_field(cost, "c") ? real(cost["c"], cpath + "/c") : 0.0;
    }
    else if (k == "quadratic")
    {
        term.cost = TerminalSpec::Cost::Quadratic;
        term.W = matrix(field(cost, cpath, "W"), cpath + "/W", -1, n);
        term.x_ref = vector(field(cost, cpath, "x_ref"), cpath + "/x_ref", n);
    }
    else
    {
        throw ConfigError(cpath + "/kind", "expected \"minimum-time\", \"affine\" or \"quadratic\"");
    }
    cfg.spec.terminal = std::move(term);
}

void parse_time(const json& t, ProblemConfig& cfg)
{
    const std::string path = "/time";
    if (const json* tf = optional_field(t, "tf"))
    {
        cfg.tf = real(*tf, path + "/tf");
        if (!(*cfg.tf > 0.0))
        {
            throw ConfigError(path + "/tf", "must be positive");
        }
    }
    if (const json* br = optional_field(t, "bracket"))
    {
        const Eigen::VectorXd b = vector(*br, path + "/bracket", 2);
        if (!(b(0) > 0.0) || !(b(0) < b(1)))
        {
            throw ConfigError(path + "/bracket", "need 0 < lower < upper");
        }
        cfg.t_lo = b(0);
        cfg.t_hi = b(1);
    }
    if (const json* tol = optional_field(t, "tol"))
    {
        cfg.tol_t = real(*tol, path + "/tol");
        if (!(cfg.tol_t > 0.0))
        {
            throw ConfigError(path + "/tol", "must be positive");
        }
    }
}

void parse_tuning(const json& root, ProblemConfig& cfg)
{
    if (const json* s = optional_field(root, "solver"))
    {
        if (const json* v = optional_field(*s, "tol_feas"))
        {
            cfg.solver.tol_feas = real(*v, "/solver/tol_feas");
        }
        if (const json* v = optional_field(*s, "tol_gap"))
        {
            cfg.solver.tol_gap = real(*v, "/solver/tol_gap");
        }
        if (const json* v = optional_field(*s, "max_iters"))
        {
            cfg.solver.max_iters = integer(*v, "/solver/max_iters");
        }
    }
    if (const json* s = optional_field(root, "verification"))
    {
        if (const json* v = optional_field(*s, "tol_off"))
        {
            cfg.verify.tol_off = real(*v, "/verification/tol_off");
        }
        if (const json* v = optional_field(*s, "tol_bin"))
        {
            cfg.verify.tol_bin = real(*v, "/verification/tol_bin");
        }
        if (const json* v = optional_field(*s, "tol_u"))
        {
            cfg.verify.tol_u = real(*v, "/verification/tol_u");
        }
    }
    if (const json* s = optional_field(root, "conditions"))
    {
        if (const json* v = optional_field(*s, "rank_tolerance"))
        {
            cfg.conditions.rank.relative = real(*v, "/conditions/rank_tolerance");
        }
        if (const json* v = optional_field(*s, "strict"))
        {
            cfg.conditions.strict = real(*v, "/conditions/strict");
        }
    }
}

}  // namespace

ProblemConfig parse_config(const std::string& json_text)
{
    json root;
    try
    {
        root = json::parse(json_text);
    }
    catch (const json::parse_error& e)
    {
        throw ConfigError("/", std::string("invalid JSON: ") + e.what());
    }
    if (!root.is_object())
    {
        throw ConfigError("/", "expected a JSON object");
    }
    ProblemConfig cfg;
    cfg.schema_version = integer(field(root, "", "schema_version"), "/schema_version");
    if (cfg.schema_version != kSchemaVersion)
    {
        throw ConfigError("/schema_version", "unsupported version " + std::to_string(cfg.schema_version));
    }
    parse_dynamics(field(root, "", "dynamics"), cfg);
    parse_inputs(field(root, "", "inputs"), cfg);
    cfg.spec.x0 = vector(field(root, "", "initial_state"), "/initial_state", cfg.spec.sys.states());
    parse_terminal(field(root, "", "terminal"), cfg);
    const json& grid = field(root, "", "grid");
    cfg.N = integer(field(grid, "/grid", "N"), "/grid/N");
    if (cfg.N < 2)
    {
        throw ConfigError("/grid/N", "need at least 2 nodes");
    }
    if (const json* t = optional_field(root, "time"))
    {
        parse_time(*t, cfg);
    }
    parse_tuning(root, cfg);
    try
    {
        cfg.spec.validate();
    }
    catch (const AssumptionViolation& e)
    {
        throw ConfigError("/inputs", e.what());
    }
    catch (const ConfigError&)
    {
        throw;
    }
    catch (const InvalidInput& e)
    {
        throw ConfigError("/", e.what());
    }
    return cfg;
}

ProblemConfig load_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
    {
        throw ConfigError("/", "cannot open " + path);
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string dump_config(const ProblemConfig& cfg)
{
    const ProblemSpec& spec = cfg.spec;
    json root;
    root["schema_version"] = cfg.schema_version;
    json dyn;
    dyn["model"] = cfg.dynamics_model;
    if (cfg.dynamics_model == "rotating-station")
    {
        dyn["omega"] = to_json(Eigen::VectorXd(cfg.omega));
        dyn["omega_units"] = "rad/s";
    }
    else
    {
        dyn["A"] = to_json(spec.sys.A);
        dyn["B"] = to_json(spec.sys.B);
        dyn["w"] = to_json(spec.sys.w);
    }
    root["dynamics"] = dyn;

    json cones = json::array();
    for (const auto& c : spec.cones)
    {
        json e;
        if (const auto& d = c.ray_direction())
        {
            e["ray"] = to_json(*d);
        }
        else if (c.is_unrestricted())
        {
            e["unrestricted"] = true;
        }
        else
        {
            e["facets"] = to_json(c.facets());
        }
        cones.push_back(e);
    }
    root["inputs"] = {{"cones", cones}, {"rho1", spec.rho1}, {"rho2", spec.rho2}, {"K", spec.K}};
    root["initial_state"] = to_json(spec.x0);

    json term;
    const TerminalSpec& t = spec.terminal;
    if (!cfg.terminal_state.empty())
    {
        json s = json::array();
        for (const auto& v : cfg.terminal_state)
        {
            s.push_back(v ? json(*v) : json(nullptr));
        }
        term["state"] = s;
        if (cfg.final_time)
        {
            term["final_time"] = *cfg.final_time;
        }
    }
    else if (t.rows() > 0)
    {
        term["Hx"] = to_json(t.Hx);
        term["h_t"] = to_json(t.ht);
        term["h0"] = to_json(t.h0);
    }
    switch (t.cost)
    {
    case TerminalSpec::Cost::MinimumTime:
        term["cost"] = {{"kind", "minimum-time"}};
        break;
    case TerminalSpec::Cost::Affine:
        term["cost"] = {{"kind", "affine"}, {"q", to_json(t.q)}, {"c", t.c}};
        break;
    case TerminalSpec::Cost::Quadratic:
        term["cost"] = {{"kind", "quadratic"}, {"W", to_json(t.W)}, {"x_ref", to_json(t.x_ref)}};
        break;
    }
    root["terminal"] = term;
    root["grid"] = {{"N", cfg.N}};
    json time = json::object();
    if (cfg.tf)
    {
        time["tf"] = *cfg.tf;
    }
    if (cfg.has_bracket())
    {
        time["bracket"] = {cfg.t_lo, cfg.t_hi};
    }
    time["tol"] = cfg.tol_t;
    root["time"] = time;
    root["solver"] = {{"tol_feas", cfg.solver.tol_feas},
                      {"tol_gap", cfg.solver.tol_gap},
                      {"max_iters", cfg.solver.max_iters}};
    json ver = {{"tol_bin", cfg.verify.tol_bin}};
    if (cfg.verify.tol_off >= 0.0)
    {
        ver["tol_off"] = cfg.verify.tol_off;
    }
    if (cfg.verify.tol_u >= 0.0)
    {
        ver["tol_u"] = cfg.verify.tol_u;
    }
    root["verification"] = ver;
    root["conditions"] = {{"rank_tolerance", cfg.conditions.rank.relative}, {"strict", cfg.conditions.strict}};
    return root.dump(2) + "\n";
}

std::vector<Eigen::Vector3d> docking_directions(double up_deg, double down_deg)
{
    const double deg = 3.14159265358979323846 / 180.0;
    const double su = std::sin(up_deg * deg);
    const double cu = std::cos(up_deg * deg);
    const double sd = std::sin(down_deg * deg);
    const double cd = std::cos(down_deg * deg);
    // Rotating v about axis a by the angle: +x maps z to (0, -s, c), +y maps z to (s, 0, c).
    return {
        {0.0, -su, cu}, {0.0, su, cu}, {su, 0.0, cu}, {-su, 0.0, cu},
        {0.0, sd, -cd}, {0.0, -sd, -cd}, {-sd, 0.0, -cd}, {sd, 0.0, -cd},
        {1.0, 0.0, 0.0}, {-1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}, {0.0, -1.0, 0.0},
    };
}

ProblemConfig docking_preset()
{
    ProblemConfig cfg;
    cfg.dynamics_model = "rotating-station";
    cfg.omega = Eigen::Vector3d(0.0, 0.0, kRpm);
    cfg.spec.sys = station_dynamics(cfg.omega);
    for (const auto& d : docking_directions())
    {
        cfg.spec.cones.push_back(PointingCone::ray(d));
    }
    cfg.spec.rho1 = 1e-3;
    cfg.spec.rho2 = 1e-2;
    cfg.spec.K = 4;
    cfg.spec.x0.resize(6);
    cfg.spec.x0 << 5.0, 5.0, 100.0, 0.0, 0.0, 0.0;
    Eigen::VectorXd target(6);
    target << 0.0, 0.0, 0.0, 0.0, 0.0, -0.01;
    cfg.spec.terminal = TerminalSpec::fixed_state(6, {0, 1, 2, 3, 4, 5}, target);
    cfg.spec.terminal.cost = TerminalSpec::Cost::MinimumTime;
    for (Eigen::Index j = 0; j < 6; ++j)
    {
        cfg.terminal_state.emplace_back(target(j));
    }
    cfg.N = 300;
    cfg.t_lo = 60.0;
    cfg.t_hi = 300.0;
    cfg.tol_t = 0.05;
    return cfg;
}

}  // namespace lcvx
