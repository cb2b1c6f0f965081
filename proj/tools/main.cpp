// coipss command-line front end: power flow, modal analysis, blend-parameter
// sweeps, open-loop frequency response, and time-domain simulation over JSON
// case and scenario files.
#include <complex>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "coipss/case_io.hpp"
#include "coipss/csv.hpp"
#include "coipss/linear_analysis.hpp"
#include "coipss/manifest.hpp"
#include "coipss/power_flow.hpp"
#include "coipss/response.hpp"
#include "coipss/simulation.hpp"

namespace {

using namespace coipss;

std::string default_out_dir() {
    if (const char* env = std::getenv("COIPSS_OUT_DIR")) return env;
    return "out";
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw InputError("cannot create output directory '" + dir + "'");
}

RunManifest make_manifest(const std::string& command,
                          const std::vector<std::string>& args,
                          const std::vector<std::string>& inputs,
                          const std::string& out_dir, std::uint64_t seed) {
    RunManifest m;
    m.command = command;
    m.args = args;
    m.inputs = inputs;
    m.seed = seed;
    m.output_dir = out_dir;
    m.tool_version = COIPSS_VERSION;
    m.config_hash = config_hash(command, args, inputs);
    return m;
}

nlohmann::json modal_to_json(const std::vector<ModalResult>& modes,
                             const LinearModel& lm) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& m : modes) {
        nlohmann::json mj;
        mj["re"] = m.eigenvalue.real();
        mj["im"] = m.eigenvalue.imag();
        mj["freq_hz"] = m.frequency_hz;
        mj["damping_ratio"] = m.damping_ratio;
        mj["classification"] = to_string(m.classification);
        mj["residual"] = m.residual;
        nlohmann::json shape = nlohmann::json::array();
        for (Eigen::Index i = 0; i < m.mode_shape.size(); ++i)
            shape.push_back({{"unit", lm.machine_names[static_cast<std::size_t>(i)]},
                             {"re", m.mode_shape(i).real()},
                             {"im", m.mode_shape(i).imag()}});
        mj["shape"] = shape;
        out.push_back(mj);
    }
    return out;
}

std::vector<double> parse_grid(const std::string& text) {
    // "a:step:b" or comma-separated values
    std::vector<double> grid;
    const auto c1 = text.find(':');
    if (c1 != std::string::npos) {
        const auto c2 = text.find(':', c1 + 1);
        if (c2 == std::string::npos)
            throw InputError("grid must be start:step:stop or a comma list");
        const double a = std::stod(text.substr(0, c1));
        const double step = std::stod(text.substr(c1 + 1, c2 - c1 - 1));
        const double b = std::stod(text.substr(c2 + 1));
        if (step <= 0.0) throw InputError("grid step must be positive");
        for (double v = a; v <= b + 1e-12; v += step) grid.push_back(v);
        return grid;
    }
    std::string rest = text;
    while (!rest.empty()) {
        const auto comma = rest.find(',');
        grid.push_back(std::stod(rest.substr(0, comma)));
        if (comma == std::string::npos) break;
        rest = rest.substr(comma + 1);
    }
    return grid;
}

// "omega2-omega4" -> generator ordinals
std::pair<std::string, std::string> parse_speed_pair(const NetworkCase& net,
                                                     const std::string& text) {
    const auto dash = text.find('-');
    if (dash == std::string::npos || text.substr(0, 5) != "omega" ||
        text.substr(dash + 1, 5) != "omega")
        throw InputError("record flag must look like omega2-omega4");
    const int a = std::stoi(text.substr(5, dash - 5));
    const int b = std::stoi(text.substr(dash + 6));
    if (a < 1 || b < 1 || a > static_cast<int>(net.generators.size()) ||
        b > static_cast<int>(net.generators.size()))
        throw InputError("record flag indexes a generator that does not exist");
    return {net.generators[static_cast<std::size_t>(a - 1)].name,
            net.generators[static_cast<std::size_t>(b - 1)].name};
}

struct PssOverrideFlags {
    double beta1 = -1.0, beta2 = -1.0, gain = -1.0;
    std::string units = "*";  // comma list, "*" = all equipped units, "" = none

    bool any() const { return beta1 >= 0.0 || beta2 >= 0.0 || gain >= 0.0; }

    void apply(NetworkCase& net) const {
        std::vector<std::string> targets;
        if (units == "*") {
            for (const auto& g : net.generators)
                if (g.pss) targets.push_back(g.name);
        } else if (!units.empty()) {
            std::string rest = units;
            while (!rest.empty()) {
                const auto comma = rest.find(',');
                targets.push_back(rest.substr(0, comma));
                if (comma == std::string::npos) break;
                rest = rest.substr(comma + 1);
            }
        }
        if (units.empty() || targets.empty()) {
            // empty unit set: no stabilizers at all
            if (units.empty())
                for (auto& g : net.generators) g.pss.reset();
            return;
        }
        for (const auto& name : targets) {
            Generator& g = net.generators[static_cast<std::size_t>(
                net.generator_index(name))];
            if (!g.pss)
                throw InputError("generator '" + name + "' carries no stabilizer block");
            if (beta1 >= 0.0) g.pss->beta1 = beta1;
            if (beta2 >= 0.0) g.pss->beta2 = beta2;
            if (gain >= 0.0) g.pss->gain_k = gain;
            g.pss->validate();
        }
    }
};

int cmd_powerflow(const std::string& case_path, double tol, int max_iter,
                  const std::string& out_dir,
                  const std::vector<std::string>& args) {
    const NetworkCase net = load_case(case_path);
    PowerFlowOptions opts;
    opts.tol = tol;
    opts.max_iter = max_iter;
    const PowerFlowSolution sol = solve_power_flow(net, opts);

    ensure_dir(out_dir);
    nlohmann::json j;
    j["iterations"] = sol.iterations;
    j["max_mismatch"] = sol.max_mismatch;
    j["buses"] = nlohmann::json::array();
    std::printf("  bus      |V| (pu)   angle (deg)\n");
    for (std::size_t i = 0; i < net.buses.size(); ++i) {
        const double vm = std::abs(sol.voltage[i]);
        const double va = std::arg(sol.voltage[i]) * 180.0 / kPi;
        j["buses"].push_back({{"id", net.buses[i].id}, {"vm", vm}, {"va_deg", va}});
        std::printf("  %3d     %8.4f     %8.3f\n", net.buses[i].id, vm, va);
    }
    j["generators"] = nlohmann::json::array();
    std::printf("  unit        P (pu)      Q (pu)\n");
    for (std::size_t g = 0; g < net.generators.size(); ++g) {
        j["generators"].push_back({{"name", net.generators[g].name},
                                   {"p", sol.gen_injection[g].real()},
                                   {"q", sol.gen_injection[g].imag()}});
        std::printf("  %-6s   %9.4f   %9.4f\n", net.generators[g].name.c_str(),
                    sol.gen_injection[g].real(), sol.gen_injection[g].imag());
    }
    j["branch_flows"] = nlohmann::json::array();
    for (const auto& br : net.branches) {
        const Complex s = branch_flow_from(net, br, sol);
        j["branch_flows"].push_back(
            {{"from", br.from_bus}, {"to", br.to_bus}, {"p", s.real()}, {"q", s.imag()}});
    }
    std::ofstream(out_dir + "/powerflow.json") << j.dump(2) << "\n";
    write_manifest(out_dir, make_manifest("powerflow", args, {case_path}, out_dir, 0));
    return 0;
}

int cmd_modal(const std::string& case_path, const PssOverrideFlags& pss,
              const std::string& out_dir, const std::vector<std::string>& args) {
    NetworkCase net = load_case(case_path);
    pss.apply(net);
    SystemModel model = build_system_model(net);
    LinearModel lm = linearize(model, model.x_eq);
    auto modes = eigensolve(lm);
    classify_modes(modes, lm);

    ensure_dir(out_dir);
    nlohmann::json j;
    j["n_states"] = lm.size();
    j["modes"] = modal_to_json(modes, lm);
    std::ofstream(out_dir + "/modal.json") << j.dump(2) << "\n";
    std::printf("  %-12s %-10s %-9s %s\n", "eigenvalue", "freq (Hz)", "damping", "class");
    for (const auto& m : modes) {
        if (m.eigenvalue.imag() < 0.0) continue;
        std::printf("  %8.4f%+8.4fj  %7.4f  %8.4f  %s\n", m.eigenvalue.real(),
                    m.eigenvalue.imag(), m.frequency_hz, m.damping_ratio,
                    to_string(m.classification));
    }
    write_manifest(out_dir, make_manifest("modal", args, {case_path}, out_dir, 0));
    return 0;
}

int cmd_sweep(const std::string& case_path, const std::string& param,
              const std::string& grid_text, double fixed_other, double gain,
              const std::string& out_dir, const std::vector<std::string>& args) {
    const NetworkCase net = load_case(case_path);
    SweepParam sp;
    if (param == "beta1") sp = SweepParam::beta1;
    else if (param == "beta2") sp = SweepParam::beta2;
    else throw InputError("--param must be beta1 or beta2");
    const auto grid = parse_grid(grid_text);
    const SweepResult sr = beta_sweep(net, sp, grid, fixed_other, gain);

    ensure_dir(out_dir);
    std::vector<std::vector<double>> cols(7);
    std::vector<std::string> names{"param_value", "mode_id",       "re",
                                   "im",          "freq_hz",       "damping_ratio",
                                   "flagged"};
    for (std::size_t m = 0; m < sr.tracked.size(); ++m) {
        for (std::size_t p = 0; p < grid.size(); ++p) {
            const auto z = sr.tracked[m].path[p];
            cols[0].push_back(grid[p]);
            cols[1].push_back(static_cast<double>(m));
            cols[2].push_back(z.real());
            cols[3].push_back(z.imag());
            cols[4].push_back(std::abs(z.imag()) / (2.0 * kPi));
            cols[5].push_back(std::abs(z) > 0 ? -z.real() / std::abs(z) : 0.0);
            cols[6].push_back(sr.tracked[m].flagged ? 1.0 : 0.0);
        }
    }
    write_csv(out_dir + "/locus.csv", names, cols);

    nlohmann::json j;
    j["param"] = param;
    j["fixed_other"] = fixed_other;
    j["gain_k"] = gain;
    j["grid"] = grid;
    j["points"] = nlohmann::json::array();
    for (const auto& pt : sr.points) {
        nlohmann::json pj;
        pj["value"] = pt.value;
        pj["modes"] = nlohmann::json::array();
        for (const auto& m : pt.modes) {
            if (m.eigenvalue.imag() <= 1e-6) continue;
            pj["modes"].push_back({{"re", m.eigenvalue.real()},
                                   {"im", m.eigenvalue.imag()},
                                   {"freq_hz", m.frequency_hz},
                                   {"damping_ratio", m.damping_ratio},
                                   {"classification", to_string(m.classification)}});
        }
        j["points"].push_back(pj);
    }
    j["tracked"] = nlohmann::json::array();
    for (const auto& tm : sr.tracked) {
        nlohmann::json tj;
        tj["initial_class"] = to_string(tm.initial_class);
        tj["flagged"] = tm.flagged;
        tj["path"] = nlohmann::json::array();
        for (const auto& z : tm.path) tj["path"].push_back({{"re", z.real()}, {"im", z.imag()}});
        j["tracked"].push_back(tj);
    }
    std::ofstream(out_dir + "/locus.json") << j.dump(2) << "\n";
    write_manifest(out_dir, make_manifest("sweep", args, {case_path}, out_dir, 0));
    return 0;
}

int cmd_bode(const std::string& case_path, const std::string& unit, double beta1,
             double beta2, double delay, int points, const std::string& out_dir,
             const std::vector<std::string>& args) {
    const NetworkCase net = load_case(case_path);
    bool known = false;
    for (const auto& g : net.generators)
        if (g.name == unit) known = true;
    if (!known) {
        std::string names;
        for (const auto& g : net.generators) names += (names.empty() ? "" : ", ") + g.name;
        throw InputError("unknown unit '" + unit + "' (available: " + names + ")");
    }
    SystemModel model = build_loop_study(net, unit, beta1, beta2);
    LinearModel lm = linearize(model, model.x_eq);
    const auto grid = log_frequency_grid(0.01, 10.0, points);
    ResponseSet rs;
    if (delay > 0.0)
        rs = delayed_response(lm, std::vector<double>(model.sensors.size(), delay), grid);
    else
        rs = open_loop_response(lm, grid);
    for (const auto& msg : rs.skipped) std::fprintf(stderr, "warning: %s\n", msg.c_str());

    ensure_dir(out_dir);
    write_response_csv(out_dir + "/response.csv", rs.points);
    write_manifest(out_dir, make_manifest("bode", args, {case_path}, out_dir, 0));
    return 0;
}

int cmd_simulate(const std::string& scenario_path,
                 const std::vector<std::string>& record_flags, std::uint64_t seed_flag,
                 bool seed_set, const std::string& out_dir,
                 const std::vector<std::string>& args) {
    LoadedScenario ls = load_scenario(scenario_path);
    if (seed_set) ls.scenario.seed = seed_flag;
    for (const auto& flag : record_flags)
        ls.scenario.speed_pairs.push_back(parse_speed_pair(ls.net, flag));

    SystemModelOptions opts;
    opts.wams = ls.wams;
    SystemModel model = build_system_model(ls.net, opts);
    const SimulationRecord rec = run(model, ls.scenario);

    ensure_dir(out_dir);
    write_record_csv(out_dir + "/record.csv", rec);
    if (!rec.audit.empty()) write_audit_csv(out_dir + "/audit.csv", rec.audit);

    nlohmann::json j;
    double event_time = 0.0;
    for (const auto& ev : ls.scenario.events) event_time = std::max(event_time, ev.time);
    if (!ls.scenario.events.empty()) {
        const auto m = nadir_metric(rec, ls.scenario.events.front().time);
        j["frequency_nadir"] = m.nadir;
        j["nadir_time"] = m.time;
        j["event_time"] = ls.scenario.events.front().time;
    }
    j["instability"] = rec.instability;
    if (rec.failure_time) {
        j["failure_time"] = *rec.failure_time;
        j["failure_reason"] = rec.failure_reason;
    }
    j["final_coi"] = rec.series("coi_exact").back();
    j["rows"] = rec.rows();
    std::ofstream(out_dir + "/metrics.json") << j.dump(2) << "\n";
    write_manifest(out_dir, make_manifest("simulate", args,
                                          {scenario_path, ls.case_path}, out_dir,
                                          ls.scenario.seed));
    if (rec.failure_time) {
        std::fprintf(stderr, "simulation failed at t=%.3f: %s\n", *rec.failure_time,
                     rec.failure_reason.c_str());
        return 2;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"power system dynamics and stabilizer analysis toolkit"};
    app.require_subcommand(1);

    std::string out_dir = default_out_dir();
    std::vector<std::string> raw_args(argv + 1, argv + argc);

    // powerflow
    auto* pf = app.add_subcommand("powerflow", "solve the static power flow");
    std::string pf_case;
    double pf_tol = 1e-8;
    int pf_iter = 30;
    pf->add_option("case", pf_case, "case file")->required();
    pf->add_option("--tol", pf_tol, "mismatch tolerance, pu");
    pf->add_option("--max-iter", pf_iter, "iteration cap");
    pf->add_option("--out", out_dir, "output directory (or COIPSS_OUT_DIR)");

    // modal
    auto* md = app.add_subcommand("modal", "eigenvalues and mode shapes");
    std::string md_case;
    PssOverrideFlags md_pss;
    md->add_option("case", md_case, "case file")->required();
    md->add_option("--beta1", md_pss.beta1, "override beta1 on selected units");
    md->add_option("--beta2", md_pss.beta2, "override beta2 on selected units");
    md->add_option("--gain", md_pss.gain, "override stabilizer gain");
    md->add_option("--pss-units", md_pss.units,
                   "comma list of units to override ('' for none)");
    md->add_option("--out", out_dir, "output directory (or COIPSS_OUT_DIR)");

    // sweep
    auto* sw = app.add_subcommand("sweep", "blend-parameter root locus");
    std::string sw_case, sw_param, sw_grid = "0:0.1:1";
    double sw_fixed = 0.0, sw_gain = 25.0;
    sw->add_option("case", sw_case, "case file")->required();
    sw->add_option("--param", sw_param, "beta1 or beta2")->required();
    sw->add_option("--grid", sw_grid, "start:step:stop or comma list");
    sw->add_option("--fixed", sw_fixed, "value of the other parameter");
    sw->add_option("--gain", sw_gain, "stabilizer gain");
    sw->add_option("--out", out_dir, "output directory (or COIPSS_OUT_DIR)");

    // bode
    auto* bd = app.add_subcommand("bode", "open-loop frequency response");
    std::string bd_case, bd_unit;
    double bd_b1 = 1.0, bd_b2 = 0.0, bd_delay = 0.0;
    int bd_points = 400;
    bd->add_option("case", bd_case, "case file")->required();
    bd->add_option("--unit", bd_unit, "studied generator")->required();
    bd->add_option("--beta1", bd_b1, "beta1 of the studied unit");
    bd->add_option("--beta2", bd_b2, "beta2 of the studied unit");
    bd->add_option("--delay", bd_delay, "uniform sensor delay, s");
    bd->add_option("--points", bd_points, "frequency grid size");
    bd->add_option("--out", out_dir, "output directory (or COIPSS_OUT_DIR)");

    // simulate
    auto* sim = app.add_subcommand("simulate", "time-domain scenario run");
    std::string sim_scenario;
    std::vector<std::string> sim_records;
    std::uint64_t sim_seed = 0;
    sim->add_option("scenario", sim_scenario, "scenario file")->required();
    sim->add_option("--record", sim_records, "relative speed columns, e.g. omega2-omega4");
    auto* seed_opt = sim->add_option("--seed", sim_seed, "override the scenario seed");
    sim->add_option("--out", out_dir, "output directory (or COIPSS_OUT_DIR)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (pf->parsed()) return cmd_powerflow(pf_case, pf_tol, pf_iter, out_dir, raw_args);
        if (md->parsed()) return cmd_modal(md_case, md_pss, out_dir, raw_args);
        if (sw->parsed())
            return cmd_sweep(sw_case, sw_param, sw_grid, sw_fixed, sw_gain, out_dir, raw_args);
        if (bd->parsed())
            return cmd_bode(bd_case, bd_unit, bd_b1, bd_b2, bd_delay, bd_points, out_dir, raw_args);
        if (sim->parsed())
            return cmd_simulate(sim_scenario, sim_records, sim_seed,
                                seed_opt->count() > 0, out_dir, raw_args);
    } catch (const InputError& e) {
        std::fprintf(stderr, "input error: %s\n", e.what());
        return 1;
    } catch (const NumericalError& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 1;
}
