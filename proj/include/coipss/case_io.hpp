#pragma once

#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "coipss/errors.hpp"
#include "coipss/network.hpp"
#include "coipss/simulation.hpp"
#include "coipss/system_model.hpp"

namespace coipss {

namespace jsondetail {

using nlohmann::json;

inline const json& require(const json& j, const char* key, const std::string& ctx) {
    if (!j.is_object())
        throw InputError(ctx + ": expected an object");
    auto it = j.find(key);
    if (it == j.end())
        throw InputError(ctx + ": missing required field '" + key + "'");
    return *it;
}

template <typename T>
T require_as(const json& j, const char* key, const std::string& ctx) {
    try {
        return require(j, key, ctx).get<T>();
    } catch (const json::exception&) {
        throw InputError(ctx + ": field '" + key + "' has the wrong type");
    }
}

template <typename T>
T get_or(const json& j, const char* key, T fallback, const std::string& ctx) {
    auto it = j.find(key);
    if (it == j.end()) return fallback;
    try {
        return it->get<T>();
    } catch (const json::exception&) {
        throw InputError(ctx + ": field '" + key + "' has the wrong type");
    }
}

inline void reject_unknown(const json& j, const std::set<std::string>& allowed,
                           const std::string& ctx) {
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key()))
            throw InputError(ctx + ": unknown field '" + it.key() + "'");
}

inline json parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw InputError("'" + path + "': " + e.what());
    }
}

}  // namespace jsondetail

inline NetworkCase case_from_json(const nlohmann::json& j) {
    using namespace jsondetail;
    NetworkCase net;
    reject_unknown(j, {"name", "system_mva", "f0", "buses", "branches", "loads",
                       "generators", "sensors"},
                   "case");
    net.name = get_or<std::string>(j, "name", "", "case");
    net.system_mva = get_or<double>(j, "system_mva", 100.0, "case");
    net.f0 = get_or<double>(j, "f0", 60.0, "case");

    int bi = 0;
    for (const auto& bj : require(j, "buses", "case")) {
        const std::string ctx = "case.buses[" + std::to_string(bi++) + "]";
        reject_unknown(bj, {"id", "kind", "voltage_mag", "voltage_ang", "base_kv",
                            "shunt_b", "area"},
                       ctx);
        Bus b;
        b.id = require_as<int>(bj, "id", ctx);
        const std::string kind = require_as<std::string>(bj, "kind", ctx);
        if (kind == "slack") b.kind = BusKind::slack;
        else if (kind == "pv") b.kind = BusKind::pv;
        else if (kind == "pq") b.kind = BusKind::pq;
        else throw InputError(ctx + ": field 'kind' must be slack, pv, or pq");
        b.voltage_mag = get_or<double>(bj, "voltage_mag", 1.0, ctx);
        b.voltage_ang = get_or<double>(bj, "voltage_ang", 0.0, ctx);
        b.base_kv = get_or<double>(bj, "base_kv", 230.0, ctx);
        b.shunt_b = get_or<double>(bj, "shunt_b", 0.0, ctx);
        b.area = get_or<int>(bj, "area", 0, ctx);
        if (b.voltage_mag <= 0.0) throw InputError(ctx + ": voltage_mag must be positive");
        net.buses.push_back(b);
    }
    int ri = 0;
    for (const auto& rj : require(j, "branches", "case")) {
        const std::string ctx = "case.branches[" + std::to_string(ri++) + "]";
        reject_unknown(rj, {"from", "to", "r", "x", "b", "tap", "status"}, ctx);
        Branch br;
        br.from_bus = require_as<int>(rj, "from", ctx);
        br.to_bus = require_as<int>(rj, "to", ctx);
        br.series_r = get_or<double>(rj, "r", 0.0, ctx);
        br.series_x = require_as<double>(rj, "x", ctx);
        br.shunt_b = get_or<double>(rj, "b", 0.0, ctx);
        br.tap = get_or<double>(rj, "tap", 1.0, ctx);
        br.status = get_or<bool>(rj, "status", true, ctx);
        net.branches.push_back(br);
    }
    int li = 0;
    for (const auto& lj : get_or<nlohmann::json>(j, "loads", nlohmann::json::array(), "case")) {
        const std::string ctx = "case.loads[" + std::to_string(li++) + "]";
        reject_unknown(lj, {"bus", "p", "q"}, ctx);
        LoadModel l;
        l.bus = require_as<int>(lj, "bus", ctx);
        l.p0 = require_as<double>(lj, "p", ctx);
        l.q0 = get_or<double>(lj, "q", 0.0, ctx);
        net.loads.push_back(l);
    }
    int gi = 0;
    for (const auto& gj : require(j, "generators", "case")) {
        const std::string ctx = "case.generators[" + std::to_string(gi++) + "]";
        reject_unknown(gj, {"name", "bus", "p_dispatch", "online", "machine",
                            "exciter", "governor", "pss"},
                       ctx);
        Generator g;
        g.name = require_as<std::string>(gj, "name", ctx);
        g.bus = require_as<int>(gj, "bus", ctx);
        g.p_dispatch = get_or<double>(gj, "p_dispatch", 0.0, ctx);
        g.online = get_or<bool>(gj, "online", true, ctx);

        const auto& mj = require(gj, "machine", ctx);
        const std::string mctx = ctx + ".machine";
        reject_unknown(mj, {"mva", "h", "d", "xd", "xq", "xd_p", "xq_p", "td0_p",
                            "tq0_p"},
                       mctx);
        g.machine.mva_base = require_as<double>(mj, "mva", mctx);
        g.machine.h = require_as<double>(mj, "h", mctx);
        g.machine.d = get_or<double>(mj, "d", 0.0, mctx);
        g.machine.xd = require_as<double>(mj, "xd", mctx);
        g.machine.xq = require_as<double>(mj, "xq", mctx);
        g.machine.xd_p = require_as<double>(mj, "xd_p", mctx);
        g.machine.xq_p = require_as<double>(mj, "xq_p", mctx);
        g.machine.td0_p = require_as<double>(mj, "td0_p", mctx);
        g.machine.tq0_p = require_as<double>(mj, "tq0_p", mctx);

        if (gj.contains("exciter")) {
            const auto& ej = gj["exciter"];
            const std::string ectx = ctx + ".exciter";
            reject_unknown(ej, {"ka", "ta", "efd_min", "efd_max"}, ectx);
            g.exciter.ka = require_as<double>(ej, "ka", ectx);
            g.exciter.ta = require_as<double>(ej, "ta", ectx);
            g.exciter.efd_min = get_or<double>(ej, "efd_min", -6.0, ectx);
            g.exciter.efd_max = get_or<double>(ej, "efd_max", 6.0, ectx);
        } else {
            g.exciter.ka = 0.0;  // constant field voltage
        }
        if (gj.contains("governor")) {
            const auto& vj = gj["governor"];
            const std::string vctx = ctx + ".governor";
            reject_unknown(vj, {"droop_r", "tg", "tt", "pmax"}, vctx);
            g.governor.droop_r = require_as<double>(vj, "droop_r", vctx);
            g.governor.tg = get_or<double>(vj, "tg", 0.2, vctx);
            g.governor.tt = get_or<double>(vj, "tt", 0.5, vctx);
            g.governor.pmax = get_or<double>(vj, "pmax", 1.1, vctx);
        } else {
            g.governor.droop_r = 0.0;  // constant mechanical power
        }
        if (gj.contains("pss")) {
            const auto& pj = gj["pss"];
            const std::string pctx = ctx + ".pss";
            reject_unknown(pj, {"beta1", "beta2", "gain_k", "washout_tw", "leadlag",
                                "vs_min", "vs_max"},
                           pctx);
            PssConfig p;
            p.beta1 = require_as<double>(pj, "beta1", pctx);
            p.beta2 = require_as<double>(pj, "beta2", pctx);
            p.gain_k = require_as<double>(pj, "gain_k", pctx);
            p.washout_tw = get_or<double>(pj, "washout_tw", 10.0, pctx);
            if (pj.contains("leadlag")) {
                p.leadlag_stages.clear();
                for (const auto& st : pj["leadlag"]) {
                    if (!st.is_array() || st.size() != 2)
                        throw InputError(pctx + ": 'leadlag' entries must be [t_num, t_den]");
                    p.leadlag_stages.emplace_back(st[0].get<double>(), st[1].get<double>());
                }
            }
            p.vs_min = get_or<double>(pj, "vs_min", -0.1, pctx);
            p.vs_max = get_or<double>(pj, "vs_max", 0.1, pctx);
            p.validate();
            g.pss = p;
        }
        net.generators.push_back(g);
    }
    int si = 0;
    for (const auto& sj : get_or<nlohmann::json>(j, "sensors", nlohmann::json::array(), "case")) {
        const std::string ctx = "case.sensors[" + std::to_string(si++) + "]";
        reject_unknown(sj, {"id", "bus", "weight", "delay_mean", "jitter_std",
                            "drop_prob", "report_period", "filter_tc",
                            "outage_start", "outage_end"},
                       ctx);
        SensorSpec s;
        s.sensor_id = require_as<int>(sj, "id", ctx);
        s.bus = require_as<int>(sj, "bus", ctx);
        s.weight = get_or<double>(sj, "weight", 0.0, ctx);
        s.delay_mean = get_or<double>(sj, "delay_mean", 0.0, ctx);
        s.jitter_std = get_or<double>(sj, "jitter_std", 0.0, ctx);
        s.drop_prob = get_or<double>(sj, "drop_prob", 0.0, ctx);
        s.report_period = get_or<double>(sj, "report_period", 0.03, ctx);
        s.filter_tc = get_or<double>(sj, "filter_tc", 0.02, ctx);
        s.outage_start = get_or<double>(sj, "outage_start", -1.0, ctx);
        s.outage_end = get_or<double>(sj, "outage_end", -1.0, ctx);
        if (s.report_period <= 0.0)
            throw InputError(ctx + ": report_period must be positive");
        net.sensors.push_back(s);
    }

    // referential checks
    for (const auto& br : net.branches) {
        net.bus_index(br.from_bus);
        net.bus_index(br.to_bus);
    }
    for (const auto& l : net.loads) net.bus_index(l.bus);
    for (const auto& g : net.generators) net.bus_index(g.bus);
    for (const auto& s : net.sensors) net.bus_index(s.bus);
    return net;
}

inline nlohmann::json case_to_json(const NetworkCase& net) {
    nlohmann::json j;
    j["name"] = net.name;
    j["system_mva"] = net.system_mva;
    j["f0"] = net.f0;
    j["buses"] = nlohmann::json::array();
    for (const auto& b : net.buses) {
        nlohmann::json bj;
        bj["id"] = b.id;
        bj["kind"] = b.kind == BusKind::slack ? "slack"
                     : b.kind == BusKind::pv ? "pv"
                                             : "pq";
        bj["voltage_mag"] = b.voltage_mag;
        bj["voltage_ang"] = b.voltage_ang;
        bj["base_kv"] = b.base_kv;
        bj["shunt_b"] = b.shunt_b;
        bj["area"] = b.area;
        j["buses"].push_back(bj);
    }
    j["branches"] = nlohmann::json::array();
    for (const auto& br : net.branches) {
        nlohmann::json rj;
        rj["from"] = br.from_bus;
        rj["to"] = br.to_bus;
        rj["r"] = br.series_r;
        rj["x"] = br.series_x;
        rj["b"] = br.shunt_b;
        rj["tap"] = br.tap;
        rj["status"] = br.status;
        j["branches"].push_back(rj);
    }
    j["loads"] = nlohmann::json::array();
    for (const auto& l : net.loads) {
        nlohmann::json lj;
        lj["bus"] = l.bus;
        lj["p"] = l.p0;
        lj["q"] = l.q0;
        j["loads"].push_back(lj);
    }
    j["generators"] = nlohmann::json::array();
    for (const auto& g : net.generators) {
        nlohmann::json gj;
        gj["name"] = g.name;
        gj["bus"] = g.bus;
        gj["p_dispatch"] = g.p_dispatch;
        gj["online"] = g.online;
        gj["machine"] = {{"mva", g.machine.mva_base}, {"h", g.machine.h},
                         {"d", g.machine.d},          {"xd", g.machine.xd},
                         {"xq", g.machine.xq},        {"xd_p", g.machine.xd_p},
                         {"xq_p", g.machine.xq_p},    {"td0_p", g.machine.td0_p},
                         {"tq0_p", g.machine.tq0_p}};
        if (g.exciter.ka > 0.0)
            gj["exciter"] = {{"ka", g.exciter.ka},
                             {"ta", g.exciter.ta},
                             {"efd_min", g.exciter.efd_min},
                             {"efd_max", g.exciter.efd_max}};
        if (g.governor.droop_r > 0.0)
            gj["governor"] = {{"droop_r", g.governor.droop_r},
                              {"tg", g.governor.tg},
                              {"tt", g.governor.tt},
                              {"pmax", g.governor.pmax}};
        if (g.pss) {
            nlohmann::json pj;
            pj["beta1"] = g.pss->beta1;
            pj["beta2"] = g.pss->beta2;
            pj["gain_k"] = g.pss->gain_k;
            pj["washout_tw"] = g.pss->washout_tw;
            pj["leadlag"] = nlohmann::json::array();
            for (const auto& [tn, td] : g.pss->leadlag_stages)
                pj["leadlag"].push_back({tn, td});
            pj["vs_min"] = g.pss->vs_min;
            pj["vs_max"] = g.pss->vs_max;
            gj["pss"] = pj;
        }
        j["generators"].push_back(gj);
    }
    j["sensors"] = nlohmann::json::array();
    for (const auto& s : net.sensors) {
        nlohmann::json sj;
        sj["id"] = s.sensor_id;
        sj["bus"] = s.bus;
        sj["weight"] = s.weight;
        sj["delay_mean"] = s.delay_mean;
        sj["jitter_std"] = s.jitter_std;
        sj["drop_prob"] = s.drop_prob;
        sj["report_period"] = s.report_period;
        sj["filter_tc"] = s.filter_tc;
        if (s.outage_start >= 0.0) {
            sj["outage_start"] = s.outage_start;
            sj["outage_end"] = s.outage_end;
        }
        j["sensors"].push_back(sj);
    }
    return j;
}

inline NetworkCase load_case(const std::string& path) {
    return case_from_json(jsondetail::parse_file(path));
}

inline void save_case(const NetworkCase& net, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot open '" + path + "' for writing");
    out << case_to_json(net).dump(2) << "\n";
}

/// Partial per-unit stabilizer overrides: fields present replace the case
/// values; unknown unit names are an error.
inline void apply_pss_overrides(NetworkCase& net, const nlohmann::json& overrides) {
    using namespace jsondetail;
    for (auto it = overrides.begin(); it != overrides.end(); ++it) {
        const int gi = net.generator_index(it.key());
        Generator& g = net.generators[static_cast<std::size_t>(gi)];
        if (!g.pss)
            throw InputError("generator '" + it.key() + "' carries no stabilizer block");
        const std::string ctx = "pss override '" + it.key() + "'";
        reject_unknown(*it, {"beta1", "beta2", "gain_k", "washout_tw", "vs_min",
                             "vs_max"},
                       ctx);
        g.pss->beta1 = get_or<double>(*it, "beta1", g.pss->beta1, ctx);
        g.pss->beta2 = get_or<double>(*it, "beta2", g.pss->beta2, ctx);
        g.pss->gain_k = get_or<double>(*it, "gain_k", g.pss->gain_k, ctx);
        g.pss->washout_tw = get_or<double>(*it, "washout_tw", g.pss->washout_tw, ctx);
        g.pss->vs_min = get_or<double>(*it, "vs_min", g.pss->vs_min, ctx);
        g.pss->vs_max = get_or<double>(*it, "vs_max", g.pss->vs_max, ctx);
        g.pss->validate();
    }
}

struct LoadedScenario {
    std::string case_path;
    NetworkCase net;         // with scenario overrides applied
    Scenario scenario;
    WamsSynthesis wams = WamsSynthesis::exact_coi;
};

/// Scenario file: case reference, horizon, events, measurement mode, per-unit
/// stabilizer overrides, and channel overrides applied to every sensor.
inline LoadedScenario load_scenario(const std::string& path) {
    using namespace jsondetail;
    const auto j = parse_file(path);
    reject_unknown(j, {"case", "t_end", "dt", "seed", "wams", "events", "pss",
                       "record_pairs", "channels"},
                   "scenario");
    LoadedScenario out;
    out.case_path = require_as<std::string>(j, "case", "scenario");
    std::string dir = path;
    const auto slash = dir.find_last_of('/');
    dir = slash == std::string::npos ? std::string(".") : dir.substr(0, slash);
    const std::string resolved = out.case_path.front() == '/'
                                     ? out.case_path
                                     : dir + "/" + out.case_path;
    out.net = load_case(resolved);
    out.case_path = resolved;

    out.scenario.t_end = get_or<double>(j, "t_end", 21.0, "scenario");
    out.scenario.dt = get_or<double>(j, "dt", 0.005, "scenario");
    out.scenario.seed = get_or<std::uint64_t>(j, "seed", 1, "scenario");

    const std::string wams = get_or<std::string>(j, "wams", "ideal_coi", "scenario");
    if (wams == "ideal_coi") out.wams = WamsSynthesis::exact_coi;
    else if (wams == "sensors") out.wams = WamsSynthesis::external;
    else throw InputError("scenario: field 'wams' must be ideal_coi or sensors");

    int ei = 0;
    for (const auto& evj : get_or<nlohmann::json>(j, "events", nlohmann::json::array(), "scenario")) {
        const std::string ctx = "scenario.events[" + std::to_string(ei++) + "]";
        reject_unknown(evj, {"time", "kind", "target", "magnitude"}, ctx);
        Event ev;
        ev.time = require_as<double>(evj, "time", ctx);
        const std::string kind = require_as<std::string>(evj, "kind", ctx);
        if (kind == "gen_trip") ev.kind = EventKind::gen_trip;
        else if (kind == "vref_step") ev.kind = EventKind::vref_step;
        else if (kind == "load_step") ev.kind = EventKind::load_step;
        else throw InputError(ctx + ": kind must be gen_trip, vref_step, or load_step");
        ev.target = require_as<std::string>(evj, "target", ctx);
        ev.magnitude = get_or<double>(evj, "magnitude", 0.0, ctx);
        out.scenario.events.push_back(ev);
    }
    if (j.contains("pss")) apply_pss_overrides(out.net, j["pss"]);
    if (j.contains("channels")) {
        const auto& cj = j["channels"];
        reject_unknown(cj, {"delay_mean", "jitter_std", "drop_prob", "report_period",
                            "filter_tc", "outage_start", "outage_end"},
                       "scenario.channels");
        for (auto& s : out.net.sensors) {
            s.delay_mean = get_or<double>(cj, "delay_mean", s.delay_mean, "scenario.channels");
            s.jitter_std = get_or<double>(cj, "jitter_std", s.jitter_std, "scenario.channels");
            s.drop_prob = get_or<double>(cj, "drop_prob", s.drop_prob, "scenario.channels");
            s.report_period =
                get_or<double>(cj, "report_period", s.report_period, "scenario.channels");
            s.filter_tc = get_or<double>(cj, "filter_tc", s.filter_tc, "scenario.channels");
            s.outage_start =
                get_or<double>(cj, "outage_start", s.outage_start, "scenario.channels");
            s.outage_end = get_or<double>(cj, "outage_end", s.outage_end, "scenario.channels");
        }
    }
    for (const auto& pj : get_or<nlohmann::json>(j, "record_pairs", nlohmann::json::array(), "scenario")) {
        if (!pj.is_array() || pj.size() != 2)
            throw InputError("scenario: record_pairs entries must be [unit_a, unit_b]");
        out.scenario.speed_pairs.emplace_back(pj[0].get<std::string>(),
                                              pj[1].get<std::string>());
    }
    return out;
}

}  // namespace coipss
