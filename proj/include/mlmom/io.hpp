#pragma once

#include <boost/crc.hpp>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <nlohmann/json.hpp>
#include <sstream>
#include <string>

#include "dsmc.hpp"
#include "errors.hpp"
#include "kernels.hpp"
#include "moments.hpp"

namespace mlmom {

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kCodeVersion = "mlmom 1.0.0";

using json = nlohmann::json;

// ---- checksums ----

/// CRC-64/XZ of a byte string as 16 hex digits.
inline std::string checksum_hex(const std::string& bytes) {
    boost::crc_optimal<64, 0x42F0E1EBA9EA3693ULL, ~0ULL, ~0ULL, true, true> crc;
    crc.process_bytes(bytes.data(), bytes.size());
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << crc.checksum();
    return os.str();
}

// ---- trajectory CSV: t,order,value,stderr ----

inline std::string format_real(long double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17Lg", x);
    return buf;
}

inline std::string trajectory_csv(const MomentTrajectory& tr) {
    std::string out = "t,order,value,stderr\n";
    for (const auto& s : tr.snapshots)
        for (const auto& [order, lm] : s.log_m) {
            const auto it = s.std_error.find(order);
            out += format_real(s.t) + "," + format_real(order) + "," + format_real(std::exp(static_cast<long double>(lm))) +
                   "," + format_real(it == s.std_error.end() ? 0.0 : it->second) + "\n";
        }
    return out;
}

inline MomentTrajectory parse_trajectory_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line.rfind("t,order,value,stderr", 0) != 0)
        throw UsageError("trajectory csv: missing header t,order,value,stderr");
    MomentTrajectory tr;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        std::istringstream ls(line);
        std::string f[4];
        for (auto& x : f)
            if (!std::getline(ls, x, ',')) throw UsageError("trajectory csv: short row at line " + std::to_string(lineno));
        long double t, order, value, se;
        try {
            t = std::stold(f[0]);
            order = std::stold(f[1]);
            value = std::stold(f[2]);
            se = std::stold(f[3]);
        } catch (const std::exception&) {
            throw UsageError("trajectory csv: bad number at line " + std::to_string(lineno));
        }
        if (!(value > 0)) throw UsageError("trajectory csv: nonpositive moment at line " + std::to_string(lineno));
        if (tr.snapshots.empty() || tr.snapshots.back().t != static_cast<double>(t)) {
            if (!tr.snapshots.empty() && static_cast<double>(t) < tr.snapshots.back().t)
                throw UsageError("trajectory csv: times must be nondecreasing");
            tr.snapshots.emplace_back();
            tr.snapshots.back().t = static_cast<double>(t);
        }
        tr.snapshots.back().set(static_cast<double>(order), static_cast<double>(std::log(value)), static_cast<double>(se));
    }
    return tr;
}

inline MomentTrajectory read_trajectory_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open trajectory file " + path);
    return parse_trajectory_csv(in);
}

inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw UsageError("cannot write " + path);
    out << text;
}

// ---- configuration blocks ----

inline json to_json(const AngularKernel& k) {
    static const char* names[] = {"power_law", "grad_bounded", "truncated"};
    return {{"family", names[static_cast<int>(k.family)]},
            {"d", k.d},
            {"nu", k.nu},
            {"scale", k.scale},
            {"theta_min", k.theta_min}};
}

inline AngularKernel angular_from_json(const json& j) {
    const std::string fam = j.at("family");
    const int d = j.value("d", 3);
    if (fam == "grad_bounded") return AngularKernel::grad_bounded(j.at("scale"), d);
    if (fam == "power_law") return AngularKernel::power_law(j.at("nu"), j.value("scale", 1.0), d);
    if (fam == "truncated") return AngularKernel::truncated(j.at("nu"), j.at("theta_min"), j.value("scale", 1.0), d);
    throw UsageError("unknown angular kernel family '" + fam + "'");
}

inline json to_json(const CollisionKernel& k) { return {{"gamma", k.gamma}, {"angular", to_json(k.angular)}}; }
inline CollisionKernel kernel_from_json(const json& j) {
    return CollisionKernel{j.at("gamma").get<double>(), angular_from_json(j.at("angular"))};
}

inline json to_json(const InitialCondition& ic) {
    json j = {{"family", ic.name()}, {"d", ic.d}};
    switch (ic.family) {
        case InitialCondition::Family::maxwellian: j["T"] = ic.T; break;
        case InitialCondition::Family::shifted_bimaxwellian:
            j["T1"] = ic.T1;
            j["T2"] = ic.T2;
            j["dv"] = ic.dv;
            break;
        case InitialCondition::Family::compact_support: j["R"] = ic.R; break;
        case InitialCondition::Family::heavy_tail:
            j["s0"] = ic.s0;
            j["alpha0"] = ic.alpha0;
            break;
    }
    return j;
}

inline InitialCondition ic_from_json(const json& j) {
    const std::string fam = j.at("family");
    const int d = j.value("d", 3);
    if (fam == "maxwellian") return InitialCondition::maxwellian(j.at("T"), d);
    if (fam == "shifted_bimaxwellian") return InitialCondition::shifted_bimaxwellian(j.at("T1"), j.at("T2"), j.at("dv"), d);
    if (fam == "compact_support") return InitialCondition::compact_support(j.at("R"), d);
    if (fam == "heavy_tail") return InitialCondition::heavy_tail(j.at("s0"), j.at("alpha0"), d);
    throw UsageError("unknown initial condition family '" + fam + "'");
}

/// Canonical JSON of a DSMC run; the worker count is recorded but does not affect results.
inline json to_json(const RunConfig& c) {
    json j = {{"ic", to_json(c.ic)},
              {"kernel", to_json(c.kernel)},
              {"horizon", c.horizon},
              {"snapshots", c.snapshots},
              {"orders", c.orders},
              {"N", c.N},
              {"seed", c.seed},
              {"workers", c.workers},
              {"dt_policy", {{"dt_max", c.dt_max}, {"max_collision_probability", 0.1}}},
              {"entropy", c.entropy},
              {"entropy_subsample", c.entropy_subsample}};
    j["pair_budget"] = c.pair_budget ? json(*c.pair_budget) : json(nullptr);
    return j;
}

inline RunConfig run_config_from_json(const json& j) {
    RunConfig c;
    c.ic = ic_from_json(j.at("ic"));
    c.kernel = kernel_from_json(j.at("kernel"));
    c.horizon = j.at("horizon");
    c.snapshots = j.at("snapshots").get<std::vector<double>>();
    c.orders = j.at("orders").get<std::vector<double>>();
    c.N = j.at("N");
    c.seed = j.at("seed");
    c.workers = j.value("workers", 1u);
    c.dt_max = j.at("dt_policy").at("dt_max");
    c.entropy = j.value("entropy", false);
    c.entropy_subsample = j.value("entropy_subsample", std::size_t{4000});
    if (j.contains("pair_budget") && !j.at("pair_budget").is_null()) c.pair_budget = j.at("pair_budget").get<double>();
    return c;
}

/// Run manifest: the config plus provenance and output checksums.
inline json make_manifest(const std::string& command, const json& config, const json& outputs) {
    return {{"schema_version", kSchemaVersion},
            {"code_version", kCodeVersion},
            {"command", command},
            {"config", config},
            {"outputs", outputs}};
}

inline json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw UsageError(std::string("malformed JSON in ") + path + ": " + e.what());
    }
}

}  // namespace mlmom
