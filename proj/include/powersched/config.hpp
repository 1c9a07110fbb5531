#pragma once

#include <cmath>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <string>
#include <vector>

#include <json.hpp>

#include "powersched/channel.hpp"
#include "powersched/csv.hpp"
#include "powersched/errors.hpp"
#include "powersched/model.hpp"
#include "powersched/sched.hpp"
#include "powersched/sim.hpp"

namespace powersched {

using Json = nlohmann::json;

namespace detail {

inline void require_keys(const Json& j, std::initializer_list<const char*> allowed,
                         const std::string& where) {
    if (!j.is_object()) throw ConfigError("config: " + where + " must be an object");
    for (const auto& item : j.items()) {
        bool known = false;
        for (const char* key : allowed)
            if (item.key() == key) {
                known = true;
                break;
            }
        if (!known)
            throw ConfigError("config: unknown key \"" + item.key() + "\" in " + where);
    }
}

inline double get_finite(const Json& j, const std::string& where) {
    if (!j.is_number())
        throw ConfigError("config: " + where + " must be a number");
    const double v = j.get<double>();
    if (!std::isfinite(v)) throw ConfigError("config: " + where + " must be finite");
    return v;
}

inline double num_or(const Json& parent, const char* key, double fallback,
                     const std::string& where) {
    if (!parent.contains(key)) return fallback;
    return get_finite(parent.at(key), where + "." + key);
}

inline double num_req(const Json& parent, const char* key, const std::string& where) {
    if (!parent.contains(key))
        throw ConfigError("config: missing required key " + where + "." + key);
    return get_finite(parent.at(key), where + "." + key);
}

inline std::int64_t int_or(const Json& parent, const char* key, std::int64_t fallback,
                           const std::string& where) {
    if (!parent.contains(key)) return fallback;
    const Json& j = parent.at(key);
    if (!j.is_number_integer() && !j.is_number_unsigned())
        throw ConfigError("config: " + where + "." + key + " must be an integer");
    return j.get<std::int64_t>();
}

inline std::uint64_t uint_or(const Json& parent, const char* key, std::uint64_t fallback,
                             const std::string& where) {
    if (!parent.contains(key)) return fallback;
    const Json& j = parent.at(key);
    if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<std::int64_t>() >= 0))
        throw ConfigError("config: " + where + "." + key +
                          " must be a non-negative integer");
    return j.get<std::uint64_t>();
}

inline Mat json_to_mat(const Json& j, const std::string& where) {
    if (!j.is_array() || j.empty() || !j.front().is_array())
        throw ConfigError("config: " + where + " must be a nested array of rows");
    const auto rows = j.size();
    const auto cols = j.front().size();
    if (cols == 0) throw ConfigError("config: " + where + " has an empty row");
    Mat M(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
        const Json& row = j.at(r);
        if (!row.is_array() || row.size() != cols)
            throw ConfigError("config: " + where + " rows have inconsistent lengths");
        for (std::size_t c = 0; c < cols; ++c)
            M(r, c) = get_finite(row.at(c), where);
    }
    return M;
}

inline Vec json_to_vec(const Json& j, const std::string& where) {
    if (!j.is_array() || j.empty())
        throw ConfigError("config: " + where + " must be a non-empty array");
    Vec v(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) v(i) = get_finite(j.at(i), where);
    return v;
}

inline Json mat_to_json(const Mat& M) {
    Json rows = Json::array();
    for (Eigen::Index r = 0; r < M.rows(); ++r) {
        Json row = Json::array();
        for (Eigen::Index c = 0; c < M.cols(); ++c) row.push_back(M(r, c));
        rows.push_back(row);
    }
    return rows;
}

inline Json vec_to_json(const Vec& v) {
    Json arr = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
    return arr;
}

inline GridSpec grid_from_json(const Json& j, const std::string& where) {
    GridSpec grid;
    grid.e_max = num_or(j, "e_max", 0.0, where);
    grid.n_e = static_cast<int>(int_or(j, "n_e", grid.n_e, where));
    grid.n_a = static_cast<int>(int_or(j, "n_a", grid.n_a, where));
    grid.n_quad = static_cast<int>(int_or(j, "n_quad", grid.n_quad, where));
    grid.n_q = static_cast<int>(int_or(j, "n_q", grid.n_q, where));
    return grid;
}

inline void grid_to_json(Json& j, const GridSpec& grid) {
    j["e_max"] = grid.e_max;
    j["n_e"] = grid.n_e;
    j["n_a"] = grid.n_a;
    j["n_quad"] = grid.n_quad;
    j["n_q"] = grid.n_q;
}

}  // namespace detail

// The built-in defaults are the second-order benchmark system the test
// suite and the bundled experiment configs revolve around.
inline ExperimentSpec default_config() {
    ExperimentSpec spec;
    spec.model.A = (Mat(2, 2) << 1.3, 0.0, 0.0, -1.1).finished();
    spec.model.B = (Mat(2, 1) << 0.1, 0.1).finished();
    spec.model.W = 0.001 * Mat::Identity(2, 2);
    spec.model.Q = Mat::Identity(2, 2);
    spec.model.R = Mat::Identity(1, 1);
    spec.model.Q_N = Mat::Identity(2, 2);
    spec.model.xbar0 = Vec::Zero(2);
    spec.model.X0 = 0.01 * Mat::Identity(2, 2);
    spec.model.gamma = 0.9;
    spec.ch = ChannelModel{3.0, 1.0, 3.0};
    spec.dist = UniformAttack{0.0, 1.0};
    spec.sched = GreedyKnown{};
    spec.lambda = 1.0;
    spec.horizon = 100;
    spec.trials = 20000;
    spec.master_seed = 12345;
    spec.gains_mode = GainsMode::stationary;
    spec.record_traces = false;
    return spec;
}

inline AttackDistribution attack_from_json(const Json& j) {
    if (!j.contains("kind")) throw ConfigError("config: attack.kind is required");
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "uniform") {
        detail::require_keys(j, {"kind", "lo", "hi"}, "attack");
        UniformAttack d;
        d.lo = detail::num_or(j, "lo", 0.0, "attack");
        d.hi = detail::num_or(j, "hi", 1.0, "attack");
        return d;
    }
    if (kind == "poisson") {
        detail::require_keys(j, {"kind", "rate", "cap"}, "attack");
        PoissonAttack d;
        d.rate = detail::num_req(j, "rate", "attack");
        d.cap = static_cast<int>(detail::int_or(j, "cap", -1, "attack"));
        return d;
    }
    if (kind == "truncnorm") {
        detail::require_keys(j, {"kind", "mu", "sigma", "lo", "hi"}, "attack");
        TruncNormAttack d;
        d.mu = detail::num_req(j, "mu", "attack");
        d.sigma = detail::num_req(j, "sigma", "attack");
        d.lo = detail::num_req(j, "lo", "attack");
        d.hi = detail::num_req(j, "hi", "attack");
        return d;
    }
    if (kind == "degenerate") {
        detail::require_keys(j, {"kind", "value"}, "attack");
        return DegenerateAttack{detail::num_req(j, "value", "attack")};
    }
    throw ConfigError("config: unknown attack kind \"" + kind + "\"");
}

inline Json attack_to_json(const AttackDistribution& dist) {
    Json j;
    std::visit(
        [&](const auto& d) {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, UniformAttack>) {
                j["kind"] = "uniform";
                j["lo"] = d.lo;
                j["hi"] = d.hi;
            } else if constexpr (std::is_same_v<T, PoissonAttack>) {
                j["kind"] = "poisson";
                j["rate"] = d.rate;
                j["cap"] = poisson_cap(d);  // echo the resolved truncation point
            } else if constexpr (std::is_same_v<T, TruncNormAttack>) {
                j["kind"] = "truncnorm";
                j["mu"] = d.mu;
                j["sigma"] = d.sigma;
                j["lo"] = d.lo;
                j["hi"] = d.hi;
            } else {
                j["kind"] = "degenerate";
                j["value"] = d.value;
            }
        },
        dist);
    return j;
}

inline SchedulerSpec scheduler_from_json(const Json& j) {
    if (!j.contains("kind")) throw ConfigError("config: scheduler.kind is required");
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "greedy") {
        detail::require_keys(j, {"kind"}, "scheduler");
        return GreedyKnown{};
    }
    if (kind == "greedy_mean") {
        detail::require_keys(j, {"kind"}, "scheduler");
        return GreedyMean{};
    }
    if (kind == "constant") {
        detail::require_keys(j, {"kind", "p"}, "scheduler");
        return ConstantPower{detail::num_req(j, "p", "scheduler")};
    }
    if (kind == "optimal_constant") {
        detail::require_keys(j, {"kind"}, "scheduler");
        return OptimalConstant{};
    }
    if (kind == "dp_finite") {
        detail::require_keys(j, {"kind", "e_max", "n_e", "n_a", "n_quad", "n_q"},
                             "scheduler");
        return GridDPFinite{detail::grid_from_json(j, "scheduler")};
    }
    if (kind == "dp_infinite") {
        detail::require_keys(j, {"kind", "e_max", "n_e", "n_a", "n_quad", "n_q", "tol"},
                             "scheduler");
        GridDPInfinite s;
        s.grid = detail::grid_from_json(j, "scheduler");
        s.tol = detail::num_or(j, "tol", s.tol, "scheduler");
        if (!(s.tol > 0.0)) throw ConfigError("config: scheduler.tol must be > 0");
        return s;
    }
    throw ConfigError("config: unknown scheduler kind \"" + kind + "\"");
}

inline Json scheduler_to_json(const SchedulerSpec& spec) {
    Json j;
    std::visit(
        [&](const auto& s) {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, GreedyKnown>) {
                j["kind"] = "greedy";
            } else if constexpr (std::is_same_v<T, GreedyMean>) {
                j["kind"] = "greedy_mean";
            } else if constexpr (std::is_same_v<T, ConstantPower>) {
                j["kind"] = "constant";
                j["p"] = s.p;
            } else if constexpr (std::is_same_v<T, OptimalConstant>) {
                j["kind"] = "optimal_constant";
            } else if constexpr (std::is_same_v<T, GridDPFinite>) {
                j["kind"] = "dp_finite";
                detail::grid_to_json(j, s.grid);
            } else {
                j["kind"] = "dp_infinite";
                detail::grid_to_json(j, s.grid);
                j["tol"] = s.tol;
            }
        },
        spec);
    return j;
}

inline ExperimentSpec config_from_json(const Json& root) {
    detail::require_keys(root, {"system", "channel", "attack", "scheduler", "experiment"},
                         "top level");
    ExperimentSpec spec = default_config();
    if (root.contains("system")) {
        const Json& sys = root.at("system");
        detail::require_keys(
            sys, {"A", "B", "W", "Q", "R", "Q_N", "xbar0", "X0", "gamma"}, "system");
        if (sys.contains("A")) spec.model.A = detail::json_to_mat(sys.at("A"), "system.A");
        if (sys.contains("B")) spec.model.B = detail::json_to_mat(sys.at("B"), "system.B");
        const auto n = spec.model.A.rows();
        const auto m = spec.model.B.cols();
        // Size-dependent defaults track the configured plant dimensions.
        if (root.at("system").contains("A") || root.at("system").contains("B")) {
            spec.model.W = sys.contains("W") ? detail::json_to_mat(sys.at("W"), "system.W")
                                             : Mat(0.001 * Mat::Identity(n, n));
            spec.model.Q = sys.contains("Q") ? detail::json_to_mat(sys.at("Q"), "system.Q")
                                             : Mat(Mat::Identity(n, n));
            spec.model.R = sys.contains("R") ? detail::json_to_mat(sys.at("R"), "system.R")
                                             : Mat(Mat::Identity(m, m));
            spec.model.Q_N = sys.contains("Q_N")
                                 ? detail::json_to_mat(sys.at("Q_N"), "system.Q_N")
                                 : spec.model.Q;
            spec.model.xbar0 = sys.contains("xbar0")
                                   ? detail::json_to_vec(sys.at("xbar0"), "system.xbar0")
                                   : Vec(Vec::Zero(n));
            spec.model.X0 = sys.contains("X0")
                                ? detail::json_to_mat(sys.at("X0"), "system.X0")
                                : Mat(0.01 * Mat::Identity(n, n));
        } else {
            if (sys.contains("W")) spec.model.W = detail::json_to_mat(sys.at("W"), "system.W");
            if (sys.contains("Q")) spec.model.Q = detail::json_to_mat(sys.at("Q"), "system.Q");
            if (sys.contains("R")) spec.model.R = detail::json_to_mat(sys.at("R"), "system.R");
            if (sys.contains("Q_N"))
                spec.model.Q_N = detail::json_to_mat(sys.at("Q_N"), "system.Q_N");
            if (sys.contains("xbar0"))
                spec.model.xbar0 = detail::json_to_vec(sys.at("xbar0"), "system.xbar0");
            if (sys.contains("X0"))
                spec.model.X0 = detail::json_to_mat(sys.at("X0"), "system.X0");
        }
        spec.model.gamma = detail::num_or(sys, "gamma", spec.model.gamma, "system");
    }
    if (root.contains("channel")) {
        const Json& ch = root.at("channel");
        detail::require_keys(ch, {"alpha", "sigma2", "p_max"}, "channel");
        spec.ch.alpha = detail::num_or(ch, "alpha", spec.ch.alpha, "channel");
        spec.ch.sigma2 = detail::num_or(ch, "sigma2", spec.ch.sigma2, "channel");
        spec.ch.p_max = detail::num_or(ch, "p_max", spec.ch.p_max, "channel");
    }
    if (root.contains("attack")) spec.dist = attack_from_json(root.at("attack"));
    if (root.contains("scheduler")) spec.sched = scheduler_from_json(root.at("scheduler"));
    if (root.contains("experiment")) {
        const Json& ex = root.at("experiment");
        detail::require_keys(
            ex, {"lambda", "horizon", "trials", "seed", "gains_mode", "record_traces"},
            "experiment");
        spec.lambda = detail::num_or(ex, "lambda", spec.lambda, "experiment");
        spec.horizon =
            static_cast<int>(detail::int_or(ex, "horizon", spec.horizon, "experiment"));
        spec.trials = detail::uint_or(ex, "trials", spec.trials, "experiment");
        spec.master_seed = detail::uint_or(ex, "seed", spec.master_seed, "experiment");
        if (ex.contains("gains_mode")) {
            const std::string mode = ex.at("gains_mode").get<std::string>();
            if (mode == "stationary")
                spec.gains_mode = GainsMode::stationary;
            else if (mode == "finite-backward")
                spec.gains_mode = GainsMode::finite_backward;
            else
                throw ConfigError("config: experiment.gains_mode must be \"stationary\" or "
                                  "\"finite-backward\"");
        }
        if (ex.contains("record_traces")) {
            if (!ex.at("record_traces").is_boolean())
                throw ConfigError("config: experiment.record_traces must be a boolean");
            spec.record_traces = ex.at("record_traces").get<bool>();
        }
    }
    return spec;
}

inline Json config_to_json(const ExperimentSpec& spec) {
    Json root;
    Json sys;
    sys["A"] = detail::mat_to_json(spec.model.A);
    sys["B"] = detail::mat_to_json(spec.model.B);
    sys["W"] = detail::mat_to_json(spec.model.W);
    sys["Q"] = detail::mat_to_json(spec.model.Q);
    sys["R"] = detail::mat_to_json(spec.model.R);
    sys["Q_N"] = detail::mat_to_json(spec.model.Q_N);
    sys["xbar0"] = detail::vec_to_json(spec.model.xbar0);
    sys["X0"] = detail::mat_to_json(spec.model.X0);
    sys["gamma"] = spec.model.gamma;
    root["system"] = sys;
    root["channel"] = {{"alpha", spec.ch.alpha},
                       {"sigma2", spec.ch.sigma2},
                       {"p_max", spec.ch.p_max}};
    root["attack"] = attack_to_json(spec.dist);
    root["scheduler"] = scheduler_to_json(spec.sched);
    root["experiment"] = {
        {"lambda", spec.lambda},
        {"horizon", spec.horizon},
        {"trials", spec.trials},
        {"seed", spec.master_seed},
        {"gains_mode",
         spec.gains_mode == GainsMode::stationary ? "stationary" : "finite-backward"},
        {"record_traces", spec.record_traces}};
    return root;
}

inline ExperimentSpec load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read config file: " + path.string());
    Json root;
    try {
        root = Json::parse(in);
    } catch (const Json::exception& ex) {
        throw ConfigError("config parse error in " + path.string() + ": " + ex.what());
    }
    return config_from_json(root);
}

struct RunManifest {
    Json config;
    std::string version;
    std::string timestamp;
    std::uint64_t master_seed = 0;
    std::vector<std::string> outputs;

    Json to_json() const {
        return Json{{"config", config},
                    {"version", version},
                    {"timestamp", timestamp},
                    {"master_seed", master_seed},
                    {"outputs", outputs}};
    }
};

inline std::string utc_timestamp() {
    const std::time_t now = std::time(nullptr);
    std::tm tm_utc{};
    gmtime_r(&now, &tm_utc);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    return buf;
}

inline RunManifest make_manifest(const ExperimentSpec& spec,
                                 std::vector<std::string> outputs) {
    RunManifest man;
    man.config = config_to_json(spec);
#ifdef POWERSCHED_VERSION
    man.version = POWERSCHED_VERSION;
#else
    man.version = "unknown";
#endif
    man.timestamp = utc_timestamp();
    man.master_seed = spec.master_seed;
    man.outputs = std::move(outputs);
    return man;
}

inline void write_manifest(const std::filesystem::path& dir, const RunManifest& man) {
    write_text_atomic(dir / "manifest.json", man.to_json().dump(2) + "\n");
}

}  // namespace powersched
