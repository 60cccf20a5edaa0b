#pragma once

#include <cstdio>
#include <fstream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "nsmpi/engine.hpp"
#include "nsmpi/mdp.hpp"
#include "nsmpi/tight.hpp"

namespace nsmpi {

/// MDP on-disk schema:
///   { "num_states": S, "num_actions": A, "discount": g,
///     "rewards": [[r(s,a) ...] ...],
///     "transitions": [[[ [next_state, prob], ... ] ...] ...] }
/// Finite doubles survive a save/load round trip bit-for-bit.
inline nlohmann::json mdp_to_json(const FiniteMdp& mdp) {
    nlohmann::json j;
    j["num_states"] = mdp.num_states();
    j["num_actions"] = mdp.num_actions();
    j["discount"] = mdp.discount();
    auto& rewards = j["rewards"] = nlohmann::json::array();
    auto& transitions = j["transitions"] = nlohmann::json::array();
    for (int s = 0; s < mdp.num_states(); ++s) {
        nlohmann::json row_r = nlohmann::json::array();
        nlohmann::json row_t = nlohmann::json::array();
        for (int a = 0; a < mdp.num_actions(); ++a) {
            row_r.push_back(mdp.reward(s, a));
            nlohmann::json entries = nlohmann::json::array();
            for (const Transition& t : mdp.transitions(s, a))
                entries.push_back({t.next_state, t.probability});
            row_t.push_back(std::move(entries));
        }
        rewards.push_back(std::move(row_r));
        transitions.push_back(std::move(row_t));
    }
    return j;
}

/// Parses the schema above; throws std::invalid_argument on structural
/// problems and lets FiniteMdp reject stochastic violations.
inline FiniteMdp mdp_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("num_states") || !j.contains("num_actions") ||
        !j.contains("discount") || !j.contains("rewards") || !j.contains("transitions"))
        throw std::invalid_argument("mdp_from_json: missing required fields");
    const int num_states = j.at("num_states").get<int>();
    const int num_actions = j.at("num_actions").get<int>();
    const double discount = j.at("discount").get<double>();
    auto rewards = j.at("rewards").get<std::vector<std::vector<double>>>();
    const auto& jt = j.at("transitions");
    if (!jt.is_array()) throw std::invalid_argument("mdp_from_json: transitions must be an array");
    std::vector<std::vector<std::vector<Transition>>> transitions;
    transitions.reserve(jt.size());
    for (const auto& per_state : jt) {
        std::vector<std::vector<Transition>> rows;
        rows.reserve(per_state.size());
        for (const auto& per_action : per_state) {
            std::vector<Transition> row;
            row.reserve(per_action.size());
            for (const auto& entry : per_action) {
                if (!entry.is_array() || entry.size() != 2)
                    throw std::invalid_argument(
                        "mdp_from_json: transition entries must be [next_state, prob] pairs");
                row.push_back({entry.at(0).get<int>(), entry.at(1).get<double>()});
            }
            rows.push_back(std::move(row));
        }
        transitions.push_back(std::move(rows));
    }
    return FiniteMdp(num_states, num_actions, discount, std::move(rewards),
                     std::move(transitions));
}

inline void save_mdp(const FiniteMdp& mdp, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_mdp: cannot open " + path);
    out << mdp_to_json(mdp).dump(2) << '\n';
}

inline FiniteMdp load_mdp(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("load_mdp: cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument("load_mdp: " + std::string(e.what()));
    }
    try {
        return mdp_from_json(j);
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument("load_mdp: " + std::string(e.what()));
    }
}

/// Run trace: configuration plus every iteration record. loss_sup is omitted
/// when no optimal value was supplied (JSON has no NaN).
inline nlohmann::json trace_to_json(const NsmpiConfig& config,
                                    const std::vector<IterationRecord>& records) {
    nlohmann::json j;
    auto& jc = j["config"];
    if (config.m.is_infinite())
        jc["m"] = "inf";
    else
        jc["m"] = config.m.count();
    jc["ell"] = config.ell;
    jc["iterations"] = config.iterations;
    jc["eval_tolerance"] = config.eval_tolerance;
    jc["eval_max_iters"] = config.eval_max_iters;
    jc["v0"] = config.v0;
    jc["initial_policies"] = config.initial_policies;
    auto& jr = j["records"] = nlohmann::json::array();
    for (const IterationRecord& rec : records) {
        nlohmann::json r;
        r["k"] = rec.k;
        r["value"] = rec.value;
        r["policy"] = rec.policy;
        r["periodic_cycle"] = rec.periodic.cycle;
        r["periodic_value"] = rec.periodic_value;
        if (std::isfinite(rec.loss_sup)) r["loss_sup"] = rec.loss_sup;
        r["initial_policy_defaulted"] = rec.initial_policy_defaulted;
        if (rec.diagnostics) {
            auto& d = r["diagnostics"];
            d["residual"] = rec.diagnostics->residual;
            d["shift"] = rec.diagnostics->shift;
            d["distance"] = rec.diagnostics->distance;
            d["loss_vec"] = rec.diagnostics->loss_vec;
        }
        jr.push_back(std::move(r));
    }
    return j;
}

/// Shortest text with 17 significant digits; round-trips any finite double.
inline std::string csv_double(double x) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

/// RFC 4180 quoting: fields containing commas, quotes or line breaks are
/// quoted, with embedded quotes doubled.
inline std::string csv_field(const std::string& field) {
    if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
    std::string quoted = "\"";
    for (char c : field) {
        if (c == '"') quoted += '"';
        quoted += c;
    }
    quoted += '"';
    return quoted;
}

inline void write_verification_csv(std::ostream& out, const VerificationReport& report) {
    out << "k,max_value_dev,policy_match,loss,bound,ratio\r\n";
    for (const VerificationRow& row : report.rows)
        out << row.k << ',' << csv_double(row.max_value_dev) << ',' << (row.policy_match ? 1 : 0)
            << ',' << csv_double(row.loss) << ',' << csv_double(row.bound) << ','
            << csv_double(row.ratio) << "\r\n";
}

inline void write_bound_check_csv(std::ostream& out, const std::vector<BoundCheckRow>& rows) {
    out << "k,loss,bound,slack,ratio\r\n";
    for (const BoundCheckRow& row : rows)
        out << row.k << ',' << csv_double(row.loss) << ',' << csv_double(row.bound) << ','
            << csv_double(row.slack) << ',' << csv_double(row.ratio) << "\r\n";
}

}  // namespace nsmpi
