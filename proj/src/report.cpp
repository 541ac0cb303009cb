#include "rsc/report.hpp"

#include <iomanip>
#include <sstream>

#include <nlohmann/json.hpp>

namespace rsc {

namespace {

using nlohmann::json;

void put_count(json& j, const char* key, const std::optional<mpz_class>& v) {
    if (v) j[key] = v->get_str();
}

std::string fmt_double(double v) {
    std::ostringstream os;
    os << std::setprecision(12) << v;
    return os.str();
}

} // namespace

json count_report_json(const CountReport& r, bool include_timing) {
    json j;
    j["task_digest"] = r.task_digest;
    if (!r.task_name.empty()) j["task"] = r.task_name;
    j["mode"]        = r.mode;
    j["method"]      = r.method;
    j["family"]      = r.family;
    j["mitigations"] = r.mitigations;
    j["workers"]     = r.workers;
    j["exact"]       = r.exact;
    if (r.int128_checked) j["int128_checked"] = true;
    if (include_timing) j["elapsed_ms"] = r.elapsed_ms;
    put_count(j, "admissible_alpha_count", r.admissible_alpha_count);
    put_count(j, "optimal_pair_count", r.optimal_pair_count);
    put_count(j, "jrs_count_redundant", r.jrs_count_redundant);
    put_count(j, "jrs_count_nonredundant", r.jrs_count_nonredundant);
    put_count(j, "intended_subtrahend", r.intended_subtrahend);
    if (!r.subtrahend_rule.empty()) j["subtrahend_rule"] = r.subtrahend_rule;
    put_count(j, "rs_admissible_count", r.rs_admissible_count);
    put_count(j, "rs_count", r.rs_count);
    put_count(j, "rs_witness_admitting", r.rs_witness_admitting);
    if (!r.warnings.empty()) j["warnings"] = r.warnings;
    return j;
}

std::string count_report_text(const CountReport& r, bool include_timing) {
    std::ostringstream os;
    auto row = [&](const std::string& k, const std::string& v) {
        os << "  " << std::left << std::setw(26) << k << v << "\n";
    };
    os << "count report (" << r.mode << ")\n";
    row("task", r.task_name.empty() ? "<unnamed>" : r.task_name);
    row("digest", r.task_digest);
    row("family", r.family);
    row("method", r.method);
    row("mitigations", r.mitigations);
    row("workers", std::to_string(r.workers));
    row("exact", r.exact ? "yes" : "no (budget exhausted)");
    if (r.int128_checked) row("int128 cross-check", "passed");
    if (include_timing) row("elapsed_ms", fmt_double(r.elapsed_ms));
    auto crow = [&](const std::string& k, const std::optional<mpz_class>& v) {
        if (v) row(k, v->get_str());
    };
    crow("admissible alphas", r.admissible_alpha_count);
    crow("optimal pairs", r.optimal_pair_count);
    crow("jrs (redundant)", r.jrs_count_redundant);
    crow("jrs (non-redundant)", r.jrs_count_nonredundant);
    crow("intended subtrahend", r.intended_subtrahend);
    if (!r.subtrahend_rule.empty()) row("subtrahend rule", r.subtrahend_rule);
    crow("rs-admissible alphas", r.rs_admissible_count);
    crow("rs count", r.rs_count);
    crow("rs with witness", r.rs_witness_admitting);
    for (const auto& w : r.warnings) os << "  warning: " << w << "\n";
    return os.str();
}

json extremality_report_json(const ExtremalityReport& r, const std::string& digest) {
    json j;
    j["layer_digest"]       = digest;
    j["satisfied"]          = r.satisfied;
    j["vacuous"]            = r.vacuous;
    j["worst_violation"]    = r.worst_violation;
    j["worst_pair"]         = {r.worst_c, r.worst_c2};
    j["worst_lambda"]       = r.worst_lambda;
    j["pairs_eligible"]     = r.pairs_eligible;
    j["pairs_scanned"]      = r.pairs_scanned;
    j["pairs_satisfied"]    = r.pairs_satisfied;
    j["boundary_pairs"]     = r.boundary_pairs;
    j["ineligible_ties"]    = r.ineligible_ties;
    j["grid_points"]        = r.grid_points;
    j["fraction_satisfied"] = r.fraction_satisfied;
    if (!r.warnings.empty()) j["warnings"] = r.warnings;
    return j;
}

std::string extremality_report_text(const ExtremalityReport& r, const std::string& digest) {
    std::ostringstream os;
    auto row = [&](const std::string& k, const std::string& v) {
        os << "  " << std::left << std::setw(22) << k << v << "\n";
    };
    os << "extremality report\n";
    row("layer digest", digest);
    row("satisfied", r.satisfied ? (r.vacuous ? "yes (vacuous)" : "yes") : "NO");
    row("worst violation", fmt_double(r.worst_violation));
    row("worst pair", "(" + std::to_string(r.worst_c) + ", " + std::to_string(r.worst_c2) +
                          ") at lambda=" + fmt_double(r.worst_lambda));
    row("pairs eligible", std::to_string(r.pairs_eligible));
    row("pairs scanned", std::to_string(r.pairs_scanned));
    row("pairs satisfied", std::to_string(r.pairs_satisfied));
    row("boundary pairs", std::to_string(r.boundary_pairs));
    row("grid points", std::to_string(r.grid_points));
    row("fraction satisfied", fmt_double(r.fraction_satisfied));
    for (const auto& w : r.warnings) os << "  warning: " << w << "\n";
    return os.str();
}

json metrics_report_json(const MetricsReport& r) {
    json j;
    j["task_digest"] = r.task_digest;
    j["rows"]        = r.rows;
    j["f1_labels"]   = r.f1_labels;
    j["f1_concepts"] = r.f1_concepts;
    j["cls"]         = r.cls;
    if (r.has_beta) j["f1_beta"] = r.f1_beta;
    j["alignment"] = {{"pi", r.alignment.pi},
                      {"psi", r.alignment.psi},
                      {"objective", r.alignment.objective}};
    if (!r.alignment.warnings.empty()) j["warnings"] = r.alignment.warnings;
    return j;
}

std::string metrics_report_text(const MetricsReport& r) {
    std::ostringstream os;
    auto row = [&](const std::string& k, const std::string& v) {
        os << "  " << std::left << std::setw(16) << k << v << "\n";
    };
    os << "metrics report\n";
    row("task digest", r.task_digest);
    row("rows", std::to_string(r.rows));
    row("F1(Y)", fmt_double(r.f1_labels));
    row("F1(C)", fmt_double(r.f1_concepts));
    row("Cls(C)", fmt_double(r.cls));
    if (r.has_beta) row("F1(beta)", fmt_double(r.f1_beta));
    std::ostringstream pi;
    for (std::size_t i = 0; i < r.alignment.pi.size(); ++i)
        pi << (i ? " " : "") << r.alignment.pi[i];
    row("pi", pi.str());
    for (std::size_t i = 0; i < r.alignment.psi.size(); ++i) {
        std::ostringstream psi;
        for (std::size_t v = 0; v < r.alignment.psi[i].size(); ++v)
            psi << (v ? " " : "") << r.alignment.psi[i][v];
        row("psi_" + std::to_string(i), psi.str());
    }
    row("objective", fmt_double(r.alignment.objective));
    for (const auto& w : r.alignment.warnings) os << "  warning: " << w << "\n";
    return os.str();
}

} // namespace rsc
