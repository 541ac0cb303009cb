#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "rsc/cnf.hpp"
#include "rsc/corpus.hpp"
#include "rsc/count.hpp"
#include "rsc/extremality.hpp"
#include "rsc/maps.hpp"
#include "rsc/metrics.hpp"
#include "rsc/mitigation.hpp"
#include "rsc/report.hpp"
#include "rsc/task.hpp"

namespace {

constexpr int kExitOk         = 0;
constexpr int kExitUsage      = 1;
constexpr int kExitBudget     = 2;
constexpr int kExitValidation = 3;

struct TaskWithDoc {
    rsc::TaskSpec      task;
    rsc::MitigationSet mitigations;
};

TaskWithDoc load_task_and_mitigations(const std::string& path, bool use_mitigations) {
    std::ifstream in(path);
    if (!in) throw rsc::validation_error("task file not found: " + path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw rsc::validation_error("malformed task file " + path + ": " + e.what());
    }
    TaskWithDoc out{rsc::build_task(doc), {}};
    if (use_mitigations) out.mitigations = rsc::parse_mitigations(doc, out.task);
    return out;
}

rsc::BetaMap load_beta_file(const std::string& path, const rsc::TaskSpec& task) {
    std::ifstream in(path);
    if (!in) throw rsc::validation_error("beta file not found: " + path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw rsc::validation_error("malformed beta file " + path + ": " + e.what());
    }
    const int labels = doc.value("labels", task.label_count);
    std::vector<int> cells;
    for (const auto& v : doc.at("table")) cells.push_back(v.is_null() ? -1 : v.get<int>());
    return rsc::BetaMap(task.space, labels, std::move(cells));
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"exact counting and auditing of reasoning shortcuts in concept-based tasks"};
    app.require_subcommand(1);
    app.fallthrough(true);
    app.failure_message(CLI::FailureMessage::simple);

    bool json_output = false;
    bool no_timing   = false;
    app.add_flag("--json", json_output, "emit machine-readable JSON reports");
    app.add_flag("--no-timing", no_timing, "omit timing fields (byte-stable output)");

    // ---- count ----
    auto*       count_cmd = app.add_subcommand("count", "count RSs or JRSs for a task");
    std::string count_task_path, count_mode = "jrs";
    bool        count_mitigations = false;
    int         workers           = 0;
    std::uint64_t budget          = 0;
    bool          int128          = false;
    count_cmd->add_option("--task", count_task_path, "task spec file")->required();
    count_cmd->add_option("--mode", count_mode, "rs | jrs | jrs-nonredundant")
        ->check(CLI::IsMember({"rs", "jrs", "jrs-nonredundant"}));
    count_cmd->add_flag("--mitigations", count_mitigations,
                        "apply the task file's mitigations block");
    count_cmd->add_option("--workers", workers, "worker threads (default RSC_WORKERS or 1)");
    count_cmd->add_option("--budget", budget, "search node budget");
    count_cmd->add_flag("--check-int128", int128, "cross-check big-integer sums in 128-bit mode");

    // ---- enumerate ----
    auto*         enum_cmd = app.add_subcommand("enumerate", "list admissible alphas");
    std::string   enum_task_path;
    std::uint64_t enum_limit = 10;
    bool          enum_mitigations = false;
    enum_cmd->add_option("--task", enum_task_path, "task spec file")->required();
    enum_cmd->add_option("--limit", enum_limit, "maximum number of alphas");
    enum_cmd->add_flag("--mitigations", enum_mitigations,
                       "apply the task file's mitigations block");

    // ---- intended-count ----
    auto*       intended_cmd = app.add_subcommand("intended-count", "intended-pair subtrahend");
    std::string intended_task_path;
    bool        family_aware = false;
    intended_cmd->add_option("--task", intended_task_path, "task spec file")->required();
    intended_cmd->add_flag("--family-aware", family_aware,
                           "count only pairs representable in the declared alpha family");

    // ---- export-cnf ----
    auto*       cnf_cmd = app.add_subcommand("export-cnf", "compile the counting problem to CNF");
    std::string cnf_task_path, cnf_target = "optimal_pairs", cnf_out;
    bool        trim_beta = false, cnf_mitigations = false;
    cnf_cmd->add_option("--task", cnf_task_path, "task spec file")->required();
    cnf_cmd->add_option("--target", cnf_target, "optimal_pairs | optimal_alphas")
        ->check(CLI::IsMember({"optimal_pairs", "optimal_alphas"}));
    cnf_cmd->add_flag("--trim-beta", trim_beta, "drop beta selectors for unreachable cells");
    cnf_cmd->add_flag("--mitigations", cnf_mitigations,
                      "apply the task file's mitigations block");
    cnf_cmd->add_option("--out", cnf_out, "output path (default: stdout)");

    // ---- check-extremality ----
    auto*       ext_cmd = app.add_subcommand("check-extremality", "audit an inference layer");
    std::string layer_path, pairs_spec = "all";
    int         grid = 99;
    std::uint64_t seed = 0;
    int           ext_workers = 0;
    ext_cmd->add_option("--layer", layer_path, "layer spec file")->required();
    ext_cmd->add_option("--grid", grid, "interior lambda grid points");
    ext_cmd->add_option("--pairs", pairs_spec, "'all' or a sample size");
    ext_cmd->add_option("--seed", seed, "sampling seed");
    ext_cmd->add_option("--workers", ext_workers, "worker threads");

    // ---- metrics ----
    auto*       metrics_cmd = app.add_subcommand("metrics", "score a prediction dump");
    std::string metrics_dump_path, metrics_task_path, metrics_beta_path;
    metrics_cmd->add_option("--dump", metrics_dump_path, "prediction CSV")->required();
    metrics_cmd->add_option("--task", metrics_task_path, "task spec file")->required();
    metrics_cmd->add_option("--beta", metrics_beta_path, "inference table to score (JSON)");

    // ---- selftest ----
    app.add_subcommand("selftest", "run the embedded oracle corpus");

    CLI11_PARSE(app, argc, argv);

    try {
        rsc::CountOptions opts;
        if (workers > 0) opts.workers = workers;
        if (budget > 0) opts.node_budget = budget;
        opts.check_int128 = int128;
        opts.timing       = !no_timing;

        if (count_cmd->parsed()) {
            auto [task, ms] = load_task_and_mitigations(count_task_path, count_mitigations);
            const std::string engine_mode = count_mode == "rs" ? "rs" : "jrs";
            rsc::CountReport  report = rsc::count_with_mitigations(task, ms, engine_mode, opts);
            if (json_output)
                std::cout << rsc::count_report_json(report, !no_timing).dump(2) << "\n";
            else
                std::cout << rsc::count_report_text(report, !no_timing);
            return report.exact ? kExitOk : kExitBudget;
        }

        if (enum_cmd->parsed()) {
            auto [task, ms] = load_task_and_mitigations(enum_task_path, enum_mitigations);
            const auto res =
                rsc::enumerate_optimal_alphas(task, enum_limit, enum_mitigations ? &ms : nullptr);
            nlohmann::json out;
            out["task_digest"] = task.digest();
            out["truncated"]   = res.truncated;
            out["pairs"]       = nlohmann::json::array();
            for (const auto& [alpha, beta] : res.pairs) {
                nlohmann::json e;
                const auto     joint = alpha.expand();
                e["alpha"] = joint.joint();
                e["beta"]  = beta.cells();
                out["pairs"].push_back(e);
            }
            if (json_output) {
                std::cout << out.dump(2) << "\n";
            } else {
                std::cout << "admissible alphas for " << task.digest()
                          << (res.truncated ? " (truncated)" : "") << "\n";
                for (const auto& [alpha, beta] : res.pairs) {
                    const auto joint = alpha.expand();
                    std::cout << "  alpha:";
                    for (auto c : joint.joint()) std::cout << " " << c;
                    std::cout << "  beta:";
                    for (int y : beta.cells())
                        std::cout << " " << (y < 0 ? std::string("*") : std::to_string(y));
                    std::cout << "\n";
                }
            }
            return kExitOk;
        }

        if (intended_cmd->parsed()) {
            auto [task, ms] = load_task_and_mitigations(intended_task_path, false);
            nlohmann::json out;
            out["task_digest"] = task.digest();
            if (family_aware) {
                out["intended_count"] = rsc::representable_intended_count(task).get_str();
                out["rule"]           = "family-restricted";
            } else {
                out["intended_count"] = rsc::intended_pair_count(task).get_str();
                out["rule"]           = "closed-form";
            }
            if (json_output)
                std::cout << out.dump(2) << "\n";
            else
                std::cout << "intended pairs (" << out["rule"].get<std::string>()
                          << "): " << out["intended_count"].get<std::string>() << "\n";
            return kExitOk;
        }

        if (cnf_cmd->parsed()) {
            auto [task, ms] = load_task_and_mitigations(cnf_task_path, cnf_mitigations);
            const auto target = cnf_target == "optimal_pairs" ? rsc::CnfTarget::optimal_pairs
                                                              : rsc::CnfTarget::optimal_alphas;
            const auto enc = rsc::encode_task(task, ms, target, trim_beta);
            if (cnf_out.empty()) {
                rsc::write_dimacs(enc.formula, std::cout);
            } else {
                std::ofstream f(cnf_out, std::ios::binary);
                if (!f) throw rsc::validation_error("cannot open output file " + cnf_out);
                rsc::write_dimacs(enc.formula, f);
            }
            return kExitOk;
        }

        if (ext_cmd->parsed()) {
            const auto layer = rsc::load_layer_file(layer_path);
            std::uint64_t pair_budget = 0;
            if (pairs_spec != "all") {
                try {
                    pair_budget = std::stoull(pairs_spec);
                } catch (const std::exception&) {
                    throw rsc::validation_error("--pairs takes 'all' or a number");
                }
                if (pair_budget == 0) throw rsc::validation_error("--pairs sample must be >= 1");
            }
            const auto report = rsc::check_extremality(layer, grid, pair_budget, seed,
                                                       rsc::resolve_workers(ext_workers));
            // Digest over the raw rows for provenance.
            std::ostringstream os;
            os << (layer.kind == rsc::InferenceLayerSpec::Kind::linear_prob ? "p" : "w");
            for (const auto& row : layer.rows)
                for (double v : row) os << v << ",";
            std::uint64_t h = 14695981039346656037ull;
            for (char ch : os.str()) {
                h ^= static_cast<unsigned char>(ch);
                h *= 1099511628211ull;
            }
            char buf[17];
            std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
            if (json_output)
                std::cout << rsc::extremality_report_json(report, buf).dump(2) << "\n";
            else
                std::cout << rsc::extremality_report_text(report, buf);
            return kExitOk;
        }

        if (metrics_cmd->parsed()) {
            auto [task, ms] = load_task_and_mitigations(metrics_task_path, false);
            const auto dump = rsc::load_dump_csv(metrics_dump_path, task.space);
            rsc::MetricsReport rep;
            rep.task_digest = task.digest();
            rep.rows        = dump.rows;
            rep.alignment   = rsc::hungarian_align(dump);
            rep.f1_labels   = rsc::label_f1(dump);
            rep.f1_concepts = rsc::aligned_concept_f1(dump, rep.alignment);
            rep.cls         = rsc::concept_collapse(dump);
            if (!metrics_beta_path.empty()) {
                const auto beta = load_beta_file(metrics_beta_path, task);
                rep.has_beta    = true;
                rep.f1_beta     = rsc::eval_beta_f1(dump, beta, rep.alignment);
            }
            if (json_output)
                std::cout << rsc::metrics_report_json(rep).dump(2) << "\n";
            else
                std::cout << rsc::metrics_report_text(rep);
            return kExitOk;
        }

        // selftest
        const bool ok = rsc::run_selftest(std::cout);
        return ok ? kExitOk : kExitBudget;
    } catch (const rsc::budget_error& e) {
        std::cerr << "budget error: " << e.what() << "\n";
        return kExitBudget;
    } catch (const rsc::validation_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kExitValidation;
    }
    return kExitUsage;
}
