#include "rsc/corpus.hpp"

#include <algorithm>
#include <map>
#include <ostream>
#include <random>
#include <sstream>

#include "rsc/cnf.hpp"
#include "rsc/count.hpp"

namespace rsc {

namespace {

AlphaFamily family_from_name(const std::string& family, const ConceptSpace& space) {
    if (family == "joint") return AlphaFamily::joint();
    if (family == "untied") return AlphaFamily::untied(space.k());
    if (family == "tied") {
        std::vector<int> all(space.k());
        for (int i = 0; i < space.k(); ++i) all[i] = i;
        return AlphaFamily::tied({all});
    }
    throw validation_error("unknown family '" + family + "'");
}

SpacePtr digit_space(int max_digit) {
    if (max_digit < 0) throw validation_error("max digit must be >= 0");
    const int card = max_digit + 1;
    return std::make_shared<const ConceptSpace>(
        std::vector<Factor>{{"digit1", card}, {"digit2", card}});
}

} // namespace

TaskSpec make_sumparity_task(int max_digit, const std::string& family, bool biased_support) {
    auto space = digit_space(max_digit);
    auto know  = builtin_knowledge(BuiltinKnowledge::sum_parity, space);
    auto supp  = biased_support ? biased_parity_support(space) : SupportSet::full(space);
    std::ostringstream name;
    name << "sumparity-n" << max_digit << "-" << family << (biased_support ? "-biased" : "");
    return make_task(name.str(), space, std::move(know), std::move(supp),
                     family_from_name(family, *space));
}

TaskSpec make_addition_task(int max_digit, const std::string& family) {
    auto space = digit_space(max_digit);
    auto know  = builtin_knowledge(BuiltinKnowledge::sum, space);
    std::ostringstream name;
    name << "add-n" << max_digit << "-" << family;
    return make_task(name.str(), space, std::move(know), SupportSet::full(space),
                     family_from_name(family, *space));
}

std::vector<TaskSpec> small_task_corpus(const CorpusConfig& cfg) {
    std::vector<std::vector<int>> shapes;
    for (int k = 1; k <= cfg.max_k; ++k) {
        std::vector<int> cards(k, 1);
        for (;;) {
            shapes.push_back(cards);
            int i = k - 1;
            while (i >= 0 && cards[i] == cfg.max_card) cards[i--] = 1;
            if (i < 0) break;
            ++cards[i];
        }
    }

    std::mt19937_64       rng(cfg.seed);
    std::vector<TaskSpec> corpus;
    for (const auto& cards : shapes) {
        std::vector<Factor> factors;
        for (std::size_t i = 0; i < cards.size(); ++i)
            factors.push_back({"f" + std::to_string(i), cards[i]});
        auto space = std::make_shared<const ConceptSpace>(std::move(factors));
        const std::uint64_t n = space->world_count_u64();
        const bool tieable = std::all_of(cards.begin(), cards.end(),
                                         [&](int c) { return c == cards[0]; });

        for (int t = 0; t < cfg.tables_per_space; ++t) {
            const int        labels = 1 + static_cast<int>(rng() % cfg.max_labels);
            std::vector<int> table(n);
            for (std::uint64_t i = 0; i < n; ++i) table[i] = static_cast<int>(rng() % labels);
            KnowledgeTable knowledge(space, labels, table);

            std::vector<SupportSet> supports;
            supports.push_back(SupportSet::full(space));
            if (cfg.half_supports && n >= 2) {
                std::vector<std::uint64_t> idx(n);
                for (std::uint64_t i = 0; i < n; ++i) idx[i] = i;
                for (std::uint64_t i = 0; i + 1 < n; ++i)
                    std::swap(idx[i], idx[i + rng() % (n - i)]);
                idx.resize((n + 1) / 2);
                std::vector<World> worlds;
                for (std::uint64_t i : idx) worlds.push_back(space->world_at(i));
                supports.push_back(SupportSet::include_list(space, worlds));
            }

            std::vector<std::string> families = {"joint", "untied"};
            if (tieable && cards.size() > 1) families.push_back("tied");
            for (std::size_t s = 0; s < supports.size(); ++s) {
                for (const auto& fam : families) {
                    std::ostringstream name;
                    name << "corpus-";
                    for (std::size_t i = 0; i < cards.size(); ++i)
                        name << (i ? "x" : "") << cards[i];
                    name << "-L" << labels << "-t" << t << "-" << fam
                         << (s == 0 ? "-full" : "-half");
                    corpus.push_back(make_task(name.str(), space, knowledge, supports[s],
                                               family_from_name(fam, *space)));
                }
            }
        }
    }
    return corpus;
}

bool run_selftest(std::ostream& out) {
    CorpusConfig cfg;
    cfg.tables_per_space = 4;
    cfg.seed             = 9091;
    const auto corpus    = small_task_corpus(cfg);

    CountOptions opts;
    opts.naive_budget = 200'000;

    std::size_t naive_checked = 0, cnf_checked = 0, rs_cnf_checked = 0, det_checked = 0;
    std::size_t mono_checked = 0;
    std::map<std::string, std::size_t> failures;
    auto fail = [&](const TaskSpec& task, const std::string& what) {
        out << "[FAIL] " << what << " on task " << task.name << " digest " << task.digest()
            << "\n";
        ++failures[what];
    };

    std::map<std::string, mpz_class> full_admissible;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        const TaskSpec& task = corpus[i];
        CountReport     jrs  = count_jrs(task, JrsMode::redundant, opts);
        CountReport     rs   = count_rs(task, opts);

        if (*jrs.jrs_count_redundant + *jrs.intended_subtrahend != *jrs.optimal_pair_count)
            fail(task, "subtraction identity");
        if (*rs.rs_count + 1 != *rs.rs_admissible_count) fail(task, "rs identity");

        try {
            const mpz_class naive = naive_count_pairs(task, opts);
            if (naive != *jrs.optimal_pair_count) fail(task, "naive-oracle equivalence");
            ++naive_checked;
        } catch (const budget_error&) {
        }

        try {
            const auto enc = encode_task(task, MitigationSet{}, CnfTarget::optimal_pairs);
            if (enc.formula.var_count <= 24) {
                if (exhaustive_model_count(enc.formula) != *jrs.optimal_pair_count)
                    fail(task, "cnf model-count equivalence");
                ++cnf_checked;
            }
            const auto enca = encode_task(task, MitigationSet{}, CnfTarget::optimal_alphas);
            if (enca.formula.var_count <= 24) {
                if (exhaustive_model_count(enca.formula) != *rs.rs_admissible_count)
                    fail(task, "rs cnf equivalence");
                ++rs_cnf_checked;
            }
        } catch (const budget_error&) {
        }

        if (i % 9 == 0) {
            CountOptions o2 = opts;
            o2.workers      = 2;
            CountOptions o8 = opts;
            o8.workers      = 8;
            if (*count_jrs(task, JrsMode::redundant, o2).optimal_pair_count !=
                    *jrs.optimal_pair_count ||
                *count_jrs(task, JrsMode::redundant, o8).optimal_pair_count !=
                    *jrs.optimal_pair_count)
                fail(task, "worker determinism");
            ++det_checked;
        }

        // The support never shrinks admissibility when it grows; full-support
        // runs bound their half-support siblings.
        const std::string key = task.name.substr(0, task.name.rfind('-'));
        if (task.name.size() > 5 && task.name.substr(task.name.size() - 5) == "-full") {
            full_admissible[key] = *jrs.admissible_alpha_count;
        } else if (auto it = full_admissible.find(key); it != full_admissible.end()) {
            if (*jrs.admissible_alpha_count < it->second) fail(task, "support monotonicity");
            ++mono_checked;
        }
    }

    auto line = [&](const std::string& what, const std::string& detail) {
        const auto it = failures.find(what);
        if (it == failures.end())
            out << "[ok] " << what << ": " << detail << "\n";
        else
            out << "[FAIL] " << what << ": " << it->second << " mismatches (" << detail << ")\n";
    };
    line("subtraction identity", std::to_string(corpus.size()) + " tasks");
    line("rs identity", std::to_string(corpus.size()) + " tasks");
    line("naive-oracle equivalence", std::to_string(naive_checked) + " tasks within budget");
    line("cnf model-count equivalence",
         std::to_string(cnf_checked) + " pair formulas within var cap");
    line("rs cnf equivalence", std::to_string(rs_cnf_checked) + " alpha formulas within var cap");
    line("worker determinism", std::to_string(det_checked) + " tasks x workers {1,2,8}");
    line("support monotonicity", std::to_string(mono_checked) + " full/half pairs");
    return failures.empty();
}

} // namespace rsc
