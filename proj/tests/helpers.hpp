#ifndef RSC_TEST_HELPERS_HPP
#define RSC_TEST_HELPERS_HPP

#include <random>
#include <string>
#include <vector>

#include "rsc/corpus.hpp"
#include "rsc/count.hpp"
#include "rsc/maps.hpp"
#include "rsc/task.hpp"

namespace rsct {

inline rsc::SpacePtr space_of(const std::vector<int>& cards) {
    std::vector<rsc::Factor> fs;
    for (std::size_t i = 0; i < cards.size(); ++i)
        fs.push_back({"f" + std::to_string(i), cards[i]});
    return std::make_shared<const rsc::ConceptSpace>(std::move(fs));
}

inline rsc::TaskSpec table_task(const std::vector<int>& cards, int labels,
                                const std::vector<int>& table, const std::string& family,
                                rsc::SupportSet* support = nullptr) {
    auto space = space_of(cards);
    rsc::KnowledgeTable k(space, labels, table);
    rsc::AlphaFamily    fam;
    if (family == "joint") {
        fam = rsc::AlphaFamily::joint();
    } else if (family == "untied") {
        fam = rsc::AlphaFamily::untied(space->k());
    } else {
        std::vector<int> all(space->k());
        for (int i = 0; i < space->k(); ++i) all[i] = i;
        fam = rsc::AlphaFamily::tied({all});
    }
    auto supp = support ? *support : rsc::SupportSet::full(space);
    return rsc::make_task("test", space, std::move(k), std::move(supp), fam);
}

// Two digit factors 0..max_digit with a builtin rule.
inline rsc::TaskSpec digits_task(int max_digit, rsc::BuiltinKnowledge rule,
                                 const std::string& family) {
    auto space = space_of({max_digit + 1, max_digit + 1});
    auto know  = rsc::builtin_knowledge(rule, space);
    rsc::AlphaFamily fam;
    if (family == "joint")
        fam = rsc::AlphaFamily::joint();
    else if (family == "untied")
        fam = rsc::AlphaFamily::untied(2);
    else
        fam = rsc::AlphaFamily::tied({{0, 1}});
    return rsc::make_task("digits", space, std::move(know), rsc::SupportSet::full(space), fam);
}

// All total alpha maps of the task's family, by odometer enumeration.
inline std::vector<rsc::AlphaMap> all_alphas(const rsc::TaskSpec& task) {
    std::vector<rsc::AlphaMap> out;
    const auto&                space = *task.space;
    if (task.family.kind == rsc::AlphaFamily::Kind::joint) {
        const std::uint64_t        n = space.world_count_u64();
        std::vector<std::uint64_t> table(n, 0);
        for (;;) {
            out.push_back(rsc::AlphaMap::joint_table(task.space, table));
            std::size_t i    = n;
            bool        done = true;
            while (i-- > 0) {
                if (++table[i] < n) {
                    done = false;
                    break;
                }
                table[i] = 0;
            }
            if (done) break;
        }
    } else {
        std::vector<int> cards;
        for (const auto& g : task.family.tie_groups)
            cards.push_back(space.cardinality(g.front()));
        std::vector<std::pair<int, int>> slots; // (group, value)
        for (std::size_t g = 0; g < cards.size(); ++g)
            for (int v = 0; v < cards[g]; ++v) slots.push_back({static_cast<int>(g), v});
        std::vector<std::vector<int>> tables;
        for (int c : cards) tables.push_back(std::vector<int>(c, 0));
        for (;;) {
            out.push_back(rsc::AlphaMap::factor_tables(task.space, task.family, tables));
            std::size_t i    = slots.size();
            bool        done = true;
            while (i-- > 0) {
                auto [g, v] = slots[i];
                if (++tables[g][v] < cards[g]) {
                    done = false;
                    break;
                }
                tables[g][v] = 0;
            }
            if (done) break;
        }
    }
    return out;
}

// All total beta tables.
inline std::vector<rsc::BetaMap> all_betas(const rsc::TaskSpec& task) {
    std::vector<rsc::BetaMap> out;
    const std::uint64_t       n = task.space->world_count_u64();
    std::vector<int>          cells(n, 0);
    for (;;) {
        out.push_back(rsc::BetaMap(task.space, task.label_count, cells));
        std::size_t i = n;
        bool        done = true;
        while (i-- > 0) {
            if (++cells[i] < task.label_count) {
                done = false;
                break;
            }
            cells[i] = 0;
        }
        if (done) break;
    }
    return out;
}

inline std::uint64_t rnd(std::mt19937_64& rng, std::uint64_t n) { return rng() % n; }

} // namespace rsct

#endif
