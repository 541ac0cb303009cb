#include "rsc/cnf.hpp"

#include <algorithm>
#include <ostream>
#include <set>
#include <sstream>

namespace rsc {

void CnfFormula::validate() const {
    for (const auto& cl : clauses) {
        if (cl.empty()) throw validation_error("empty clause");
        for (int lit : cl) {
            if (lit == 0) throw validation_error("zero literal");
            const int v = lit > 0 ? lit : -lit;
            if (v > var_count) throw validation_error("literal references undeclared variable");
        }
    }
    for (std::size_t i = 0; i < projection.size(); ++i) {
        if (projection[i] < 1 || projection[i] > var_count)
            throw validation_error("projection set references undeclared variable");
        if (i && projection[i] <= projection[i - 1])
            throw validation_error("projection set must be sorted and unique");
        if (!legend.count(projection[i]))
            throw validation_error("legend missing projected variable " +
                                   std::to_string(projection[i]));
    }
}

namespace {

std::string tuple_str(const World& w) {
    std::string s;
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(w[i]);
    }
    return s;
}

struct Builder {
    CnfFormula f;
    int fresh() { return ++f.var_count; }
    void clause(std::vector<int> lits) {
        std::sort(lits.begin(), lits.end());
        lits.erase(std::unique(lits.begin(), lits.end()), lits.end());
        f.clauses.push_back(std::move(lits));
    }
    void exactly_one(const std::vector<int>& vars) {
        clause(std::vector<int>(vars.begin(), vars.end()));
        for (std::size_t i = 0; i < vars.size(); ++i)
            for (std::size_t j = i + 1; j < vars.size(); ++j) clause({-vars[i], -vars[j]});
    }
};

} // namespace

CnfEncoding encode_task(const TaskSpec& task, const MitigationSet& ms, CnfTarget target,
                        bool trim_beta) {
    const ConceptSpace& space = *task.space;
    const std::uint64_t cells = space.world_count_u64();
    const auto&         supp  = task.support.indices();
    const bool joint = task.family.kind == AlphaFamily::Kind::joint;

    CnfEncoding enc;
    enc.target = target;
    Builder b;

    // --- alpha selector variables, exactly-one per domain row ---
    if (joint) {
        enc.alpha_var.assign(cells * cells, 0);
        for (std::uint64_t g = 0; g < cells; ++g) {
            std::vector<int> row;
            for (std::uint64_t c = 0; c < cells; ++c) {
                const int v = b.fresh();
                enc.alpha_var[g * cells + c] = v;
                b.f.legend[v] = "a g=" + tuple_str(space.world_at(g)) +
                                " -> c=" + tuple_str(space.world_at(c));
                row.push_back(v);
            }
            b.exactly_one(row);
        }
    } else {
        enc.entry_var.resize(task.family.group_count());
        for (int g = 0; g < task.family.group_count(); ++g) {
            const int card = space.cardinality(task.family.tie_groups[g].front());
            enc.entry_var[g].assign(static_cast<std::size_t>(card) * card, 0);
            for (int in = 0; in < card; ++in) {
                std::vector<int> row;
                for (int out = 0; out < card; ++out) {
                    const int v = b.fresh();
                    enc.entry_var[g][static_cast<std::size_t>(in) * card + out] = v;
                    b.f.legend[v] = "a group=" + std::to_string(g) + " in=" + std::to_string(in) +
                                    " out=" + std::to_string(out);
                    row.push_back(v);
                }
                b.exactly_one(row);
            }
        }
    }

    // Literals asserting alpha(g) = c, deduplicated.
    auto selector_lits = [&](std::uint64_t g, std::uint64_t c) {
        std::vector<int> lits;
        if (joint) {
            lits.push_back(enc.alpha_var[g * cells + c]);
        } else {
            const World gw = space.world_at(g), cw = space.world_at(c);
            for (int i = 0; i < space.k(); ++i) {
                const int grp  = task.family.group_of(i);
                const int card = space.cardinality(i);
                lits.push_back(enc.entry_var[grp][static_cast<std::size_t>(gw[i]) * card + cw[i]]);
            }
            std::sort(lits.begin(), lits.end());
            lits.erase(std::unique(lits.begin(), lits.end()), lits.end());
        }
        return lits;
    };

    // --- beta selector variables ---
    std::vector<char> beta_cell(cells, 0);
    if (target == CnfTarget::optimal_pairs) {
        if (!trim_beta) {
            std::fill(beta_cell.begin(), beta_cell.end(), 1);
        } else {
            // Sound over-approximation of the reachable image: cells that at
            // least one support world can map to without an immediate
            // conflict, plus distillation-pinned cells.
            for (std::uint64_t c = 0; c < cells; ++c) {
                for (std::uint64_t g : supp) {
                    if (ms.distillation_worlds &&
                        std::binary_search(ms.distillation_worlds->begin(),
                                           ms.distillation_worlds->end(), c) &&
                        task.knowledge.label_of(c) != task.knowledge.label_of(g))
                        continue;
                    if (ms.concept_supervision &&
                        std::binary_search(ms.concept_supervision->worlds.begin(),
                                           ms.concept_supervision->worlds.end(), g)) {
                        const World gw = space.world_at(g), cw = space.world_at(c);
                        bool        ok = true;
                        for (int i : ms.concept_supervision->factors)
                            if (cw[i] != gw[i]) ok = false;
                        if (!ok) continue;
                    }
                    beta_cell[c] = 1;
                    break;
                }
            }
            if (ms.distillation_worlds)
                for (std::uint64_t c : *ms.distillation_worlds) beta_cell[c] = 1;
            enc.trimmed = true;
        }
        enc.beta_var.assign(cells * task.label_count, 0);
        for (std::uint64_t c = 0; c < cells; ++c) {
            if (!beta_cell[c]) {
                ++enc.trimmed_free_cells;
                continue;
            }
            std::vector<int> row;
            for (int y = 0; y < task.label_count; ++y) {
                const int v = b.fresh();
                enc.beta_var[c * task.label_count + y] = v;
                b.f.legend[v] =
                    "b c=" + tuple_str(space.world_at(c)) + " y=" + std::to_string(y);
                row.push_back(v);
            }
            b.exactly_one(row);
        }
    }

    // --- optimality clauses over the support ---
    for (std::uint64_t g : supp) {
        const int want = task.knowledge.label_of(g);
        for (std::uint64_t c = 0; c < cells; ++c) {
            auto lits = selector_lits(g, c);
            if (target == CnfTarget::optimal_alphas) {
                if (task.knowledge.label_of(c) != want) {
                    std::vector<int> cl;
                    for (int l : lits) cl.push_back(-l);
                    b.clause(std::move(cl));
                }
            } else {
                std::vector<int> cl;
                for (int l : lits) cl.push_back(-l);
                const int bv = enc.beta_var[c * task.label_count + want];
                // A trimmed beta row means no support world may map there.
                if (bv) cl.push_back(bv);
                b.clause(std::move(cl));
            }
        }
    }

    // --- mitigation constraints ---
    if (ms.concept_supervision) {
        for (std::uint64_t g : ms.concept_supervision->worlds) {
            const World gw = space.world_at(g);
            if (joint) {
                for (std::uint64_t c = 0; c < cells; ++c) {
                    const World cw = space.world_at(c);
                    for (int i : ms.concept_supervision->factors)
                        if (cw[i] != gw[i]) {
                            b.clause({-enc.alpha_var[g * cells + c]});
                            break;
                        }
                }
            } else {
                for (int i : ms.concept_supervision->factors) {
                    const int grp  = task.family.group_of(i);
                    const int card = space.cardinality(i);
                    b.clause({enc.entry_var[grp][static_cast<std::size_t>(gw[i]) * card + gw[i]]});
                }
            }
        }
    }
    if (ms.distillation_worlds && target == CnfTarget::optimal_pairs) {
        for (std::uint64_t c : *ms.distillation_worlds)
            b.clause({enc.beta_var[c * task.label_count + task.knowledge.label_of(c)]});
    }
    auto block_same_cell = [&](std::uint64_t g1, std::uint64_t g2) {
        for (std::uint64_t c = 0; c < cells; ++c) {
            std::vector<int> cl;
            for (int l : selector_lits(g1, c)) cl.push_back(-l);
            for (int l : selector_lits(g2, c)) cl.push_back(-l);
            b.clause(std::move(cl));
        }
    };
    if (ms.reconstruction) {
        for (std::size_t i = 0; i < supp.size(); ++i)
            for (std::size_t j = i + 1; j < supp.size(); ++j) block_same_cell(supp[i], supp[j]);
    }
    for (const auto& extra : ms.multitask) {
        std::vector<std::uint64_t> covered;
        for (std::uint64_t g : supp)
            if (std::binary_search(extra.worlds.begin(), extra.worlds.end(), g))
                covered.push_back(g);
        for (std::size_t i = 0; i < covered.size(); ++i)
            for (std::size_t j = i + 1; j < covered.size(); ++j)
                if (extra.knowledge.label_of(covered[i]) != extra.knowledge.label_of(covered[j]))
                    block_same_cell(covered[i], covered[j]);
    }

    // --- projection: every selector variable ---
    for (int v = 1; v <= b.f.var_count; ++v) b.f.projection.push_back(v);

    b.f.comments.push_back("task-digest " + task.digest());
    b.f.comments.push_back(std::string("target ") + (target == CnfTarget::optimal_pairs
                                                         ? "optimal-pairs"
                                                         : "optimal-alphas"));
    if (enc.trimmed)
        b.f.comments.push_back("trimmed-beta-multiplier " + std::to_string(task.label_count) +
                               "^" + std::to_string(enc.trimmed_free_cells));
    b.f.comments.push_back(
        "note: subtract the intended-pair count in post-processing to obtain the shortcut count");

    b.f.validate();
    enc.formula = std::move(b.f);
    return enc;
}

std::pair<AlphaMap, BetaMap> CnfEncoding::decode(const TaskSpec& task,
                                                 const std::vector<bool>& assignment) const {
    const ConceptSpace& space = *task.space;
    const std::uint64_t cells = space.world_count_u64();
    auto truthy = [&](int var) {
        return var > 0 && var <= static_cast<int>(assignment.size()) && assignment[var - 1];
    };

    AlphaMap alpha = [&] {
        if (task.family.kind == AlphaFamily::Kind::joint) {
            std::vector<std::uint64_t> table(cells, 0);
            for (std::uint64_t g = 0; g < cells; ++g) {
                bool found = false;
                for (std::uint64_t c = 0; c < cells; ++c)
                    if (truthy(alpha_var[g * cells + c])) {
                        table[g] = c;
                        found    = true;
                        break;
                    }
                if (!found) throw validation_error("assignment selects no image for a world");
            }
            return AlphaMap::joint_table(task.space, std::move(table));
        }
        std::vector<std::vector<int>> tables;
        for (int g = 0; g < task.family.group_count(); ++g) {
            const int card = space.cardinality(task.family.tie_groups[g].front());
            std::vector<int> t(card, -1);
            for (int in = 0; in < card; ++in)
                for (int out = 0; out < card; ++out)
                    if (truthy(entry_var[g][static_cast<std::size_t>(in) * card + out])) t[in] = out;
            for (int in = 0; in < card; ++in)
                if (t[in] < 0) throw validation_error("assignment selects no output for an entry");
            tables.push_back(std::move(t));
        }
        return AlphaMap::factor_tables(task.space, task.family, std::move(tables));
    }();

    BetaMap beta = BetaMap::all_free(task.space, task.label_count);
    if (target == CnfTarget::optimal_alphas) {
        beta = BetaMap::from_knowledge(task.knowledge);
    } else {
        for (std::uint64_t c = 0; c < cells; ++c)
            for (int y = 0; y < task.label_count; ++y) {
                const int v = beta_var[c * task.label_count + y];
                if (v && truthy(v)) beta.force(c, y);
            }
    }
    return {std::move(alpha), std::move(beta)};
}

void write_dimacs(const CnfFormula& formula, std::ostream& sink) {
    formula.validate();
    std::ostringstream out;
    for (const auto& c : formula.comments) out << "c " << c << "\n";
    for (const auto& [v, role] : formula.legend) out << "c legend " << v << " " << role << "\n";
    for (std::size_t i = 0; i < formula.projection.size(); i += 10) {
        out << "c ind";
        for (std::size_t j = i; j < std::min(i + 10, formula.projection.size()); ++j)
            out << " " << formula.projection[j];
        out << " 0\n";
    }
    out << "p cnf " << formula.var_count << " " << formula.clauses.size() << "\n";
    for (const auto& cl : formula.clauses) {
        for (int lit : cl) out << lit << " ";
        out << "0\n";
    }
    sink << out.str();
    if (!sink) throw validation_error("failed to write DIMACS output");
}

std::string to_dimacs(const CnfFormula& formula) {
    std::ostringstream os;
    write_dimacs(formula, os);
    return os.str();
}

namespace {

// Backtracking evaluator with clause-falsification pruning. Variables are
// assigned in order: projected first, then the rest.
struct Enumerator {
    const CnfFormula&             f;
    std::vector<int>              order;     // variable ids in decision order
    std::vector<int>              value;     // var -> -1 unknown / 0 / 1
    std::vector<std::vector<int>> by_var;    // var -> clause indices containing it
    std::size_t                   projected; // first `projected` entries of order

    explicit Enumerator(const CnfFormula& formula) : f(formula) {
        std::vector<char> in_proj(f.var_count + 1, 0);
        for (int v : f.projection) in_proj[v] = 1;
        for (int v : f.projection) order.push_back(v);
        projected = order.size();
        for (int v = 1; v <= f.var_count; ++v)
            if (!in_proj[v]) order.push_back(v);
        value.assign(f.var_count + 1, -1);
        by_var.assign(f.var_count + 1, {});
        for (std::size_t i = 0; i < f.clauses.size(); ++i)
            for (int lit : f.clauses[i]) by_var[std::abs(lit)].push_back(static_cast<int>(i));
    }

    bool clause_false(int ci) const {
        for (int lit : f.clauses[ci]) {
            const int v = value[std::abs(lit)];
            if (v == -1) return false;
            if ((lit > 0 && v == 1) || (lit < 0 && v == 0)) return false;
        }
        return true;
    }

    bool consistent(int var) const {
        for (int ci : by_var[var])
            if (clause_false(ci)) return false;
        return true;
    }

    bool extendable(std::size_t at) {
        if (at == order.size()) return true;
        const int var = order[at];
        for (int bit = 0; bit < 2; ++bit) {
            value[var] = bit;
            if (consistent(var) && extendable(at + 1)) {
                value[var] = -1;
                return true;
            }
        }
        value[var] = -1;
        return false;
    }

    void count_projected(std::size_t at, mpz_class& count) {
        if (at == projected) {
            if (extendable(at)) ++count;
            return;
        }
        const int var = order[at];
        for (int bit = 0; bit < 2; ++bit) {
            value[var] = bit;
            if (consistent(var)) count_projected(at + 1, count);
        }
        value[var] = -1;
    }
};

} // namespace

mpz_class exhaustive_model_count(const CnfFormula& formula, int var_cap) {
    formula.validate();
    if (formula.var_count > var_cap)
        throw budget_error("formula too large: " + std::to_string(formula.var_count) +
                           " variables exceed the cap of " + std::to_string(var_cap));
    Enumerator e(formula);
    mpz_class  count = 0;
    e.count_projected(0, count);
    return count;
}

} // namespace rsc
