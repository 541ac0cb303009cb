#include "rsc/count.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <functional>
#include <map>
#include <thread>

namespace rsc {

int resolve_workers(int requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("RSC_WORKERS")) {
        const int w = std::atoi(env);
        if (w > 0) return w;
    }
    return 1;
}

namespace {

constexpr std::uint64_t kCellTableCap = std::uint64_t{1} << 24;

enum class SearchMode { rs, jrs };

mpz_class u64_to_mpz(std::uint64_t v) {
    mpz_class z;
    mpz_import(z.get_mpz_t(), 1, 1, sizeof v, 0, 0, &v);
    return z;
}

mpz_class pow_mpz(std::uint64_t base, std::uint64_t exp) {
    mpz_class b = u64_to_mpz(base), r;
    mpz_pow_ui(r.get_mpz_t(), b.get_mpz_t(), static_cast<unsigned long>(exp));
    return r;
}

// Per support world, one label per constraint component; -1 = unconstrained.
// Component 0 is the task knowledge, the rest come from multi-task extras.
struct Labeling {
    int              comps = 1;
    std::vector<int> label_counts;
    std::vector<int> labels; // support position * comps + comp
    bool             fully_constrained = true;
};

Labeling build_labeling(const TaskSpec& task, const MitigationSet& ms) {
    Labeling lab;
    lab.comps = 1 + static_cast<int>(ms.multitask.size());
    if (lab.comps > 32) throw validation_error("at most 31 multitask extras supported");
    lab.label_counts.push_back(task.label_count);
    for (const auto& e : ms.multitask) lab.label_counts.push_back(e.knowledge.label_count());
    const auto& supp = task.support.indices();
    lab.labels.assign(supp.size() * lab.comps, -1);
    for (std::size_t p = 0; p < supp.size(); ++p) {
        lab.labels[p * lab.comps] = task.knowledge.label_of(supp[p]);
        for (std::size_t j = 0; j < ms.multitask.size(); ++j) {
            const auto& e = ms.multitask[j];
            if (std::binary_search(e.worlds.begin(), e.worlds.end(), supp[p]))
                lab.labels[p * lab.comps + 1 + j] = e.knowledge.label_of(supp[p]);
            else
                lab.fully_constrained = false;
        }
    }
    return lab;
}

// Shared bookkeeping for binding support worlds to image cells, with the
// admissibility checks woven in. Bindings follow strict LIFO discipline.
class CellBinder {
  public:
    CellBinder(const TaskSpec& task, const MitigationSet& ms, const Labeling& lab, SearchMode mode)
        : task_(task), lab_(lab), mode_(mode), reconstruction_(ms.reconstruction) {
        cells_ = task.space->world_count_u64();
        if (cells_ > kCellTableCap)
            throw budget_error("concept space too large for table-based search");
        cell_label_.assign(cells_ * lab.comps, -1);
        occ_.assign(cells_, 0);
        distill_cell_.assign(cells_, 0);
        if (ms.distillation_worlds) {
            for (std::uint64_t c : *ms.distillation_worlds) {
                distill_cell_[c] = 1;
                ++distill_count_;
                if (mode == SearchMode::jrs) cell_label_[c * lab.comps] = task.knowledge.label_of(c);
            }
        }
    }

    // Returns false and leaves the state untouched on an admissibility
    // conflict; 'rec' receives the undo record otherwise.
    bool bind(std::size_t p, std::uint64_t c, std::uint32_t& rec) {
        if (reconstruction_ && occ_[c] != 0) return false;
        const int* wl = &lab_.labels[p * lab_.comps];
        if (mode_ == SearchMode::rs && wl[0] != task_.knowledge.label_of(c)) return false;
        std::uint32_t set_mask = 0;
        for (int j = 0; j < lab_.comps; ++j) {
            if (wl[j] < 0) continue;
            int& slot = cell_label_[c * lab_.comps + j];
            if (slot == -1) {
                slot = wl[j];
                set_mask |= std::uint32_t{1} << j;
            } else if (slot != wl[j]) {
                for (int r = 0; r < j; ++r)
                    if (set_mask & (std::uint32_t{1} << r)) cell_label_[c * lab_.comps + r] = -1;
                return false;
            }
        }
        if (occ_[c]++ == 0) {
            ++reached_;
            if (distill_cell_[c]) ++reached_pinned_;
        }
        rec = set_mask;
        return true;
    }

    void unbind(std::size_t p, std::uint64_t c, std::uint32_t rec) {
        (void)p;
        if (--occ_[c] == 0) {
            --reached_;
            if (distill_cell_[c]) --reached_pinned_;
        }
        for (int j = 0; j < lab_.comps; ++j)
            if (rec & (std::uint32_t{1} << j)) cell_label_[c * lab_.comps + j] = -1;
    }

    // Histogram index for the current full assignment: reached cells that are
    // not distillation-pinned. Free beta cells = (|C| - pinned) - this.
    std::uint64_t reached_unpinned() const { return reached_ - reached_pinned_; }
    std::uint64_t cells() const { return cells_; }
    std::uint64_t distill_count() const { return distill_count_; }

  private:
    const TaskSpec& task_;
    const Labeling& lab_;
    SearchMode      mode_;
    bool            reconstruction_;
    std::uint64_t   cells_ = 0;
    std::vector<int>           cell_label_;
    std::vector<std::uint32_t> occ_;
    std::vector<char>          distill_cell_;
    std::uint64_t              distill_count_  = 0;
    std::uint64_t              reached_        = 0;
    std::uint64_t              reached_pinned_ = 0;
};

struct SearchResult {
    std::vector<std::uint64_t> hist; // by reached_unpinned at leaves
    bool truncated = false;
    std::uint64_t nodes = 0;

    void merge(const SearchResult& o) {
        if (o.hist.size() > hist.size()) hist.resize(o.hist.size(), 0);
        for (std::size_t i = 0; i < o.hist.size(); ++i) hist[i] += o.hist[i];
        truncated = truncated || o.truncated;
        nodes += o.nodes;
    }
    std::uint64_t leaves() const {
        std::uint64_t s = 0;
        for (auto v : hist) s += v;
        return s;
    }
};

// A leaf visitor used by enumerate_optimal_alphas; search stops once it
// returns false.
using LeafVisitor = std::function<bool()>;

// ---------------------------------------------------------------------------
// Factorized-family search: backtracking over per-group value tables.
// ---------------------------------------------------------------------------

struct FactorizedPlan {
    int                           k = 0;
    int                           groups = 0;
    std::vector<int>              group_of;    // factor -> group
    std::vector<int>              group_card;  // group -> cardinality
    std::vector<std::uint64_t>    strides;     // factor -> world index stride
    std::vector<std::vector<int>> values;      // group -> enumerated input values
    std::vector<int>              entry_group; // entry -> group
    std::vector<int>              entry_value; // entry -> input value
    std::vector<std::vector<int>> entry_pos;   // group -> value -> entry index (-1 = free)
    std::vector<std::vector<std::size_t>> cover; // entry -> covered support positions
    std::vector<int>              pinned;      // entry -> forced output value or -1
    std::vector<int>              supp_values; // position*k + factor
    mpz_class                     alpha_multiplier = 1;
};

FactorizedPlan build_factorized_plan(const TaskSpec& task, const MitigationSet& ms) {
    const ConceptSpace& space = *task.space;
    FactorizedPlan plan;
    plan.k      = space.k();
    plan.groups = task.family.group_count();
    plan.group_of.resize(plan.k);
    for (int i = 0; i < plan.k; ++i) plan.group_of[i] = task.family.group_of(i);
    plan.group_card.resize(plan.groups);
    for (int g = 0; g < plan.groups; ++g)
        plan.group_card[g] = space.cardinality(task.family.tie_groups[g].front());
    plan.strides.assign(plan.k, 1);
    for (int i = plan.k - 2; i >= 0; --i)
        plan.strides[i] = plan.strides[i + 1] * static_cast<std::uint64_t>(space.cardinality(i + 1));

    const auto& supp = task.support.indices();
    plan.supp_values.resize(supp.size() * plan.k);
    std::vector<std::vector<char>> used(plan.groups);
    for (int g = 0; g < plan.groups; ++g) used[g].assign(plan.group_card[g], 0);
    for (std::size_t p = 0; p < supp.size(); ++p) {
        const World w = space.world_at(supp[p]);
        for (int i = 0; i < plan.k; ++i) {
            plan.supp_values[p * plan.k + i]  = w[i];
            used[plan.group_of[i]][w[i]] = 1;
        }
    }
    // Supervision pins t(g_i) = g_i; pinned inputs join the enumerated set.
    std::vector<std::vector<char>> pin(plan.groups);
    for (int g = 0; g < plan.groups; ++g) pin[g].assign(plan.group_card[g], 0);
    if (ms.concept_supervision) {
        for (std::uint64_t gi : ms.concept_supervision->worlds) {
            const World w = space.world_at(gi);
            for (int i : ms.concept_supervision->factors) {
                pin[plan.group_of[i]][w[i]]  = 1;
                used[plan.group_of[i]][w[i]] = 1;
            }
        }
    }
    plan.entry_pos.resize(plan.groups);
    for (int g = 0; g < plan.groups; ++g) {
        plan.entry_pos[g].assign(plan.group_card[g], -1);
        std::vector<int> vals;
        for (int v = 0; v < plan.group_card[g]; ++v)
            if (used[g][v]) vals.push_back(v);
        for (int v : vals) {
            plan.entry_pos[g][v] = static_cast<int>(plan.entry_group.size());
            plan.entry_group.push_back(g);
            plan.entry_value.push_back(v);
            plan.pinned.push_back(pin[g][v] ? v : -1);
        }
        plan.values.push_back(std::move(vals));
        plan.alpha_multiplier *=
            pow_mpz(plan.group_card[g], plan.group_card[g] - plan.values[g].size());
    }
    plan.cover.assign(plan.entry_group.size(), {});
    for (std::size_t p = 0; p < supp.size(); ++p) {
        int last = 0;
        for (int i = 0; i < plan.k; ++i)
            last = std::max(last, plan.entry_pos[plan.group_of[i]][plan.supp_values[p * plan.k + i]]);
        plan.cover[last].push_back(p);
    }
    return plan;
}

class FactorizedSearch {
  public:
    FactorizedSearch(const TaskSpec& task, const MitigationSet& ms, const Labeling& lab,
                     SearchMode mode, const FactorizedPlan& plan)
        : plan_(plan), binder_(task, ms, lab, mode) {
        tables_.resize(plan.groups);
        for (int g = 0; g < plan.groups; ++g) tables_[g].assign(plan.group_card[g], -1);
        result_.hist.assign(task.support.size() + 1, 0);
        // Per-entry undo scratch: each entry occupies one active stack frame.
        rec_scratch_.resize(plan.cover.size());
        cell_scratch_.resize(plan.cover.size());
        for (std::size_t e = 0; e < plan.cover.size(); ++e) {
            rec_scratch_[e].resize(plan.cover[e].size());
            cell_scratch_[e].resize(plan.cover[e].size());
        }
    }

    std::size_t depth_count() const { return plan_.entry_group.size(); }

    // prefix[d] = candidate rank at entry d; empty prefix = whole space.
    void run(const std::vector<int>& prefix, std::uint64_t node_budget, LeafVisitor* visitor) {
        visitor_      = visitor;
        budget_left_  = node_budget;
        stop_         = false;
        if (!apply_prefix(prefix, 0)) return;
    }

    SearchResult& result() { return result_; }

    int candidate_count(std::size_t e) const {
        return plan_.pinned[e] >= 0 ? 1 : plan_.group_card[plan_.entry_group[e]];
    }

  private:
    int candidate_at(std::size_t e, int rank) const {
        if (plan_.pinned[e] >= 0) return plan_.pinned[e];
        const int id = plan_.entry_value[e];
        if (rank == 0) return id;           // identity-first ordering
        return rank <= id ? rank - 1 : rank; // then ascending, skipping id
    }

    bool apply_prefix(const std::vector<int>& prefix, std::size_t d) {
        if (d == prefix.size()) {
            dfs(d);
            return true;
        }
        return try_candidate(d, candidate_at(d, prefix[d]),
                             [&] { return apply_prefix(prefix, d + 1); });
    }

    template <typename Next>
    bool try_candidate(std::size_t e, int v, const Next& next) {
        if (budget_left_ == 0) {
            result_.truncated = true;
            stop_             = true;
            return false;
        }
        --budget_left_;
        ++result_.nodes;
        const int g                      = plan_.entry_group[e];
        tables_[g][plan_.entry_value[e]] = v;
        std::size_t bound                = 0;
        bool        ok                   = true;
        auto&       recs                 = rec_scratch_[e];
        auto&       cs                   = cell_scratch_[e];
        const auto& cover                = plan_.cover[e];
        for (std::size_t idx = 0; idx < cover.size(); ++idx) {
            const std::size_t p = cover[idx];
            std::uint64_t     c = 0;
            for (int i = 0; i < plan_.k; ++i)
                c += plan_.strides[i] *
                     static_cast<std::uint64_t>(
                         tables_[plan_.group_of[i]][plan_.supp_values[p * plan_.k + i]]);
            cs[idx] = c;
            std::uint32_t rec = 0;
            if (!binder_.bind(p, c, rec)) {
                ok = false;
                break;
            }
            recs[idx] = rec;
            ++bound;
        }
        bool cont = true;
        if (ok) cont = next();
        for (std::size_t idx = bound; idx-- > 0;) binder_.unbind(cover[idx], cs[idx], recs[idx]);
        tables_[g][plan_.entry_value[e]] = -1;
        return cont && !stop_;
    }

    void dfs(std::size_t e) {
        if (stop_) return;
        if (e == plan_.entry_group.size()) {
            ++result_.hist[binder_.reached_unpinned()];
            if (visitor_ && !(*visitor_)()) stop_ = true;
            return;
        }
        const int n = candidate_count(e);
        for (int rank = 0; rank < n && !stop_; ++rank)
            try_candidate(e, candidate_at(e, rank), [&] {
                dfs(e + 1);
                return true;
            });
    }

  public:
    const std::vector<std::vector<int>>& tables() const { return tables_; }
    const CellBinder& binder() const { return binder_; }

  private:
    const FactorizedPlan& plan_;
    CellBinder            binder_;
    std::vector<std::vector<int>> tables_;
    std::vector<std::vector<std::uint32_t>> rec_scratch_;
    std::vector<std::vector<std::uint64_t>> cell_scratch_;
    SearchResult          result_;
    LeafVisitor*          visitor_     = nullptr;
    std::uint64_t         budget_left_ = 0;
    bool                  stop_        = false;
};

// ---------------------------------------------------------------------------
// Joint-family search: backtracking over support-world image cells.
// ---------------------------------------------------------------------------

struct JointPlan {
    std::vector<std::uint64_t> supp;
    std::vector<std::vector<std::uint64_t>> candidates; // per position, identity first
    mpz_class alpha_multiplier = 1;
};

JointPlan build_joint_plan(const TaskSpec& task, const MitigationSet& ms) {
    const ConceptSpace& space = *task.space;
    JointPlan plan;
    plan.supp = task.support.indices();
    const std::uint64_t cells = space.world_count_u64();
    if (cells > kCellTableCap) throw budget_error("concept space too large for table-based search");

    std::vector<char> supervised_world(cells, 0);
    std::vector<char> supervised_factor(space.k(), 0);
    if (ms.concept_supervision) {
        for (std::uint64_t g : ms.concept_supervision->worlds) supervised_world[g] = 1;
        for (int i : ms.concept_supervision->factors) supervised_factor[i] = 1;
    }
    auto mask_ok = [&](std::uint64_t g, std::uint64_t c) {
        if (!supervised_world[g]) return true;
        const World gw = space.world_at(g), cw = space.world_at(c);
        for (int i = 0; i < space.k(); ++i)
            if (supervised_factor[i] && cw[i] != gw[i]) return false;
        return true;
    };
    plan.candidates.resize(plan.supp.size());
    for (std::size_t p = 0; p < plan.supp.size(); ++p) {
        const std::uint64_t g = plan.supp[p];
        auto&               cand = plan.candidates[p];
        if (mask_ok(g, g)) cand.push_back(g); // identity first
        for (std::uint64_t c = 0; c < cells; ++c)
            if (c != g && mask_ok(g, c)) cand.push_back(c);
    }
    // Off-support worlds are free, unless supervision constrains them.
    std::uint64_t mask_size = 1;
    for (int i = 0; i < space.k(); ++i)
        if (!supervised_factor[i]) mask_size *= static_cast<std::uint64_t>(space.cardinality(i));
    if (!ms.concept_supervision) mask_size = cells;
    std::uint64_t off_supervised = 0, off_total = cells - plan.supp.size();
    if (ms.concept_supervision)
        for (std::uint64_t g : ms.concept_supervision->worlds)
            if (!task.support.contains(g)) ++off_supervised;
    plan.alpha_multiplier =
        pow_mpz(mask_size, off_supervised) * pow_mpz(cells, off_total - off_supervised);
    return plan;
}

class JointSearch {
  public:
    JointSearch(const TaskSpec& task, const MitigationSet& ms, const Labeling& lab, SearchMode mode,
                const JointPlan& plan)
        : plan_(plan), binder_(task, ms, lab, mode) {
        assignment_.assign(plan.supp.size(), 0);
        result_.hist.assign(plan.supp.size() + 1, 0);
    }

    void run(const std::vector<int>& prefix, std::uint64_t node_budget, LeafVisitor* visitor) {
        visitor_     = visitor;
        budget_left_ = node_budget;
        stop_        = false;
        apply_prefix(prefix, 0);
    }

    SearchResult& result() { return result_; }
    int candidate_count(std::size_t p) const { return static_cast<int>(plan_.candidates[p].size()); }
    std::size_t depth_count() const { return plan_.supp.size(); }
    const std::vector<std::uint64_t>& assignment() const { return assignment_; }

  private:
    bool apply_prefix(const std::vector<int>& prefix, std::size_t d) {
        if (d == prefix.size()) {
            dfs(d);
            return true;
        }
        return try_candidate(d, prefix[d], [&] { return apply_prefix(prefix, d + 1); });
    }

    template <typename Next>
    bool try_candidate(std::size_t p, int rank, const Next& next) {
        if (budget_left_ == 0) {
            result_.truncated = true;
            stop_             = true;
            return false;
        }
        --budget_left_;
        ++result_.nodes;
        const std::uint64_t c = plan_.candidates[p][rank];
        std::uint32_t       rec;
        if (!binder_.bind(p, c, rec)) return !stop_;
        assignment_[p] = c;
        bool cont      = next();
        binder_.unbind(p, c, rec);
        return cont && !stop_;
    }

    void dfs(std::size_t p) {
        if (stop_) return;
        if (p == plan_.supp.size()) {
            ++result_.hist[binder_.reached_unpinned()];
            if (visitor_ && !(*visitor_)()) stop_ = true;
            return;
        }
        const int n = candidate_count(p);
        for (int rank = 0; rank < n && !stop_; ++rank)
            try_candidate(p, rank, [&] {
                dfs(p + 1);
                return true;
            });
    }

    const JointPlan& plan_;
    CellBinder       binder_;
    std::vector<std::uint64_t> assignment_;
    SearchResult     result_;
    LeafVisitor*     visitor_     = nullptr;
    std::uint64_t    budget_left_ = 0;
    bool             stop_        = false;
};

// ---------------------------------------------------------------------------
// Parallel driver: stripes a shallow candidate-prefix space across workers.
// ---------------------------------------------------------------------------

template <typename SearchT, typename PlanT>
SearchResult run_parallel(const TaskSpec& task, const MitigationSet& ms, const Labeling& lab,
                          SearchMode mode, const PlanT& plan, int workers,
                          std::uint64_t node_budget) {
    // Pick a prefix depth whose candidate product gives each worker a few
    // stripes; determinism comes from the fixed prefix -> worker mapping.
    SearchT probe(task, ms, lab, mode, plan);
    std::vector<int> widths;
    std::uint64_t    combos = 1;
    const std::size_t max_depth = std::min<std::size_t>(3, probe.depth_count());
    for (std::size_t d = 0; combos < static_cast<std::uint64_t>(workers) * 4 && d < max_depth; ++d) {
        const int w = probe.candidate_count(d);
        if (w <= 0) break;
        widths.push_back(w);
        combos *= static_cast<std::uint64_t>(w);
    }
    if (workers <= 1 || combos <= 1) {
        SearchT s(task, ms, lab, mode, plan);
        s.run({}, node_budget, nullptr);
        return s.result();
    }

    std::vector<SearchResult> partial(workers);
    auto worker_fn = [&](int w) {
        SearchT s(task, ms, lab, mode, plan);
        std::uint64_t slice = node_budget / workers;
        // Budget is split per prefix lazily: each stripe reuses the worker's
        // remaining allowance.
        std::uint64_t used = 0;
        for (std::uint64_t combo = w; combo < combos; combo += workers) {
            std::vector<int> prefix(widths.size());
            std::uint64_t    rest = combo;
            for (std::size_t d = widths.size(); d-- > 0;) {
                prefix[d] = static_cast<int>(rest % widths[d]);
                rest /= widths[d];
            }
            const std::uint64_t before = s.result().nodes;
            s.run(prefix, slice - used, nullptr);
            used += s.result().nodes - before;
            if (used >= slice) {
                s.result().truncated = true;
                break;
            }
        }
        partial[w] = std::move(s.result());
    };
    std::vector<std::thread> threads;
    for (int w = 0; w < workers; ++w) threads.emplace_back(worker_fn, w);
    for (auto& t : threads) t.join();
    SearchResult merged;
    for (int w = 0; w < workers; ++w) merged.merge(partial[w]);
    return merged;
}

// ---------------------------------------------------------------------------
// Closed forms for the joint family.
// ---------------------------------------------------------------------------

// Number of ways to distribute the support label classes onto distinct cells
// (per class sizes s_t), weighting每 leftover cell. Computed as a DP over
// "cells used so far".
struct JointClosedForm {
    mpz_class weighted;   // sum over admissible maps of Y^(free cells)
    mpz_class unweighted; // number of admissible maps
};

JointClosedForm joint_closed_form(const TaskSpec& task, const Labeling& lab) {
    const std::uint64_t cells = task.space->world_count_u64();
    const auto&         supp  = task.support.indices();
    std::map<std::vector<int>, std::uint64_t> classes;
    for (std::size_t p = 0; p < supp.size(); ++p) {
        std::vector<int> key(lab.labels.begin() + p * lab.comps,
                             lab.labels.begin() + (p + 1) * lab.comps);
        ++classes[key];
    }
    std::uint64_t max_s = 0;
    for (const auto& [k, s] : classes) max_s = std::max(max_s, s);
    if (cells > 100000 || max_s > 5000)
        throw budget_error("joint closed form size guard exceeded");

    // Surjection counts S(n, m) for n up to the largest class size.
    std::vector<std::vector<mpz_class>> surj(max_s + 1, std::vector<mpz_class>(max_s + 1, 0));
    surj[0][0] = 1;
    for (std::uint64_t n = 1; n <= max_s; ++n)
        for (std::uint64_t m = 1; m <= n; ++m)
            surj[n][m] = mpz_class(m) * (surj[n - 1][m] + surj[n - 1][m - 1]);

    std::vector<mpz_class> g(supp.size() + 1, 0);
    g[0] = 1;
    std::uint64_t reach_cap = 0;
    for (const auto& [key, s] : classes) {
        std::vector<mpz_class> next(supp.size() + 1, 0);
        for (std::uint64_t u = 0; u <= reach_cap; ++u) {
            if (g[u] == 0) continue;
            for (std::uint64_t m = 1; m <= s && u + m <= cells; ++m) {
                mpz_class binom;
                mpz_bin_ui(binom.get_mpz_t(), mpz_class(u64_to_mpz(cells - u)).get_mpz_t(),
                           static_cast<unsigned long>(m));
                next[u + m] += g[u] * binom * surj[s][m];
            }
        }
        g         = std::move(next);
        reach_cap = std::min<std::uint64_t>(reach_cap + max_s, supp.size());
    }

    JointClosedForm out;
    out.weighted   = 0;
    out.unweighted = 0;
    for (std::uint64_t u = 0; u <= supp.size(); ++u) {
        if (g[u] == 0) continue;
        out.unweighted += g[u];
        out.weighted += g[u] * pow_mpz(task.label_count, cells - u);
    }
    return out;
}

// RS count over the joint family decomposes per support world when neither
// reconstruction nor multitask couples worlds.
mpz_class rs_joint_closed_form(const TaskSpec& task, const MitigationSet& ms) {
    const ConceptSpace& space = *task.space;
    const std::uint64_t cells = space.world_count_u64();
    if (cells > kCellTableCap) throw budget_error("concept space too large for table-based search");

    std::vector<std::uint64_t> fiber(task.label_count, 0);
    for (std::uint64_t c = 0; c < cells; ++c) ++fiber[task.knowledge.label_of(c)];

    std::vector<char> supervised_world(cells, 0);
    std::vector<char> supervised_factor(space.k(), 0);
    if (ms.concept_supervision) {
        for (std::uint64_t g : ms.concept_supervision->worlds) supervised_world[g] = 1;
        for (int i : ms.concept_supervision->factors) supervised_factor[i] = 1;
    }
    auto masked_fiber = [&](std::uint64_t g) -> std::uint64_t {
        const World gw = space.world_at(g);
        const int   want = task.knowledge.label_of(g);
        std::uint64_t n  = 0;
        for (std::uint64_t c = 0; c < cells; ++c) {
            if (task.knowledge.label_of(c) != want) continue;
            const World cw = space.world_at(c);
            bool        ok = true;
            for (int i = 0; i < space.k() && ok; ++i)
                if (supervised_factor[i] && cw[i] != gw[i]) ok = false;
            if (ok) ++n;
        }
        return n;
    };

    mpz_class total = 1;
    for (std::uint64_t g : task.support.indices()) {
        const std::uint64_t n =
            supervised_world[g] ? masked_fiber(g)
                                : fiber[task.knowledge.label_of(g)];
        total *= u64_to_mpz(n);
    }
    // Off-support worlds are unconstrained except by supervision.
    std::uint64_t mask_size = 1;
    for (int i = 0; i < space.k(); ++i)
        if (!supervised_factor[i]) mask_size *= static_cast<std::uint64_t>(space.cardinality(i));
    for (std::uint64_t g = 0; g < cells; ++g) {
        if (task.support.contains(g)) continue;
        total *= u64_to_mpz(supervised_world[g] ? mask_size : cells);
    }
    return total;
}

// ---------------------------------------------------------------------------
// Report assembly.
// ---------------------------------------------------------------------------

std::string family_name(const TaskSpec& task) {
    if (task.family.kind == AlphaFamily::Kind::joint) return "joint";
    for (const auto& g : task.family.tie_groups)
        if (g.size() > 1) return "tied";
    return "untied";
}

struct EngineTotals {
    mpz_class weighted;
    mpz_class unweighted;
    bool      exact  = true;
    std::uint64_t nodes = 0;
    std::string method;
};

EngineTotals run_jrs_engine(const TaskSpec& task, const MitigationSet& ms, const Labeling& lab,
                            int workers, const CountOptions& opts) {
    EngineTotals totals;
    const bool joint = task.family.kind == AlphaFamily::Kind::joint;
    const bool closed_form_ok = joint && !ms.concept_supervision && !ms.reconstruction &&
                                !ms.distillation_worlds && lab.fully_constrained;
    if (closed_form_ok) {
        const auto cf = joint_closed_form(task, lab);
        const mpz_class mult =
            pow_mpz(task.space->world_count_u64(),
                    task.space->world_count_u64() - task.support.size());
        totals.weighted   = cf.weighted * mult;
        totals.unweighted = cf.unweighted * mult;
        totals.method     = "factored";
        return totals;
    }
    SearchResult res;
    mpz_class    mult;
    std::uint64_t free_base;
    if (joint) {
        const JointPlan plan = build_joint_plan(task, ms);
        res  = run_parallel<JointSearch>(task, ms, lab, SearchMode::jrs, plan, workers,
                                         opts.node_budget);
        mult = plan.alpha_multiplier;
    } else {
        const FactorizedPlan plan = build_factorized_plan(task, ms);
        res  = run_parallel<FactorizedSearch>(task, ms, lab, SearchMode::jrs, plan, workers,
                                              opts.node_budget);
        mult = plan.alpha_multiplier;
    }
    std::uint64_t distill = ms.distillation_worlds ? ms.distillation_worlds->size() : 0;
    free_base             = task.space->world_count_u64() - distill;
    totals.weighted = 0;
    totals.unweighted = 0;
    for (std::size_t j = 0; j < res.hist.size(); ++j) {
        if (res.hist[j] == 0) continue;
        totals.unweighted += u64_to_mpz(res.hist[j]);
        totals.weighted += u64_to_mpz(res.hist[j]) * pow_mpz(task.label_count, free_base - j);
    }
    totals.weighted *= mult;
    totals.unweighted *= mult;
    totals.exact  = !res.truncated;
    totals.nodes  = res.nodes;
    totals.method = "pruned";

    if (opts.check_int128 && totals.exact) {
        // Redo the weighted sum with 128-bit arithmetic as an independent
        // big-integer cross-check; skipped (not failed) on overflow.
        bool               overflow = false;
        unsigned __int128  sum      = 0;
        for (std::size_t j = 0; j < res.hist.size() && !overflow; ++j) {
            if (res.hist[j] == 0) continue;
            unsigned __int128 w = 1;
            for (std::uint64_t e = 0; e < free_base - j && !overflow; ++e) {
                unsigned __int128 nw = w * static_cast<unsigned>(task.label_count);
                if (task.label_count > 1 && nw / static_cast<unsigned>(task.label_count) != w)
                    overflow = true;
                w = nw;
            }
            unsigned __int128 term = w * res.hist[j];
            if (res.hist[j] && term / res.hist[j] != w) overflow = true;
            unsigned __int128 ns = sum + term;
            if (ns < sum) overflow = true;
            sum = ns;
        }
        if (!overflow) {
            mpz_class ref = u64_to_mpz(static_cast<std::uint64_t>(sum >> 64));
            ref <<= 64;
            ref += u64_to_mpz(static_cast<std::uint64_t>(sum));
            mpz_class engine = totals.weighted / mult;
            if (ref != engine)
                throw std::logic_error("128-bit cross-check disagrees with bignum count");
            totals.method += "+int128";
        }
    }
    return totals;
}

mpz_class subtrahend_for(const TaskSpec& task, const MitigationSet& ms, const CountOptions& opts,
                         std::string& rule) {
    if (!ms.any()) {
        if (task.family.kind == AlphaFamily::Kind::joint) {
            rule = "theorem-closed-form";
            return intended_pair_count(task);
        }
        rule = "family-closed-form";
        return representable_intended_count(task, nullptr, opts.intended_cap);
    }
    rule = "mitigation-filtered";
    return representable_intended_count(task, &ms, opts.intended_cap);
}

CountReport base_report(const TaskSpec& task, const MitigationSet& ms, const char* mode) {
    CountReport r;
    r.task_digest = task.digest();
    r.task_name   = task.name;
    r.mode        = mode;
    r.family      = family_name(task);
    r.mitigations = ms.summary();
    return r;
}

CountReport run_rs(const TaskSpec& task, const MitigationSet& ms, const CountOptions& opts) {
    const auto t0 = std::chrono::steady_clock::now();
    CountReport r = base_report(task, ms, "rs");
    r.workers     = resolve_workers(opts.workers);

    const Labeling lab   = build_labeling(task, ms);
    const bool     joint = task.family.kind == AlphaFamily::Kind::joint;
    if (joint && !ms.reconstruction && ms.multitask.empty()) {
        r.rs_admissible_count = rs_joint_closed_form(task, ms);
        r.method              = "factored";
    } else if (joint) {
        const JointPlan plan = build_joint_plan(task, ms);
        SearchResult    res  = run_parallel<JointSearch>(task, ms, lab, SearchMode::rs, plan,
                                                         r.workers, opts.node_budget);
        r.rs_admissible_count = u64_to_mpz(res.leaves()) * plan.alpha_multiplier;
        r.exact               = !res.truncated;
        r.method              = "pruned";
    } else {
        const FactorizedPlan plan = build_factorized_plan(task, ms);
        SearchResult res = run_parallel<FactorizedSearch>(task, ms, lab, SearchMode::rs, plan,
                                                          r.workers, opts.node_budget);
        r.rs_admissible_count = u64_to_mpz(res.leaves()) * plan.alpha_multiplier;
        r.exact               = !res.truncated;
        r.method              = "pruned";
    }
    r.rs_count = *r.rs_admissible_count - 1;
    if (!r.exact) r.warnings.push_back("node budget exhausted; counts are partial lower bounds");

    // How many counted RSs are intended-semantics pairs in disguise
    // (beta* invariant under the witness transform).
    try {
        MitigationSet with_dist = ms;
        std::vector<std::uint64_t> all(task.space->world_count_u64());
        for (std::uint64_t i = 0; i < all.size(); ++i) all[i] = i;
        with_dist.distillation_worlds = std::move(all);
        r.rs_witness_admitting =
            representable_intended_count(task, &with_dist, opts.intended_cap) - 1;
    } catch (const budget_error&) {
        r.warnings.push_back("witness-admitting RS census skipped (enumeration cap)");
    }

    r.elapsed_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

CountReport run_jrs(const TaskSpec& task, const MitigationSet& ms, const CountOptions& opts) {
    const auto t0 = std::chrono::steady_clock::now();
    CountReport r = base_report(task, ms, "jrs");
    r.workers     = resolve_workers(opts.workers);

    const Labeling lab    = build_labeling(task, ms);
    EngineTotals   totals = run_jrs_engine(task, ms, lab, r.workers, opts);
    r.method              = totals.method;
    r.exact               = totals.exact;
    if (!r.exact) r.warnings.push_back("node budget exhausted; counts are partial lower bounds");

    r.admissible_alpha_count = totals.unweighted;
    r.optimal_pair_count     = totals.weighted;
    r.intended_subtrahend    = subtrahend_for(task, ms, opts, r.subtrahend_rule);
    r.jrs_count_redundant    = totals.weighted - *r.intended_subtrahend;
    r.jrs_count_nonredundant = totals.unweighted - *r.intended_subtrahend;
    if (*r.jrs_count_redundant < 0 || *r.jrs_count_nonredundant < 0)
        r.warnings.push_back(
            "intended-pair subtrahend exceeds the optimal-pair count; raw negative value "
            "reported (subtrahend rule: " + r.subtrahend_rule + ")");
    if (opts.check_int128 && totals.method.find("int128") != std::string::npos)
        r.int128_checked = true;

    r.elapsed_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

} // namespace

CountReport count_rs(const TaskSpec& task, const CountOptions& opts) {
    return run_rs(task, MitigationSet{}, opts);
}

CountReport count_jrs(const TaskSpec& task, JrsMode, const CountOptions& opts) {
    return run_jrs(task, MitigationSet{}, opts);
}

CountReport count_with_mitigations(const TaskSpec& task, const MitigationSet& ms,
                                   const std::string& mode, const CountOptions& opts) {
    if (mode == "rs") return run_rs(task, ms, opts);
    if (mode == "jrs" || mode == "jrs-redundant" || mode == "jrs-nonredundant")
        return run_jrs(task, ms, opts);
    throw validation_error("unknown count mode '" + mode + "'");
}

// ---------------------------------------------------------------------------
// Naive oracle.
// ---------------------------------------------------------------------------

namespace {

// Odometer over all family tables. Returns false once wrapped around.
bool advance(std::vector<int>& digits, const std::vector<int>& radix) {
    for (std::size_t i = digits.size(); i-- > 0;) {
        if (++digits[i] < radix[i]) return true;
        digits[i] = 0;
    }
    return false;
}

} // namespace

mpz_class naive_count_pairs(const TaskSpec& task, const CountOptions& opts) {
    return naive_count_pairs(task, MitigationSet{}, opts);
}

mpz_class naive_count_pairs(const TaskSpec& task, const MitigationSet& ms,
                            const CountOptions& opts) {
    const ConceptSpace& space = *task.space;
    const std::uint64_t cells = space.world_count_u64();

    // |V(A)| within the family.
    mpz_class alpha_space;
    std::vector<int> radix;
    const bool joint = task.family.kind == AlphaFamily::Kind::joint;
    if (joint) {
        alpha_space = pow_mpz(cells, cells);
        radix.assign(cells, static_cast<int>(cells));
    } else {
        alpha_space = 1;
        for (int g = 0; g < task.family.group_count(); ++g) {
            const int card = space.cardinality(task.family.tie_groups[g].front());
            alpha_space *= pow_mpz(card, card);
            for (int v = 0; v < card; ++v) radix.push_back(card);
        }
    }
    const mpz_class beta_space = pow_mpz(task.label_count, cells);
    if (alpha_space * beta_space > u64_to_mpz(opts.naive_budget))
        throw budget_error("naive pair space exceeds budget");

    std::vector<std::uint64_t> supp_labels;
    const auto& supp = task.support.indices();
    for (std::uint64_t g : supp) supp_labels.push_back(task.knowledge.label_of(g));

    mpz_class count = 0;
    std::vector<int> adig(radix.size(), 0);
    do {
        // Materialize alpha for this odometer state.
        AlphaMap alpha = [&] {
            if (joint) {
                std::vector<std::uint64_t> table(adig.begin(), adig.end());
                return AlphaMap::joint_table(task.space, std::move(table));
            }
            std::vector<std::vector<int>> tables;
            std::size_t                   at = 0;
            for (int g = 0; g < task.family.group_count(); ++g) {
                const int card = space.cardinality(task.family.tie_groups[g].front());
                tables.emplace_back(adig.begin() + at, adig.begin() + at + card);
                at += card;
            }
            return AlphaMap::factor_tables(task.space, task.family, std::move(tables));
        }();
        if (!admits_concept_supervision(alpha, ms)) continue;
        if (ms.reconstruction && !admits_reconstruction(alpha, task)) continue;
        if (!admits_multitask(alpha, task, ms)) continue;

        std::vector<std::uint64_t> image(supp.size());
        for (std::size_t p = 0; p < supp.size(); ++p) image[p] = alpha.apply(supp[p]);

        std::vector<int> bdig(cells, 0);
        const std::vector<int> bradix(cells, task.label_count);
        do {
            bool ok = true;
            for (std::size_t p = 0; p < supp.size() && ok; ++p)
                if (static_cast<std::uint64_t>(bdig[image[p]]) != supp_labels[p]) ok = false;
            if (ok && ms.distillation_worlds)
                for (std::uint64_t c : *ms.distillation_worlds) {
                    if (bdig[c] != task.knowledge.label_of(c)) {
                        ok = false;
                        break;
                    }
                }
            if (ok) ++count;
        } while (advance(bdig, bradix));
    } while (advance(adig, radix));
    return count;
}

// ---------------------------------------------------------------------------
// Enumeration.
// ---------------------------------------------------------------------------

EnumerationResult enumerate_optimal_alphas(const TaskSpec& task, std::uint64_t limit,
                                           const MitigationSet* ms_in, const CountOptions& opts) {
    if (limit < 1) throw validation_error("enumeration limit must be >= 1");
    MitigationSet        empty;
    const MitigationSet& ms  = ms_in ? *ms_in : empty;
    const Labeling       lab = build_labeling(task, ms);
    EnumerationResult    out;

    const ConceptSpace& space = *task.space;
    const auto&         supp  = task.support.indices();

    auto emit_beta = [&](const AlphaMap& alpha) {
        BetaMap beta = BetaMap::all_free(task.space, task.label_count);
        for (std::uint64_t g : supp) beta.force(alpha.apply(g), task.knowledge.label_of(g));
        if (ms.distillation_worlds)
            for (std::uint64_t c : *ms.distillation_worlds)
                beta.force(c, task.knowledge.label_of(c));
        return beta;
    };

    if (task.family.kind == AlphaFamily::Kind::joint) {
        const JointPlan plan = build_joint_plan(task, ms);
        JointSearch     s(task, ms, lab, SearchMode::jrs, plan);
        LeafVisitor visitor = [&]() {
            std::vector<std::uint64_t> table(space.world_count_u64());
            for (std::uint64_t w = 0; w < table.size(); ++w) table[w] = w;
            for (std::size_t p = 0; p < supp.size(); ++p) table[supp[p]] = s.assignment()[p];
            AlphaMap alpha = AlphaMap::joint_table(task.space, std::move(table));
            BetaMap  beta  = emit_beta(alpha);
            out.pairs.push_back({std::move(alpha), std::move(beta)});
            return out.pairs.size() < limit + 1;
        };
        s.run({}, opts.node_budget, &visitor);
    } else {
        const FactorizedPlan plan = build_factorized_plan(task, ms);
        FactorizedSearch     s(task, ms, lab, SearchMode::jrs, plan);
        LeafVisitor visitor = [&]() {
            std::vector<std::vector<int>> tables = s.tables();
            for (std::size_t g = 0; g < tables.size(); ++g)
                for (std::size_t v = 0; v < tables[g].size(); ++v)
                    if (tables[g][v] < 0) tables[g][v] = static_cast<int>(v);
            AlphaMap alpha = AlphaMap::factor_tables(task.space, task.family, std::move(tables));
            BetaMap  beta  = emit_beta(alpha);
            out.pairs.push_back({std::move(alpha), std::move(beta)});
            return out.pairs.size() < limit + 1;
        };
        s.run({}, opts.node_budget, &visitor);
    }
    if (out.pairs.size() > limit) {
        out.pairs.pop_back();
        out.truncated = true;
    }
    return out;
}

} // namespace rsc
