#include "rsc/maps.hpp"

#include <algorithm>
#include <numeric>

#include "rsc/mitigation.hpp"

namespace rsc {

AlphaMap AlphaMap::identity(SpacePtr space, AlphaFamily family) {
    AlphaMap a;
    a.space_  = std::move(space);
    a.family_ = std::move(family);
    if (a.family_.kind == AlphaFamily::Kind::joint) {
        const std::uint64_t n = a.space_->world_count_u64();
        a.joint_.resize(n);
        std::iota(a.joint_.begin(), a.joint_.end(), std::uint64_t{0});
    } else {
        for (const auto& group : a.family_.tie_groups) {
            std::vector<int> t(a.space_->cardinality(group.front()));
            std::iota(t.begin(), t.end(), 0);
            a.tables_.push_back(std::move(t));
        }
    }
    return a;
}

AlphaMap AlphaMap::joint_table(SpacePtr space, std::vector<std::uint64_t> table) {
    AlphaMap a;
    a.space_  = std::move(space);
    a.family_ = AlphaFamily::joint();
    const std::uint64_t n = a.space_->world_count_u64();
    if (table.size() != n) throw validation_error("joint alpha table must cover every world");
    for (std::uint64_t c : table)
        if (c >= n) throw validation_error("joint alpha table entry out of range");
    a.joint_ = std::move(table);
    return a;
}

AlphaMap AlphaMap::factor_tables(SpacePtr space, AlphaFamily family,
                                 std::vector<std::vector<int>> tables) {
    if (family.kind != AlphaFamily::Kind::factorized)
        throw validation_error("factor tables require a factorized family");
    AlphaMap a;
    a.space_  = std::move(space);
    a.family_ = std::move(family);
    if (tables.size() != a.family_.tie_groups.size())
        throw validation_error("one table per tie group required");
    for (std::size_t g = 0; g < tables.size(); ++g) {
        const int card = a.space_->cardinality(a.family_.tie_groups[g].front());
        if (static_cast<int>(tables[g].size()) != card)
            throw validation_error("factor table size mismatch for group " + std::to_string(g));
        for (int v : tables[g])
            if (v < 0 || v >= card)
                throw validation_error("factor table entry out of range in group " +
                                       std::to_string(g));
    }
    a.tables_ = std::move(tables);
    return a;
}

const std::vector<std::uint64_t>& AlphaMap::joint() const {
    if (!is_joint()) throw validation_error("alpha map is not in joint form");
    return joint_;
}

std::uint64_t AlphaMap::apply(std::uint64_t world_index) const {
    if (is_joint()) return joint_[world_index];
    World g = space_->world_at(world_index);
    for (int i = 0; i < space_->k(); ++i) g[i] = tables_[family_.group_of(i)][g[i]];
    return space_->index_of(g);
}

World AlphaMap::apply(const World& g) const {
    if (!space_->valid_world(g)) throw validation_error("alpha applied to invalid world");
    if (is_joint()) return space_->world_at(joint_[space_->index_of(g)]);
    World c = g;
    for (int i = 0; i < space_->k(); ++i) c[i] = tables_[family_.group_of(i)][g[i]];
    return c;
}

AlphaMap AlphaMap::expand() const {
    if (is_joint()) return *this;
    const std::uint64_t n = space_->world_count_u64();
    std::vector<std::uint64_t> table(n);
    for (std::uint64_t i = 0; i < n; ++i) table[i] = apply(i);
    return joint_table(space_, std::move(table));
}

bool AlphaMap::operator==(const AlphaMap& o) const {
    if (!(*space_ == *o.space_)) return false;
    const std::uint64_t n = space_->world_count_u64();
    for (std::uint64_t i = 0; i < n; ++i)
        if (apply(i) != o.apply(i)) return false;
    return true;
}

BetaMap::BetaMap(SpacePtr space, int label_count, std::vector<int> cells)
    : space_(std::move(space)), label_count_(label_count), cells_(std::move(cells)) {
    if (label_count_ < 1) throw validation_error("beta label count must be >= 1");
    if (cells_.size() != space_->world_count_u64())
        throw validation_error("beta table must have one cell per world");
    for (int y : cells_)
        if (y < -1 || y >= label_count_) throw validation_error("beta cell out of range");
}

BetaMap BetaMap::all_free(SpacePtr space, int label_count) {
    const std::uint64_t n = space->world_count_u64();
    return {std::move(space), label_count, std::vector<int>(n, -1)};
}

BetaMap BetaMap::from_knowledge(const KnowledgeTable& k) {
    return {k.space(), k.label_count(), k.table()};
}

void BetaMap::force(std::uint64_t cell, int label) {
    if (label < 0 || label >= label_count_) throw validation_error("beta label out of range");
    if (cells_[cell] >= 0 && cells_[cell] != label)
        throw validation_error("beta cell already forced to a different label");
    cells_[cell] = label;
}

std::uint64_t BetaMap::forced_count() const {
    return static_cast<std::uint64_t>(
        std::count_if(cells_.begin(), cells_.end(), [](int y) { return y >= 0; }));
}

IntendedWitness IntendedWitness::identity(const ConceptSpace& space) {
    IntendedWitness w;
    w.pi.resize(space.k());
    std::iota(w.pi.begin(), w.pi.end(), 0);
    for (int i = 0; i < space.k(); ++i) {
        std::vector<int> id(space.cardinality(i));
        std::iota(id.begin(), id.end(), 0);
        w.psi.push_back(std::move(id));
    }
    return w;
}

bool IntendedWitness::is_identity() const {
    for (std::size_t i = 0; i < pi.size(); ++i)
        if (pi[i] != static_cast<int>(i)) return false;
    for (const auto& p : psi)
        for (std::size_t v = 0; v < p.size(); ++v)
            if (p[v] != static_cast<int>(v)) return false;
    return true;
}

void validate_witness(const ConceptSpace& space, const IntendedWitness& w) {
    const int k = space.k();
    if (static_cast<int>(w.pi.size()) != k || static_cast<int>(w.psi.size()) != k)
        throw validation_error("witness arity mismatch");
    std::vector<bool> hit(k, false);
    for (int i = 0; i < k; ++i) {
        const int j = w.pi[i];
        if (j < 0 || j >= k || hit[j]) throw validation_error("witness pi is not a permutation");
        hit[j] = true;
        if (space.cardinality(j) != space.cardinality(i))
            throw validation_error("witness pi permutes factors of different cardinality");
        const int card = space.cardinality(i);
        if (static_cast<int>(w.psi[i].size()) != card)
            throw validation_error("witness psi_" + std::to_string(i) + " has wrong size");
        std::vector<bool> seen(card, false);
        for (int v : w.psi[i]) {
            if (v < 0 || v >= card || seen[v])
                throw validation_error("witness psi_" + std::to_string(i) + " is not a bijection");
            seen[v] = true;
        }
    }
}

std::uint64_t apply_alpha(const AlphaMap& alpha, std::uint64_t world_index) {
    return alpha.apply(world_index);
}

World apply_alpha(const AlphaMap& alpha, const World& g) { return alpha.apply(g); }

bool is_optimal_pair(const AlphaMap& alpha, const BetaMap& beta, const TaskSpec& task) {
    for (std::uint64_t g : task.support.indices()) {
        const std::uint64_t c = alpha.apply(g);
        const int y = beta.at(c);
        if (y < 0)
            throw validation_error("beta undefined on reached cell " +
                                   std::to_string(c));
        if (y != task.knowledge.label_of(g)) return false;
    }
    return true;
}

namespace {

// Cardinality-preserving permutations in lexicographic order. When
// canonical_card1 is set, factors of cardinality one are fixed pointwise;
// permuting them yields the same map, so this quotients out the aliasing.
std::vector<std::vector<int>> card_preserving_perms(const ConceptSpace& space,
                                                    bool canonical_card1) {
    const int k = space.k();
    if (k > 8) throw validation_error("permutation search supports at most 8 factors");
    std::vector<int> perm(k);
    std::iota(perm.begin(), perm.end(), 0);
    std::vector<std::vector<int>> out;
    do {
        bool ok = true;
        for (int i = 0; i < k && ok; ++i) {
            if (space.cardinality(perm[i]) != space.cardinality(i)) ok = false;
            if (canonical_card1 && space.cardinality(i) == 1 && perm[i] != i) ok = false;
        }
        if (ok) out.push_back(perm);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return out;
}

// Recovers psi from a joint alpha for a fixed pi, verifying
// alpha(g)_i = psi_i(g_{pi(i)}) on every world. Returns false if alpha does
// not factor through pi or some psi_i is not a bijection.
bool recover_psi(const ConceptSpace& space, const std::vector<std::uint64_t>& joint,
                 const std::vector<int>& pi, std::vector<std::vector<int>>& psi) {
    const int k = space.k();
    psi.assign(k, {});
    for (int i = 0; i < k; ++i) psi[i].assign(space.cardinality(i), -1);
    const std::uint64_t n = space.world_count_u64();
    for (std::uint64_t gi = 0; gi < n; ++gi) {
        const World g = space.world_at(gi);
        const World c = space.world_at(joint[gi]);
        for (int i = 0; i < k; ++i) {
            int& slot = psi[i][g[pi[i]]];
            if (slot == -1)
                slot = c[i];
            else if (slot != c[i])
                return false;
        }
    }
    for (int i = 0; i < k; ++i) {
        std::vector<bool> seen(space.cardinality(i), false);
        for (int v : psi[i]) {
            if (v < 0 || seen[v]) return false;
            seen[v] = true;
        }
    }
    return true;
}

World witness_preimage(const ConceptSpace& space, const IntendedWitness& w,
                       const std::vector<std::vector<int>>& psi_inv, const World& c) {
    World g(space.k());
    for (int i = 0; i < space.k(); ++i) g[w.pi[i]] = psi_inv[i][c[i]];
    return g;
}

std::vector<std::vector<int>> invert_psi(const IntendedWitness& w) {
    std::vector<std::vector<int>> inv(w.psi.size());
    for (std::size_t i = 0; i < w.psi.size(); ++i) {
        inv[i].assign(w.psi[i].size(), -1);
        for (std::size_t v = 0; v < w.psi[i].size(); ++v) inv[i][w.psi[i][v]] = static_cast<int>(v);
    }
    return inv;
}

} // namespace

std::optional<IntendedWitness> check_intended(const AlphaMap& alpha, const BetaMap& beta,
                                              const TaskSpec& task) {
    const ConceptSpace& space = *task.space;
    const AlphaMap joint = alpha.expand();
    for (const auto& pi : card_preserving_perms(space, false)) {
        IntendedWitness w;
        w.pi = pi;
        if (!recover_psi(space, joint.joint(), pi, w.psi)) continue;
        const auto psi_inv = invert_psi(w);
        bool ok = true;
        const std::uint64_t n = space.world_count_u64();
        for (std::uint64_t ci = 0; ci < n && ok; ++ci) {
            if (!beta.forced(ci)) continue;
            const World g = witness_preimage(space, w, psi_inv, space.world_at(ci));
            if (beta.at(ci) != task.knowledge.label_of(g)) ok = false;
        }
        if (ok) return w;
    }
    return std::nullopt;
}

mpz_class intended_pair_count(const ConceptSpace& space) {
    std::vector<int> cards;
    for (const auto& f : space.factors()) cards.push_back(f.cardinality);
    std::sort(cards.begin(), cards.end());
    mpz_class result = 1;
    std::size_t i = 0;
    while (i < cards.size()) {
        std::size_t j = i;
        while (j < cards.size() && cards[j] == cards[i]) ++j;
        mpz_class mult_fact;
        mpz_fac_ui(mult_fact.get_mpz_t(), static_cast<unsigned long>(j - i));
        result *= mult_fact;
        i = j;
    }
    for (int c : cards) {
        mpz_class f;
        mpz_fac_ui(f.get_mpz_t(), static_cast<unsigned long>(c));
        result *= f;
    }
    return result;
}

mpz_class intended_pair_count(const TaskSpec& task) { return intended_pair_count(*task.space); }

namespace {

mpz_class factorial(unsigned long n) {
    mpz_class f;
    mpz_fac_ui(f.get_mpz_t(), n);
    return f;
}

// Per-factor (joint family) or per-group (factorized) value pins implied by
// concept supervision under a fixed pi. Returns false on inconsistency.
bool supervision_pins(const TaskSpec& task, const MitigationSet& ms, const std::vector<int>& pi,
                      bool factorized, std::vector<std::vector<int>>& pins) {
    const ConceptSpace& space = *task.space;
    const int slots = factorized ? task.family.group_count() : space.k();
    pins.assign(slots, {});
    for (int s = 0; s < slots; ++s) {
        const int card =
            factorized ? space.cardinality(task.family.tie_groups[s].front()) : space.cardinality(s);
        pins[s].assign(card, -1);
    }
    if (!ms.concept_supervision) return true;
    for (std::uint64_t gi : ms.concept_supervision->worlds) {
        const World g = space.world_at(gi);
        for (int i : ms.concept_supervision->factors) {
            const int slot = factorized ? task.family.group_of(i) : i;
            const int in   = g[pi[i]];
            int&      pin  = pins[slot][in];
            if (pin == -1)
                pin = g[i];
            else if (pin != g[i])
                return false;
        }
    }
    // A bijection needs injective pins.
    for (const auto& p : pins) {
        std::vector<bool> used(p.size(), false);
        for (int v : p) {
            if (v < 0) continue;
            if (used[v]) return false;
            used[v] = true;
        }
    }
    return true;
}

mpz_class count_bijections_with_pins(const std::vector<int>& pins) {
    unsigned long free_slots = 0;
    for (int v : pins)
        if (v < 0) ++free_slots;
    return factorial(free_slots);
}

// Enumerates bijections consistent with pins, in lexicographic order.
template <typename Fn>
bool for_each_bijection(const std::vector<int>& pins, std::vector<int>& out, std::size_t at,
                        std::vector<bool>& used, const Fn& fn) {
    if (at == pins.size()) return fn();
    if (pins[at] >= 0) {
        out[at] = pins[at];
        return for_each_bijection(pins, out, at + 1, used, fn);
    }
    for (int v = 0; v < static_cast<int>(pins.size()); ++v) {
        if (used[v]) continue;
        bool pinned_elsewhere = false;
        for (std::size_t j = 0; j < pins.size(); ++j)
            if (pins[j] == v) pinned_elsewhere = true;
        if (pinned_elsewhere) continue;
        used[v] = true;
        out[at] = v;
        if (!for_each_bijection(pins, out, at + 1, used, fn)) return false;
        used[v] = false;
    }
    return true;
}

} // namespace

mpz_class representable_intended_count(const TaskSpec& task, const MitigationSet* ms,
                                       std::uint64_t cap) {
    const ConceptSpace& space      = *task.space;
    const bool          factorized = task.family.kind == AlphaFamily::Kind::factorized;
    const bool need_distillation_filter =
        ms && ms->distillation_worlds && !ms->distillation_worlds->empty();

    std::vector<std::vector<int>> perms;
    if (factorized) {
        perms.push_back(std::vector<int>(space.k()));
        std::iota(perms[0].begin(), perms[0].end(), 0);
    } else {
        perms = card_preserving_perms(space, true);
    }

    MitigationSet empty;
    const MitigationSet& m = ms ? *ms : empty;

    mpz_class total = 0;
    for (const auto& pi : perms) {
        std::vector<std::vector<int>> pins;
        if (!supervision_pins(task, m, pi, factorized, pins)) continue;
        if (!need_distillation_filter) {
            mpz_class ways = 1;
            for (const auto& p : pins) ways *= count_bijections_with_pins(p);
            total += ways;
            continue;
        }
        // Distillation couples the value maps; enumerate them under the cap.
        mpz_class ways = 1;
        for (const auto& p : pins) ways *= count_bijections_with_pins(p);
        if (ways > cap) throw budget_error("intended-pair enumeration cap exceeded");

        const int slots = static_cast<int>(pins.size());
        std::vector<std::vector<int>> maps(slots);
        std::uint64_t                 hits = 0;
        std::vector<std::vector<bool>> used(slots);
        for (int s = 0; s < slots; ++s) {
            maps[s].assign(pins[s].size(), -1);
            used[s].assign(pins[s].size(), false);
        }
        // Nested enumeration over slots.
        std::vector<int> slot_order(slots);
        std::iota(slot_order.begin(), slot_order.end(), 0);
        std::function<void(int)> rec = [&](int s) {
            if (s == slots) {
                // Build the witness and test the distillation condition.
                IntendedWitness w;
                w.pi = pi;
                w.psi.resize(space.k());
                for (int i = 0; i < space.k(); ++i)
                    w.psi[i] = maps[factorized ? task.family.group_of(i) : i];
                const auto psi_inv = invert_psi(w);
                for (std::uint64_t ci : *m.distillation_worlds) {
                    const World g = witness_preimage(space, w, psi_inv, space.world_at(ci));
                    if (task.knowledge.label_of(g) != task.knowledge.label_of(ci)) return;
                }
                ++hits;
                return;
            }
            for_each_bijection(pins[s], maps[s], 0, used[s], [&] {
                rec(s + 1);
                return true;
            });
        };
        rec(0);
        total += static_cast<unsigned long>(hits);
    }
    return total;
}

IntendedWitness compose_witness(const ConceptSpace& space, const IntendedWitness& w1,
                                const IntendedWitness& w2) {
    validate_witness(space, w1);
    validate_witness(space, w2);
    IntendedWitness out;
    const int k = space.k();
    out.pi.resize(k);
    out.psi.resize(k);
    for (int i = 0; i < k; ++i) {
        out.pi[i] = w2.pi[w1.pi[i]];
        const auto& inner = w2.psi[w1.pi[i]];
        out.psi[i].resize(inner.size());
        for (std::size_t v = 0; v < inner.size(); ++v) out.psi[i][v] = w1.psi[i][inner[v]];
    }
    validate_witness(space, out);
    return out;
}

IntendedWitness invert_witness(const ConceptSpace& space, const IntendedWitness& w) {
    validate_witness(space, w);
    const int k = space.k();
    IntendedWitness out;
    out.pi.assign(k, 0);
    out.psi.assign(k, {});
    std::vector<int> pi_inv(k);
    for (int i = 0; i < k; ++i) pi_inv[w.pi[i]] = i;
    const auto psi_inv = invert_psi(w);
    for (int j = 0; j < k; ++j) {
        out.pi[j]  = pi_inv[j];
        out.psi[j] = psi_inv[pi_inv[j]];
    }
    validate_witness(space, out);
    return out;
}

AlphaMap alpha_from_witness(const SpacePtr& space, const IntendedWitness& w) {
    validate_witness(*space, w);
    const std::uint64_t n = space->world_count_u64();
    std::vector<std::uint64_t> table(n);
    for (std::uint64_t gi = 0; gi < n; ++gi) {
        const World g = space->world_at(gi);
        World       c(space->k());
        for (int i = 0; i < space->k(); ++i) c[i] = w.psi[i][g[w.pi[i]]];
        table[gi] = space->index_of(c);
    }
    return AlphaMap::joint_table(space, std::move(table));
}

BetaMap beta_from_witness(const TaskSpec& task, const IntendedWitness& w) {
    validate_witness(*task.space, w);
    const auto psi_inv = invert_psi(w);
    const std::uint64_t n = task.space->world_count_u64();
    std::vector<int> cells(n);
    for (std::uint64_t ci = 0; ci < n; ++ci) {
        const World g = witness_preimage(*task.space, w, psi_inv, task.space->world_at(ci));
        cells[ci] = task.knowledge.label_of(g);
    }
    return {task.space, task.label_count, std::move(cells)};
}

} // namespace rsc
