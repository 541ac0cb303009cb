#ifndef RSC_MAPS_HPP
#define RSC_MAPS_HPP

#include <cstdint>
#include <optional>
#include <vector>

#include <gmpxx.h>

#include "rsc/task.hpp"

namespace rsc {

struct MitigationSet;

// A deterministic concept map, either a joint table over worlds or per
// tie-group value tables. Factor maps expand to a unique joint table.
class AlphaMap {
  public:
    static AlphaMap identity(SpacePtr space, AlphaFamily family);
    static AlphaMap joint_table(SpacePtr space, std::vector<std::uint64_t> table);
    static AlphaMap factor_tables(SpacePtr space, AlphaFamily family,
                                  std::vector<std::vector<int>> tables);

    bool is_joint() const { return family_.kind == AlphaFamily::Kind::joint; }
    const SpacePtr&    space() const { return space_; }
    const AlphaFamily& family() const { return family_; }
    const std::vector<std::uint64_t>& joint() const;
    const std::vector<std::vector<int>>& tables() const { return tables_; }

    std::uint64_t apply(std::uint64_t world_index) const;
    World         apply(const World& g) const;

    // The equivalent joint-table map (identity for joint maps).
    AlphaMap expand() const;

    bool operator==(const AlphaMap& o) const;

  private:
    AlphaMap() = default;
    SpacePtr                      space_;
    AlphaFamily                   family_;
    std::vector<std::uint64_t>    joint_;  // world index -> world index
    std::vector<std::vector<int>> tables_; // per group, value -> value
};

// A (possibly partial) inference table; -1 marks a free cell that no support
// world forces. label_count bounds the forced entries.
class BetaMap {
  public:
    BetaMap(SpacePtr space, int label_count, std::vector<int> cells);
    static BetaMap all_free(SpacePtr space, int label_count);
    static BetaMap from_knowledge(const KnowledgeTable& k);

    int  label_count() const { return label_count_; }
    int  at(std::uint64_t cell) const { return cells_[cell]; }
    bool forced(std::uint64_t cell) const { return cells_[cell] >= 0; }
    void force(std::uint64_t cell, int label);
    std::uint64_t forced_count() const;
    const std::vector<int>& cells() const { return cells_; }
    const SpacePtr& space() const { return space_; }

  private:
    SpacePtr         space_;
    int              label_count_;
    std::vector<int> cells_;
};

// Witness of intended semantics: a cardinality-preserving factor permutation
// pi and per-factor value bijections psi, with alpha(g)_i = psi_i(g_{pi(i)}).
struct IntendedWitness {
    std::vector<int>              pi;
    std::vector<std::vector<int>> psi;

    static IntendedWitness identity(const ConceptSpace& space);
    bool is_identity() const;
};

std::uint64_t apply_alpha(const AlphaMap& alpha, std::uint64_t world_index);
World         apply_alpha(const AlphaMap& alpha, const World& g);

// True iff beta(alpha(g)) equals the task knowledge on every support world.
// Throws if beta is free on a reached cell.
bool is_optimal_pair(const AlphaMap& alpha, const BetaMap& beta, const TaskSpec& task);

// Searches for a witness making (alpha, beta) equivalent to (id, beta*).
// beta is compared on its forced cells only. Exhaustive over permutations;
// rejects k > 8.
std::optional<IntendedWitness> check_intended(const AlphaMap& alpha, const BetaMap& beta,
                                              const TaskSpec& task);

// Closed-form count of intended-semantics pairs over the unconstrained joint
// vertex family: prod over distinct cardinalities of multiplicity! times
// prod of cardinality!.
mpz_class intended_pair_count(const ConceptSpace& space);
mpz_class intended_pair_count(const TaskSpec& task);

// Number of distinct intended pairs expressible inside the task's alpha
// family (optionally filtered by mitigation constraints). Enumerates value
// bijections when a closed form is unavailable; throws budget_error past cap.
mpz_class representable_intended_count(const TaskSpec& task,
                                       const MitigationSet* mitigations = nullptr,
                                       std::uint64_t cap = 10'000'000);

IntendedWitness compose_witness(const ConceptSpace& space, const IntendedWitness& w1,
                                const IntendedWitness& w2);
IntendedWitness invert_witness(const ConceptSpace& space, const IntendedWitness& w);

// The pair generated by a witness: alpha = psi o P_pi, beta = beta* o alpha^-1.
AlphaMap alpha_from_witness(const SpacePtr& space, const IntendedWitness& w);
BetaMap  beta_from_witness(const TaskSpec& task, const IntendedWitness& w);

void validate_witness(const ConceptSpace& space, const IntendedWitness& w);

} // namespace rsc

#endif
