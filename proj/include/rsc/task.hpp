#ifndef RSC_TASK_HPP
#define RSC_TASK_HPP

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <gmpxx.h>
#include <nlohmann/json_fwd.hpp>

#include "rsc/errors.hpp"

namespace rsc {

// A concept vector; values[i] < cardinality of factor i.
using World = std::vector<int>;

struct Factor {
    std::string name;
    int         cardinality = 0;
};

// Ordered list of categorical factors. Worlds are addressed either as value
// tuples or by lexicographic index (last factor varies fastest).
class ConceptSpace {
  public:
    explicit ConceptSpace(std::vector<Factor> factors);

    int k() const { return static_cast<int>(factors_.size()); }
    int cardinality(int factor) const { return factors_[factor].cardinality; }
    const std::vector<Factor>& factors() const { return factors_; }

    const mpz_class& world_count() const { return total_; }
    // Throws budget_error when the space does not fit in 64 bits.
    std::uint64_t world_count_u64() const;

    std::uint64_t index_of(const World& w) const;
    World         world_at(std::uint64_t index) const;
    bool          valid_world(const World& w) const;

    bool operator==(const ConceptSpace& o) const;

  private:
    std::vector<Factor>        factors_;
    std::vector<std::uint64_t> strides_; // valid only when total fits u64
    mpz_class                  total_;
    bool                       fits_u64_ = false;
};

using SpacePtr = std::shared_ptr<const ConceptSpace>;

// Deterministic knowledge: a total map from worlds to label indices.
class KnowledgeTable {
  public:
    KnowledgeTable(SpacePtr space, int label_count, std::vector<int> labels);

    int label_count() const { return label_count_; }
    int label_of(std::uint64_t world_index) const { return labels_[world_index]; }
    int label_of(const World& w) const { return labels_[space_->index_of(w)]; }
    const SpacePtr& space() const { return space_; }
    const std::vector<int>& table() const { return labels_; }

  private:
    SpacePtr         space_;
    int              label_count_;
    std::vector<int> labels_;
};

enum class BuiltinKnowledge { sum, sum_parity, xor_parity, modular_sum };

KnowledgeTable builtin_knowledge(BuiltinKnowledge name, const SpacePtr& space, int modulus = 0);

// Set of ground-truth worlds appearing in training data. Stored as a bitset
// over lexicographic indices for small spaces, a sorted index list otherwise.
class SupportSet {
  public:
    static SupportSet full(const SpacePtr& space);
    static SupportSet include_list(const SpacePtr& space, const std::vector<World>& worlds);
    static SupportSet exclude_list(const SpacePtr& space, const std::vector<World>& worlds);
    static SupportSet per_factor_product(const SpacePtr& space,
                                         const std::vector<std::vector<int>>& values);

    bool          contains(std::uint64_t world_index) const;
    std::uint64_t size() const { return size_; }
    bool          is_full() const { return size_ == space_size_; }
    // Support world indices in increasing (lexicographic) order.
    const std::vector<std::uint64_t>& indices() const { return indices_; }

  private:
    SupportSet() = default;
    static SupportSet from_indices(const SpacePtr& space, std::vector<std::uint64_t> sorted);

    std::uint64_t              space_size_ = 0;
    std::uint64_t              size_       = 0;
    std::vector<std::uint64_t> indices_;
    std::vector<std::uint64_t> bits_; // empty when space exceeds the bitset cutoff
};

struct AlphaFamily {
    enum class Kind { joint, factorized };
    Kind kind = Kind::joint;
    // Partition of factor indices; factors in one group share a value map.
    // Meaningful only for factorized families. Singleton groups = untied.
    std::vector<std::vector<int>> tie_groups;

    static AlphaFamily joint() { return {Kind::joint, {}}; }
    static AlphaFamily untied(int k);
    static AlphaFamily tied(const std::vector<std::vector<int>>& groups);

    int group_count() const { return static_cast<int>(tie_groups.size()); }
    int group_of(int factor) const;
};

struct TaskSpec {
    std::string    name;
    SpacePtr       space;
    int            label_count = 0;
    KnowledgeTable knowledge;
    SupportSet     support;
    AlphaFamily    family;

    // Content hash of the canonicalized task document, "xxxxxxxxxxxxxxxx" hex.
    std::string digest() const;
};

TaskSpec make_task(std::string name, SpacePtr space, KnowledgeTable knowledge,
                   SupportSet support, AlphaFamily family);

// Parses and validates the JSON task document (see README for the schema).
// Unknown top-level keys are rejected.
TaskSpec build_task(const nlohmann::json& document);
TaskSpec load_task_file(const std::string& path);

// Lexicographically ordered support worlds.
std::vector<World> enumerate_support(const TaskSpec& task);

// Support excluding all (even, odd) digit pairs; the training bias of the
// biased sum-parity benchmark. Requires k = 2.
SupportSet biased_parity_support(const SpacePtr& space);

} // namespace rsc

#endif
