#ifndef RSC_COUNT_HPP
#define RSC_COUNT_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <gmpxx.h>

#include "rsc/maps.hpp"
#include "rsc/mitigation.hpp"
#include "rsc/task.hpp"

namespace rsc {

struct CountOptions {
    int           workers      = 0; // 0 -> RSC_WORKERS env var, else 1
    std::uint64_t node_budget  = 2'000'000'000ull;
    std::uint64_t naive_budget = 10'000'000ull;
    std::uint64_t intended_cap = 10'000'000ull;
    bool          check_int128 = false;
    bool          timing       = true;
};

enum class JrsMode { redundant, nonredundant };

struct CountReport {
    std::string task_digest;
    std::string task_name;
    std::string mode;   // "rs" | "jrs"
    std::string method; // "naive" | "pruned" | "factored"
    std::string family; // "joint" | "untied" | "tied"
    std::string mitigations = "none";

    int    workers    = 1;
    double elapsed_ms = 0.0;
    bool   exact      = true;
    bool   int128_checked = false;

    // jrs runs
    std::optional<mpz_class> admissible_alpha_count;  // merge-admissible alphas
    std::optional<mpz_class> optimal_pair_count;      // pre-subtraction, redundant
    std::optional<mpz_class> jrs_count_redundant;
    std::optional<mpz_class> jrs_count_nonredundant;
    std::optional<mpz_class> intended_subtrahend;
    std::string              subtrahend_rule; // "theorem-closed-form" | "family-closed-form"
                                              // | "mitigation-filtered"

    // rs runs
    std::optional<mpz_class> rs_admissible_count; // alphas optimal with beta fixed
    std::optional<mpz_class> rs_count;
    std::optional<mpz_class> rs_witness_admitting; // counted RSs that admit a witness

    std::vector<std::string> warnings;
};

CountReport count_rs(const TaskSpec& task, const CountOptions& opts = {});
CountReport count_jrs(const TaskSpec& task, JrsMode mode, const CountOptions& opts = {});
CountReport count_with_mitigations(const TaskSpec& task, const MitigationSet& ms,
                                   const std::string& mode, const CountOptions& opts = {});

// Literal oracle: loops over every deterministic pair in the declared family
// and applies is_optimal_pair (plus the mitigation predicates). Kept free of
// any engine machinery.
mpz_class naive_count_pairs(const TaskSpec& task, const CountOptions& opts = {});
mpz_class naive_count_pairs(const TaskSpec& task, const MitigationSet& ms,
                            const CountOptions& opts = {});

struct EnumeratedPair {
    AlphaMap alpha;
    BetaMap  beta;
};
struct EnumerationResult {
    std::vector<EnumeratedPair> pairs;
    bool                        truncated = false;
};

// Admissible alphas with their forced betas, identity first, in the fixed
// candidate order of the search. With partial support, off-support behavior
// is canonicalized to the identity.
EnumerationResult enumerate_optimal_alphas(const TaskSpec& task, std::uint64_t limit,
                                           const MitigationSet* ms   = nullptr,
                                           const CountOptions&  opts = {});

int resolve_workers(int requested);

} // namespace rsc

#endif
