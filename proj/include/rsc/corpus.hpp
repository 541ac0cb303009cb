#ifndef RSC_CORPUS_HPP
#define RSC_CORPUS_HPP

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "rsc/task.hpp"

namespace rsc {

// Benchmark builders: two digit factors 0..N with the given knowledge.
// family: "joint" | "untied" | "tied".
TaskSpec make_sumparity_task(int max_digit, const std::string& family,
                             bool biased_support = false);
TaskSpec make_addition_task(int max_digit, const std::string& family);

struct CorpusConfig {
    int           max_k            = 2;
    int           max_card         = 3;
    int           max_labels       = 3;
    int           tables_per_space = 50;
    std::uint64_t seed             = 20240917;
    bool          half_supports    = true;
};

// Every concept space with k <= max_k and cardinalities <= max_card, crossed
// with seeded random knowledge tables, the three alpha-family kinds and
// (optionally) a random half support. The exhaustive small-task corpus
// behind the oracle-equivalence properties.
std::vector<TaskSpec> small_task_corpus(const CorpusConfig& cfg = {});

// The embedded oracle run behind the `selftest` CLI verb: engine counts vs
// the naive pair loop vs the CNF model count on a reduced corpus. Prints one
// line per property; returns false on any mismatch.
bool run_selftest(std::ostream& out);

} // namespace rsc

#endif
