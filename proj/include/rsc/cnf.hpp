#ifndef RSC_CNF_HPP
#define RSC_CNF_HPP

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include <gmpxx.h>

#include "rsc/count.hpp"
#include "rsc/maps.hpp"
#include "rsc/mitigation.hpp"
#include "rsc/task.hpp"

namespace rsc {

struct CnfFormula {
    int                           var_count = 0;
    std::vector<std::vector<int>> clauses;
    std::vector<int>              projection; // sorted, ascending
    std::map<int, std::string>    legend;     // variable -> semantic role
    std::vector<std::string>      comments;   // free-form header comment payloads

    void validate() const;
};

enum class CnfTarget { optimal_pairs, optimal_alphas };

// Formula plus the variable layout needed to decode satisfying assignments.
struct CnfEncoding {
    CnfFormula formula;
    CnfTarget  target = CnfTarget::optimal_pairs;
    bool       trimmed = false;
    // Exponent of the |Y|^... multiplier dropped by --trim-beta.
    std::uint64_t trimmed_free_cells = 0;

    // joint: alpha_var[g * cells + c]; factorized: entry_var[group][in * card + out]
    std::vector<int>              alpha_var;
    std::vector<std::vector<int>> entry_var;
    std::vector<int>              beta_var; // cell * label_count + y, 0 = absent

    std::pair<AlphaMap, BetaMap> decode(const TaskSpec& task,
                                        const std::vector<bool>& assignment) const;
};

// Compiles the optimal-pair (or optimal-alpha) constraint system to CNF with
// one-hot selector blocks and a declared projection set. The intended-pair
// subtrahend is deliberately not encoded; it is documented in the comments
// for post-processing.
CnfEncoding encode_task(const TaskSpec& task, const MitigationSet& ms, CnfTarget target,
                        bool trim_beta = false);

// Standard DIMACS with "c ind ... 0" projection lines; byte-stable.
void write_dimacs(const CnfFormula& formula, std::ostream& sink);
std::string to_dimacs(const CnfFormula& formula);

// Projected model count by literal enumeration; the verification oracle for
// small formulas. var_cap bounds the total variable count.
mpz_class exhaustive_model_count(const CnfFormula& formula, int var_cap = 24);

} // namespace rsc

#endif
