#ifndef RSC_MITIGATION_HPP
#define RSC_MITIGATION_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "rsc/maps.hpp"
#include "rsc/task.hpp"

namespace rsc {

// Constraint bundle applied on top of a task: concept supervision,
// knowledge distillation, reconstruction and multi-task conjunction.
struct MitigationSet {
    struct ConceptSupervision {
        std::vector<int>           factors; // supervised factor indices
        std::vector<std::uint64_t> worlds;  // supervised world indices, sorted
    };
    struct ExtraTask {
        KnowledgeTable             knowledge;
        std::vector<std::uint64_t> worlds; // worlds carrying the extra label, sorted
    };

    std::optional<ConceptSupervision>         concept_supervision;
    std::optional<std::vector<std::uint64_t>> distillation_worlds;
    bool                                      reconstruction = false;
    std::vector<ExtraTask>                    multitask;

    bool any() const {
        return concept_supervision || distillation_worlds || reconstruction || !multitask.empty();
    }
    std::string summary() const;
};

// Parses the task document's "mitigations" block. Absent block -> empty set.
MitigationSet parse_mitigations(const nlohmann::json& document, const TaskSpec& task);
MitigationSet load_mitigations_file(const std::string& path, const TaskSpec& task);

// Supervised components reproduced on every supervised world.
bool admits_concept_supervision(const AlphaMap& alpha, const MitigationSet& ms);

// Beta's cell at each distillation world can equal the knowledge there; free
// cells become forced in place.
bool admits_distillation(BetaMap& beta, const TaskSpec& task, const MitigationSet& ms);

// Alpha injective on the support.
bool admits_reconstruction(const AlphaMap& alpha, const TaskSpec& task);

// Some extra-task inference table exists for alpha, i.e. alpha never merges
// two covered worlds that carry different extra labels.
bool admits_multitask(const AlphaMap& alpha, const TaskSpec& task, const MitigationSet& ms);

bool admits_all(const AlphaMap& alpha, BetaMap& beta, const TaskSpec& task,
                const MitigationSet& ms);

// Derived task whose label space is the product of the original labels and
// the extra-task labels. Defined when every extra task covers the support
// (partial coverage is handled inside the counting engine via per-world
// constraint masks, not as a TaskSpec).
TaskSpec conjoin_multitask(const TaskSpec& task, const MitigationSet& ms);

} // namespace rsc

#endif
