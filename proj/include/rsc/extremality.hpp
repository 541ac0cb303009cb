#ifndef RSC_EXTREMALITY_HPP
#define RSC_EXTREMALITY_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "rsc/task.hpp"

namespace rsc {

// A concrete inference layer under audit: either a per-world table of label
// distributions (probabilistic-logic style) or a softmax-linear weight
// matrix with one row per world.
struct InferenceLayerSpec {
    enum class Kind { linear_prob, softmax_linear };

    Kind                             kind = Kind::linear_prob;
    SpacePtr                         space;
    int                              label_count = 0;
    std::vector<std::vector<double>> rows; // lexicographic world order

    static InferenceLayerSpec linear_prob(SpacePtr space, int label_count,
                                          std::vector<std::vector<double>> rows);
    static InferenceLayerSpec softmax_linear(SpacePtr space, int label_count,
                                             std::vector<std::vector<double>> rows);

    // Label distribution on a point mass.
    std::vector<double> vertex_dist(std::uint64_t world) const;
};

InferenceLayerSpec load_layer_file(const std::string& path);

struct ExtremalityReport {
    bool          satisfied       = true;
    bool          vacuous         = false;
    double        worst_violation = 0.0; // max of mixture peak minus endpoint peak
    std::uint64_t worst_c = 0, worst_c2 = 0;
    double        worst_lambda   = 0.0;
    std::uint64_t pairs_eligible = 0;
    std::uint64_t pairs_scanned  = 0;
    std::uint64_t pairs_satisfied = 0; // violation <= tolerance
    std::uint64_t boundary_pairs  = 0; // |violation| <= tolerance
    std::uint64_t ineligible_ties = 0;
    int           grid_points     = 0;
    double        fraction_satisfied = 1.0;
    std::vector<std::string> warnings;
};

std::vector<double> mixture_label_dist(const InferenceLayerSpec& layer, std::uint64_t c,
                                       std::uint64_t c2, double lambda);

// Scans all (or pair_budget sampled) pairs with distinct argmax labels over an
// interior lambda grid, with golden-section refinement around each grid peak.
// pair_budget == 0 means every eligible pair.
ExtremalityReport check_extremality(const InferenceLayerSpec& layer, int grid_points = 99,
                                    std::uint64_t pair_budget = 0, std::uint64_t seed = 0,
                                    int workers = 1);

bool is_logM_deterministic(const std::vector<std::vector<double>>& weights, double M,
                           int label_count);

double min_max_prob_bound(double M, int label_count);

constexpr double kViolationTolerance     = 1e-9;
constexpr double kNormalizationTolerance = 1e-12;

} // namespace rsc

#endif
