#ifndef RSC_METRICS_HPP
#define RSC_METRICS_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "rsc/maps.hpp"
#include "rsc/task.hpp"

namespace rsc {

// Rows of (ground-truth world, predicted world, label, predicted label),
// with concept values stored column-wise for the correlation pass.
struct PredictionDump {
    SpacePtr         space;
    std::size_t      rows = 0;
    std::vector<int> g_vals; // rows * k
    std::vector<int> c_vals; // rows * k
    std::vector<int> y;
    std::vector<int> yhat;

    int g_at(std::size_t row, int factor) const { return g_vals[row * space->k() + factor]; }
    int c_at(std::size_t row, int factor) const { return c_vals[row * space->k() + factor]; }
};

// CSV with header g_1..g_k,c_1..c_k,y,yhat.
PredictionDump load_dump_csv(const std::string& path, const SpacePtr& space);
PredictionDump make_dump(const SpacePtr& space, const std::vector<World>& g,
                         const std::vector<World>& c, const std::vector<int>& y,
                         const std::vector<int>& yhat);

struct CorrMatrix {
    std::vector<std::vector<double>> r; // r[i][j] = corr(G_i, C_j)
    std::vector<std::string>         warnings;
};

CorrMatrix pearson_corr_matrix(const PredictionDump& dump);

struct AlignmentResult {
    std::vector<int>              pi;  // predicted concept i explains G_{pi[i]}
    std::vector<std::vector<int>> psi; // value maps, one per predicted concept
    double                        objective = 0.0;
    std::vector<std::string>      warnings;

    World transform(const World& g) const;
};

// Concept-level Hungarian matching on |Pearson| followed by a value-level
// matching on co-occurrence counts.
AlignmentResult hungarian_align(const PredictionDump& dump);

// 1 - (distinct predicted worlds) / (total worlds).
double concept_collapse(const PredictionDump& dump);

// Macro-F1 per concept of the transformed ground truth against the
// predictions, averaged over concepts.
double aligned_concept_f1(const PredictionDump& dump, const AlignmentResult& alignment);

// Macro-F1 of beta applied to transformed ground-truth concepts against the
// ground-truth labels. Throws when beta is free on a required world.
double eval_beta_f1(const PredictionDump& dump, const BetaMap& beta,
                    const AlignmentResult& alignment);

// Macro-F1 of the dumped label predictions.
double label_f1(const PredictionDump& dump);

namespace detail {
// Minimum-cost perfect assignment (Jonker-Volgenant style augmenting paths);
// returns for each column its assigned row. Ties resolve to the lowest index.
std::vector<int> min_cost_assignment(const std::vector<std::vector<double>>& cost);
double macro_f1(const std::vector<int>& truth, const std::vector<int>& pred);
} // namespace detail

} // namespace rsc

#endif
