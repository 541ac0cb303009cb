#include "rsc/extremality.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <thread>

#include <nlohmann/json.hpp>

namespace rsc {

namespace {

std::vector<double> softmax(const std::vector<double>& logits) {
    const double        mx = *std::max_element(logits.begin(), logits.end());
    std::vector<double> out(logits.size());
    double              z = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - mx);
        z += out[i];
    }
    for (double& v : out) v /= z;
    return out;
}

void check_rows(const InferenceLayerSpec& layer) {
    const std::uint64_t n = layer.space->world_count_u64();
    if (layer.rows.size() != n)
        throw validation_error("layer needs one row per world (" + std::to_string(n) + ")");
    for (const auto& row : layer.rows) {
        if (static_cast<int>(row.size()) != layer.label_count)
            throw validation_error("layer row length must equal the label count");
        for (double v : row)
            if (!std::isfinite(v)) throw validation_error("layer entries must be finite");
    }
    if (layer.kind == InferenceLayerSpec::Kind::linear_prob) {
        for (const auto& row : layer.rows) {
            double sum = 0.0;
            for (double v : row) {
                if (v < -1e-12) throw validation_error("probability rows must be non-negative");
                sum += v;
            }
            if (std::abs(sum - 1.0) > 1e-9)
                throw validation_error("probability rows must sum to 1 within 1e-9");
        }
    }
}

} // namespace

InferenceLayerSpec InferenceLayerSpec::linear_prob(SpacePtr space, int label_count,
                                                   std::vector<std::vector<double>> rows) {
    InferenceLayerSpec l{Kind::linear_prob, std::move(space), label_count, std::move(rows)};
    check_rows(l);
    return l;
}

InferenceLayerSpec InferenceLayerSpec::softmax_linear(SpacePtr space, int label_count,
                                                      std::vector<std::vector<double>> rows) {
    InferenceLayerSpec l{Kind::softmax_linear, std::move(space), label_count, std::move(rows)};
    check_rows(l);
    return l;
}

std::vector<double> InferenceLayerSpec::vertex_dist(std::uint64_t world) const {
    if (kind == Kind::linear_prob) return rows[world];
    return softmax(rows[world]);
}

InferenceLayerSpec load_layer_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw validation_error("layer file not found: " + path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw validation_error("malformed layer file " + path + ": " + e.what());
    }
    for (auto it = doc.begin(); it != doc.end(); ++it)
        if (it.key() != "kind" && it.key() != "concepts" && it.key() != "labels" &&
            it.key() != "rows")
            throw validation_error("unknown key '" + it.key() + "' in layer file");
    std::vector<Factor> factors;
    for (const auto& c : doc.at("concepts"))
        factors.push_back({c.at("name").get<std::string>(), c.at("cardinality").get<int>()});
    auto space = std::make_shared<const ConceptSpace>(std::move(factors));
    const int labels = doc.at("labels").get<int>();
    std::vector<std::vector<double>> rows;
    for (const auto& r : doc.at("rows")) rows.push_back(r.get<std::vector<double>>());
    const std::string kind = doc.at("kind").get<std::string>();
    if (kind == "linear_prob") return InferenceLayerSpec::linear_prob(space, labels, rows);
    if (kind == "softmax_linear") return InferenceLayerSpec::softmax_linear(space, labels, rows);
    throw validation_error("layer kind must be 'linear_prob' or 'softmax_linear'");
}

std::vector<double> mixture_label_dist(const InferenceLayerSpec& layer, std::uint64_t c,
                                       std::uint64_t c2, double lambda) {
    if (c == c2) throw validation_error("mixture endpoints must differ");
    if (!(lambda > 0.0 && lambda < 1.0))
        throw validation_error("lambda must lie strictly inside (0,1)");
    std::vector<double> out(layer.label_count);
    if (layer.kind == InferenceLayerSpec::Kind::linear_prob) {
        for (int y = 0; y < layer.label_count; ++y)
            out[y] = lambda * layer.rows[c][y] + (1.0 - lambda) * layer.rows[c2][y];
        return out;
    }
    std::vector<double> logits(layer.label_count);
    for (int y = 0; y < layer.label_count; ++y)
        logits[y] = lambda * layer.rows[c][y] + (1.0 - lambda) * layer.rows[c2][y];
    return softmax(logits);
}

namespace {

double mixture_peak(const InferenceLayerSpec& layer, std::uint64_t c, std::uint64_t c2,
                    double lambda) {
    const auto dist = mixture_label_dist(layer, c, c2, lambda);
    return *std::max_element(dist.begin(), dist.end());
}

// Signed violation for one eligible pair: sup over lambda of the mixture's
// peak probability minus the better endpoint peak. Grid scan plus
// golden-section refinement around the best grid point.
double pair_violation(const InferenceLayerSpec& layer, std::uint64_t c, std::uint64_t c2,
                      int grid, double endpoint_peak, double& best_lambda) {
    const double step = 1.0 / (grid + 1);
    double       best = -1.0;
    best_lambda       = step;
    for (int i = 1; i <= grid; ++i) {
        const double lam = i * step;
        const double v   = mixture_peak(layer, c, c2, lam);
        if (v > best) {
            best        = v;
            best_lambda = lam;
        }
    }
    constexpr double kEdge = 1e-9;
    double lo = std::max(best_lambda - step, kEdge);
    double hi = std::min(best_lambda + step, 1.0 - kEdge);
    const double invphi  = (std::sqrt(5.0) - 1.0) / 2.0;
    double       a = lo, bnd = hi;
    double       x1 = bnd - invphi * (bnd - a), x2 = a + invphi * (bnd - a);
    double       f1 = mixture_peak(layer, c, c2, x1), f2 = mixture_peak(layer, c, c2, x2);
    for (int it = 0; it < 20; ++it) {
        if (f1 < f2) {
            a  = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + invphi * (bnd - a);
            f2 = mixture_peak(layer, c, c2, x2);
        } else {
            bnd = x2;
            x2  = x1;
            f2  = f1;
            x1  = bnd - invphi * (bnd - a);
            f1  = mixture_peak(layer, c, c2, x1);
        }
    }
    const double refined = std::max(f1, f2);
    if (refined > best) {
        best        = refined;
        best_lambda = f1 > f2 ? x1 : x2;
    }
    return best - endpoint_peak;
}

} // namespace

ExtremalityReport check_extremality(const InferenceLayerSpec& layer, int grid_points,
                                    std::uint64_t pair_budget, std::uint64_t seed, int workers) {
    if (grid_points < 3) throw validation_error("grid must have at least 3 interior points");
    ExtremalityReport rep;
    rep.grid_points = grid_points;

    const std::uint64_t n = layer.space->world_count_u64();
    if (n < 2) {
        rep.vacuous = true;
        rep.warnings.push_back("fewer than two concept vectors; vacuously satisfied");
        return rep;
    }

    // Endpoint peaks and strict argmax labels.
    std::vector<double> peak(n);
    std::vector<int>    top(n);
    for (std::uint64_t c = 0; c < n; ++c) {
        const auto dist = layer.vertex_dist(c);
        int        arg  = 0;
        bool       tie  = false;
        for (int y = 1; y < layer.label_count; ++y) {
            if (dist[y] > dist[arg]) {
                arg = y;
                tie = false;
            } else if (dist[y] == dist[arg]) {
                tie = true;
            }
        }
        peak[c] = dist[arg];
        top[c]  = tie ? -1 : arg;
    }

    std::vector<std::pair<std::uint64_t, std::uint64_t>> eligible;
    for (std::uint64_t c = 0; c < n; ++c)
        for (std::uint64_t c2 = c + 1; c2 < n; ++c2) {
            if (top[c] < 0 || top[c2] < 0) {
                ++rep.ineligible_ties;
                continue;
            }
            if (top[c] != top[c2]) eligible.push_back({c, c2});
        }
    rep.pairs_eligible = eligible.size();
    if (rep.ineligible_ties > 0)
        rep.warnings.push_back(std::to_string(rep.ineligible_ties) +
                               " pairs skipped: tied argmax makes them ineligible");
    if (eligible.empty()) {
        rep.vacuous = true;
        rep.warnings.push_back("no pair with distinct argmax labels; vacuously satisfied");
        return rep;
    }

    std::vector<std::pair<std::uint64_t, std::uint64_t>> scan = eligible;
    if (pair_budget > 0 && pair_budget < eligible.size()) {
        std::mt19937_64 rng(seed);
        std::vector<std::uint64_t> idx(eligible.size());
        for (std::uint64_t i = 0; i < idx.size(); ++i) idx[i] = i;
        for (std::uint64_t i = 0; i < pair_budget; ++i) {
            const std::uint64_t j = i + rng() % (idx.size() - i);
            std::swap(idx[i], idx[j]);
        }
        idx.resize(pair_budget);
        std::sort(idx.begin(), idx.end());
        scan.clear();
        for (std::uint64_t i : idx) scan.push_back(eligible[i]);
    }
    rep.pairs_scanned = scan.size();

    struct Partial {
        double        worst = -2.0;
        std::uint64_t c = 0, c2 = 0;
        double        lambda    = 0.0;
        std::uint64_t satisfied = 0, boundary = 0;
        std::uint64_t first_index = 0;
    };
    const int              nw = std::max(1, workers);
    std::vector<Partial>   parts(nw);
    auto                   work = [&](int w) {
        Partial local;
        local.worst       = -2.0;
        local.first_index = scan.size();
        for (std::size_t i = w; i < scan.size(); i += nw) {
            const auto [c, c2] = scan[i];
            const double ep    = std::max(peak[c], peak[c2]);
            double       lam   = 0.0;
            const double v     = pair_violation(layer, c, c2, grid_points, ep, lam);
            if (v <= kViolationTolerance) ++local.satisfied;
            if (std::abs(v) <= kViolationTolerance) ++local.boundary;
            if (v > local.worst || (v == local.worst && i < local.first_index)) {
                local.worst       = v;
                local.c           = c;
                local.c2          = c2;
                local.lambda      = lam;
                local.first_index = i;
            }
        }
        parts[w] = local;
    };
    if (nw == 1) {
        work(0);
    } else {
        std::vector<std::thread> threads;
        for (int w = 0; w < nw; ++w) threads.emplace_back(work, w);
        for (auto& t : threads) t.join();
    }
    Partial merged;
    merged.worst       = -2.0;
    merged.first_index = scan.size() + 1;
    for (const auto& p : parts) {
        merged.satisfied += p.satisfied;
        merged.boundary += p.boundary;
        if (p.worst > merged.worst ||
            (p.worst == merged.worst && p.first_index < merged.first_index)) {
            merged.worst       = p.worst;
            merged.c           = p.c;
            merged.c2          = p.c2;
            merged.lambda      = p.lambda;
            merged.first_index = p.first_index;
        }
    }

    rep.worst_violation    = merged.worst;
    rep.worst_c            = merged.c;
    rep.worst_c2           = merged.c2;
    rep.worst_lambda       = merged.lambda;
    rep.pairs_satisfied    = merged.satisfied;
    rep.boundary_pairs     = merged.boundary;
    rep.fraction_satisfied = static_cast<double>(merged.satisfied) / scan.size();
    rep.satisfied          = rep.worst_violation <= 0.0;
    return rep;
}

bool is_logM_deterministic(const std::vector<std::vector<double>>& weights, double M,
                           int label_count) {
    if (!(M > label_count - 1))
        throw validation_error("M must exceed the label count minus one");
    const double logM = std::log(M);
    for (const auto& row : weights) {
        if (static_cast<int>(row.size()) != label_count)
            throw validation_error("weight row length must equal the label count");
        const int y = static_cast<int>(
            std::max_element(row.begin(), row.end()) - row.begin());
        bool ok = true;
        for (int a = 0; a < label_count && ok; ++a) {
            if (a == y) continue;
            if (row[y] - row[a] < logM) ok = false;
            for (int c = a + 1; c < label_count && ok; ++c) {
                if (c == y) continue;
                if (std::abs(row[a] - row[c]) > logM) ok = false;
            }
        }
        if (!ok) return false;
    }
    return true;
}

double min_max_prob_bound(double M, int label_count) {
    if (label_count < 1) throw validation_error("label count must be >= 1");
    if (!(M > label_count - 1))
        throw validation_error("M must exceed the label count minus one");
    return 1.0 / (1.0 + static_cast<double>(label_count - 1) / M);
}

} // namespace rsc
