#include "rsc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <unordered_set>

namespace rsc {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string              cell;
    std::stringstream        ss(line);
    while (std::getline(ss, cell, ',')) {
        while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
        std::size_t b = 0;
        while (b < cell.size() && cell[b] == ' ') ++b;
        out.push_back(cell.substr(b));
    }
    return out;
}

} // namespace

PredictionDump load_dump_csv(const std::string& path, const SpacePtr& space) {
    std::ifstream in(path);
    if (!in) throw validation_error("prediction dump not found: " + path);
    const int   k = space->k();
    std::string line;
    if (!std::getline(in, line)) throw validation_error("empty prediction dump");
    std::vector<std::string> expected;
    for (int i = 1; i <= k; ++i) expected.push_back("g_" + std::to_string(i));
    for (int i = 1; i <= k; ++i) expected.push_back("c_" + std::to_string(i));
    expected.push_back("y");
    expected.push_back("yhat");
    const auto header = split_csv_line(line);
    if (header != expected)
        throw validation_error("prediction dump header must be g_1..g_k,c_1..c_k,y,yhat");

    PredictionDump dump;
    dump.space = space;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto cells = split_csv_line(line);
        if (static_cast<int>(cells.size()) != 2 * k + 2)
            throw validation_error("dump line " + std::to_string(lineno) + " has " +
                                   std::to_string(cells.size()) + " cells");
        std::vector<int> vals;
        for (const auto& c : cells) {
            try {
                vals.push_back(std::stoi(c));
            } catch (const std::exception&) {
                throw validation_error("dump line " + std::to_string(lineno) +
                                       ": non-integer cell '" + c + "'");
            }
        }
        World g(vals.begin(), vals.begin() + k), c(vals.begin() + k, vals.begin() + 2 * k);
        if (!space->valid_world(g) || !space->valid_world(c))
            throw validation_error("dump line " + std::to_string(lineno) + ": world out of range");
        if (vals[2 * k] < 0 || vals[2 * k + 1] < 0)
            throw validation_error("dump line " + std::to_string(lineno) + ": negative label");
        dump.g_vals.insert(dump.g_vals.end(), g.begin(), g.end());
        dump.c_vals.insert(dump.c_vals.end(), c.begin(), c.end());
        dump.y.push_back(vals[2 * k]);
        dump.yhat.push_back(vals[2 * k + 1]);
        ++dump.rows;
    }
    if (dump.rows == 0) throw validation_error("prediction dump has no rows");
    return dump;
}

PredictionDump make_dump(const SpacePtr& space, const std::vector<World>& g,
                         const std::vector<World>& c, const std::vector<int>& y,
                         const std::vector<int>& yhat) {
    if (g.size() != c.size() || g.size() != y.size() || g.size() != yhat.size() || g.empty())
        throw validation_error("dump columns must be non-empty and equally sized");
    PredictionDump dump;
    dump.space = space;
    dump.rows  = g.size();
    for (std::size_t r = 0; r < g.size(); ++r) {
        if (!space->valid_world(g[r]) || !space->valid_world(c[r]))
            throw validation_error("dump world out of range");
        dump.g_vals.insert(dump.g_vals.end(), g[r].begin(), g[r].end());
        dump.c_vals.insert(dump.c_vals.end(), c[r].begin(), c[r].end());
    }
    dump.y    = y;
    dump.yhat = yhat;
    return dump;
}

CorrMatrix pearson_corr_matrix(const PredictionDump& dump) {
    const int         k = dump.space->k();
    const double      n = static_cast<double>(dump.rows);
    CorrMatrix        out;
    std::vector<double> gm(k, 0), cm(k, 0), gs(k, 0), cs(k, 0);
    for (std::size_t r = 0; r < dump.rows; ++r)
        for (int i = 0; i < k; ++i) {
            gm[i] += dump.g_at(r, i);
            cm[i] += dump.c_at(r, i);
        }
    for (int i = 0; i < k; ++i) {
        gm[i] /= n;
        cm[i] /= n;
    }
    for (std::size_t r = 0; r < dump.rows; ++r)
        for (int i = 0; i < k; ++i) {
            gs[i] += (dump.g_at(r, i) - gm[i]) * (dump.g_at(r, i) - gm[i]);
            cs[i] += (dump.c_at(r, i) - cm[i]) * (dump.c_at(r, i) - cm[i]);
        }
    std::set<int> warned_g, warned_c;
    out.r.assign(k, std::vector<double>(k, 0.0));
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j) {
            if (gs[i] == 0.0 || cs[j] == 0.0) {
                if (gs[i] == 0.0 && warned_g.insert(i).second)
                    out.warnings.push_back("ground-truth concept " + std::to_string(i) +
                                           " has zero variance; correlations set to 0");
                if (cs[j] == 0.0 && warned_c.insert(j).second)
                    out.warnings.push_back("predicted concept " + std::to_string(j) +
                                           " has zero variance; correlations set to 0");
                continue;
            }
            double cov = 0.0;
            for (std::size_t r = 0; r < dump.rows; ++r)
                cov += (dump.g_at(r, i) - gm[i]) * (dump.c_at(r, j) - cm[j]);
            out.r[i][j] = cov / std::sqrt(gs[i] * cs[j]);
        }
    return out;
}

namespace detail {

std::vector<int> min_cost_assignment(const std::vector<std::vector<double>>& cost) {
    const int n = static_cast<int>(cost.size());
    constexpr double INF = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0), v(n + 1, 0);
    std::vector<int>    p(n + 1, 0), way(n + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0]   = i;
        int j0 = 0;
        std::vector<double> minv(n + 1, INF);
        std::vector<char>   used(n + 1, 0);
        do {
            used[j0]     = 1;
            const int i0 = p[j0];
            double    delta = INF;
            int       j1    = -1;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j]  = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1    = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const int j1 = way[j0];
            p[j0]        = p[j1];
            j0           = j1;
        } while (j0);
    }
    std::vector<int> row_of_col(n);
    for (int j = 1; j <= n; ++j) row_of_col[j - 1] = p[j] - 1;
    return row_of_col;
}

double macro_f1(const std::vector<int>& truth, const std::vector<int>& pred) {
    std::set<int> classes(truth.begin(), truth.end());
    classes.insert(pred.begin(), pred.end());
    double sum = 0.0;
    for (int cls : classes) {
        std::size_t tp = 0, fp = 0, fn = 0;
        for (std::size_t r = 0; r < truth.size(); ++r) {
            const bool t = truth[r] == cls, p = pred[r] == cls;
            tp += t && p;
            fp += !t && p;
            fn += t && !p;
        }
        const double denom = 2.0 * tp + fp + fn;
        sum += denom > 0 ? 2.0 * tp / denom : 0.0;
    }
    return classes.empty() ? 0.0 : sum / static_cast<double>(classes.size());
}

} // namespace detail

World AlignmentResult::transform(const World& g) const {
    World t(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) t[i] = psi[i][g[pi[i]]];
    return t;
}

AlignmentResult hungarian_align(const PredictionDump& dump) {
    const int  k    = dump.space->k();
    CorrMatrix corr = pearson_corr_matrix(dump);

    constexpr double kIncompatible = 1e18;
    std::vector<std::vector<double>> cost(k, std::vector<double>(k));
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j)
            cost[i][j] = dump.space->cardinality(i) == dump.space->cardinality(j)
                             ? -std::abs(corr.r[i][j])
                             : kIncompatible;
    AlignmentResult out;
    out.warnings = std::move(corr.warnings);
    out.pi       = detail::min_cost_assignment(cost); // column j -> ground-truth row
    for (int j = 0; j < k; ++j) {
        if (cost[out.pi[j]][j] >= kIncompatible)
            throw validation_error("no cardinality-compatible concept matching exists");
        out.objective += std::abs(corr.r[out.pi[j]][j]);
    }

    for (int j = 0; j < k; ++j) {
        const int card = dump.space->cardinality(j);
        std::vector<std::vector<double>> vc(card, std::vector<double>(card, 0.0));
        for (std::size_t r = 0; r < dump.rows; ++r)
            vc[dump.g_at(r, out.pi[j])][dump.c_at(r, j)] -= 1.0;
        const auto row_of_col = detail::min_cost_assignment(vc);
        std::vector<int> psi(card, -1);
        for (int w = 0; w < card; ++w) psi[row_of_col[w]] = w;
        out.psi.push_back(std::move(psi));
    }
    return out;
}

double concept_collapse(const PredictionDump& dump) {
    std::unordered_set<std::uint64_t> distinct;
    const int k = dump.space->k();
    for (std::size_t r = 0; r < dump.rows; ++r) {
        World c(k);
        for (int i = 0; i < k; ++i) c[i] = dump.c_at(r, i);
        distinct.insert(dump.space->index_of(c));
    }
    const double m = static_cast<double>(dump.space->world_count_u64());
    return 1.0 - static_cast<double>(distinct.size()) / m;
}

double aligned_concept_f1(const PredictionDump& dump, const AlignmentResult& alignment) {
    const int k   = dump.space->k();
    double    sum = 0.0;
    for (int i = 0; i < k; ++i) {
        std::vector<int> truth(dump.rows), pred(dump.rows);
        for (std::size_t r = 0; r < dump.rows; ++r) {
            truth[r] = alignment.psi[i][dump.g_at(r, alignment.pi[i])];
            pred[r]  = dump.c_at(r, i);
        }
        sum += detail::macro_f1(truth, pred);
    }
    return sum / k;
}

double eval_beta_f1(const PredictionDump& dump, const BetaMap& beta,
                    const AlignmentResult& alignment) {
    const int        k = dump.space->k();
    std::vector<int> truth(dump.rows), pred(dump.rows);
    std::set<std::uint64_t> missing;
    for (std::size_t r = 0; r < dump.rows; ++r) {
        World g(k);
        for (int i = 0; i < k; ++i) g[i] = dump.g_at(r, i);
        const std::uint64_t t = dump.space->index_of(alignment.transform(g));
        if (!beta.forced(t)) {
            missing.insert(t);
            continue;
        }
        truth[r] = dump.y[r];
        pred[r]  = beta.at(t);
    }
    if (!missing.empty()) {
        std::string msg = "beta is free on required worlds:";
        for (std::uint64_t t : missing) {
            const World w = dump.space->world_at(t);
            msg += " (";
            for (std::size_t i = 0; i < w.size(); ++i)
                msg += (i ? "," : "") + std::to_string(w[i]);
            msg += ")";
        }
        throw validation_error(msg);
    }
    return detail::macro_f1(truth, pred);
}

double label_f1(const PredictionDump& dump) { return detail::macro_f1(dump.y, dump.yhat); }

} // namespace rsc
