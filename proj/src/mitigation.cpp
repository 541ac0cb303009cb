#include "rsc/mitigation.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>

namespace rsc {

std::string MitigationSet::summary() const {
    if (!any()) return "none";
    std::string s;
    auto add = [&](const std::string& part) {
        if (!s.empty()) s += "+";
        s += part;
    };
    if (concept_supervision)
        add("concept_supervision(" + std::to_string(concept_supervision->factors.size()) +
            " factors," + std::to_string(concept_supervision->worlds.size()) + " worlds)");
    if (distillation_worlds)
        add("distillation(" + std::to_string(distillation_worlds->size()) + " worlds)");
    if (reconstruction) add("reconstruction");
    if (!multitask.empty()) add("multitask(" + std::to_string(multitask.size()) + ")");
    return s;
}

namespace {

using nlohmann::json;

std::vector<std::uint64_t> parse_worlds_or_full(const json& j, const ConceptSpace& space,
                                                const std::string& where) {
    std::vector<std::uint64_t> out;
    if (j.is_string() && j.get<std::string>() == "full") {
        const std::uint64_t n = space.world_count_u64();
        out.resize(n);
        for (std::uint64_t i = 0; i < n; ++i) out[i] = i;
        return out;
    }
    if (!j.is_array()) throw validation_error(where + ": expected \"full\" or a world list");
    for (const auto& e : j) {
        World w = e.get<std::vector<int>>();
        if (!space.valid_world(w)) throw validation_error(where + ": invalid world");
        out.push_back(space.index_of(w));
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

} // namespace

MitigationSet parse_mitigations(const nlohmann::json& doc, const TaskSpec& task) {
    MitigationSet ms;
    if (!doc.contains("mitigations")) return ms;
    const json& mj = doc["mitigations"];
    if (!mj.is_object()) throw validation_error("'mitigations' must be an object");
    for (auto it = mj.begin(); it != mj.end(); ++it) {
        const std::string key = it.key();
        if (key == "concept_supervision") {
            const json& cj = it.value();
            MitigationSet::ConceptSupervision cs;
            if (!cj.contains("factors")) throw validation_error("concept_supervision needs 'factors'");
            cs.factors = cj["factors"].get<std::vector<int>>();
            std::set<int> uniq;
            for (int f : cs.factors) {
                if (f < 0 || f >= task.space->k())
                    throw validation_error("concept_supervision factor index out of range");
                if (!uniq.insert(f).second)
                    throw validation_error("concept_supervision factor listed twice");
            }
            cs.worlds = parse_worlds_or_full(cj.value("worlds", json("full")), *task.space,
                                             "concept_supervision");
            for (auto jt = cj.begin(); jt != cj.end(); ++jt)
                if (jt.key() != "factors" && jt.key() != "worlds")
                    throw validation_error("unknown key '" + jt.key() + "' in concept_supervision");
            ms.concept_supervision = std::move(cs);
        } else if (key == "distillation") {
            const json& dj = it.value();
            for (auto jt = dj.begin(); jt != dj.end(); ++jt)
                if (jt.key() != "worlds")
                    throw validation_error("unknown key '" + jt.key() + "' in distillation");
            ms.distillation_worlds =
                parse_worlds_or_full(dj.value("worlds", json("full")), *task.space, "distillation");
        } else if (key == "reconstruction") {
            ms.reconstruction = it.value().get<bool>();
        } else if (key == "multitask") {
            if (!it.value().is_array()) throw validation_error("'multitask' must be a list");
            for (const json& tj : it.value()) {
                for (auto jt = tj.begin(); jt != tj.end(); ++jt)
                    if (jt.key() != "knowledge" && jt.key() != "worlds" && jt.key() != "labels")
                        throw validation_error("unknown key '" + jt.key() + "' in multitask entry");
                if (!tj.contains("knowledge") || !tj.contains("labels"))
                    throw validation_error("multitask entries need 'knowledge' and 'labels'");
                const int labels = tj["labels"].get<int>();
                if (labels < 1) throw validation_error("multitask label count must be >= 1");
                auto worlds =
                    parse_worlds_or_full(tj.value("worlds", json("full")), *task.space, "multitask");
                // The extra knowledge may be builtin or a table over G^tau.
                const json& kj = tj["knowledge"];
                std::vector<int> table(task.space->world_count_u64(), 0);
                if (kj.is_object() && kj.contains("builtin")) {
                    const std::string name = kj["builtin"].get<std::string>();
                    BuiltinKnowledge  b;
                    int               modulus = kj.value("modulus", 0);
                    if (name == "sum")
                        b = BuiltinKnowledge::sum;
                    else if (name == "sum_parity")
                        b = BuiltinKnowledge::sum_parity;
                    else if (name == "xor")
                        b = BuiltinKnowledge::xor_parity;
                    else if (name == "modular_sum")
                        b = BuiltinKnowledge::modular_sum;
                    else
                        throw validation_error("unknown builtin knowledge '" + name + "'");
                    KnowledgeTable kt = builtin_knowledge(b, task.space, modulus);
                    if (kt.label_count() != labels)
                        throw validation_error("multitask 'labels' disagrees with builtin");
                    ms.multitask.push_back({std::move(kt), std::move(worlds)});
                    continue;
                }
                if (!kj.is_object() || !kj.contains("table"))
                    throw validation_error("multitask knowledge must hold 'builtin' or 'table'");
                std::vector<char> covered(task.space->world_count_u64(), 0);
                for (const auto& row : kj["table"]) {
                    World w;
                    for (int i = 0; i < task.space->k(); ++i) w.push_back(row[i].get<int>());
                    const std::uint64_t idx = task.space->index_of(w);
                    const int           y   = row[task.space->k()].get<int>();
                    if (y < 0 || y >= labels)
                        throw validation_error("multitask table label out of range");
                    if (covered[idx]) throw validation_error("multitask table world defined twice");
                    covered[idx] = 1;
                    table[idx]   = y;
                }
                for (std::uint64_t w : worlds)
                    if (!covered[w])
                        throw validation_error("multitask knowledge not defined on all its worlds");
                ms.multitask.push_back(
                    {KnowledgeTable(task.space, labels, std::move(table)), std::move(worlds)});
            }
        } else {
            throw validation_error("unknown key '" + key + "' in mitigations");
        }
    }
    return ms;
}

MitigationSet load_mitigations_file(const std::string& path, const TaskSpec& task) {
    std::ifstream in(path);
    if (!in) throw validation_error("mitigations file not found: " + path);
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw validation_error("malformed mitigations file " + path + ": " + e.what());
    }
    return parse_mitigations(doc, task);
}

bool admits_concept_supervision(const AlphaMap& alpha, const MitigationSet& ms) {
    if (!ms.concept_supervision) return true;
    const ConceptSpace& space = *alpha.space();
    for (std::uint64_t gi : ms.concept_supervision->worlds) {
        const World g = space.world_at(gi);
        const World c = space.world_at(alpha.apply(gi));
        for (int i : ms.concept_supervision->factors)
            if (c[i] != g[i]) return false;
    }
    return true;
}

bool admits_distillation(BetaMap& beta, const TaskSpec& task, const MitigationSet& ms) {
    if (!ms.distillation_worlds) return true;
    for (std::uint64_t ci : *ms.distillation_worlds) {
        const int want = task.knowledge.label_of(ci);
        if (beta.forced(ci)) {
            if (beta.at(ci) != want) return false;
        } else {
            beta.force(ci, want);
        }
    }
    return true;
}

bool admits_reconstruction(const AlphaMap& alpha, const TaskSpec& task) {
    std::unordered_set<std::uint64_t> seen;
    seen.reserve(task.support.size() * 2);
    for (std::uint64_t g : task.support.indices())
        if (!seen.insert(alpha.apply(g)).second) return false;
    return true;
}

bool admits_multitask(const AlphaMap& alpha, const TaskSpec& task, const MitigationSet& ms) {
    for (const auto& extra : ms.multitask) {
        std::unordered_map<std::uint64_t, int> cell_label;
        cell_label.reserve(extra.worlds.size() * 2);
        for (std::uint64_t g : extra.worlds) {
            if (!task.support.contains(g)) continue;
            const std::uint64_t c  = alpha.apply(g);
            const int           yt = extra.knowledge.label_of(g);
            auto [it, inserted]    = cell_label.emplace(c, yt);
            if (!inserted && it->second != yt) return false;
        }
    }
    return true;
}

bool admits_all(const AlphaMap& alpha, BetaMap& beta, const TaskSpec& task,
                const MitigationSet& ms) {
    return admits_concept_supervision(alpha, ms) && admits_distillation(beta, task, ms) &&
           (!ms.reconstruction || admits_reconstruction(alpha, task)) &&
           admits_multitask(alpha, task, ms);
}

TaskSpec conjoin_multitask(const TaskSpec& task, const MitigationSet& ms) {
    std::vector<const MitigationSet::ExtraTask*> active;
    for (const auto& extra : ms.multitask) {
        bool covers = true;
        for (std::uint64_t g : task.support.indices())
            if (!std::binary_search(extra.worlds.begin(), extra.worlds.end(), g)) covers = false;
        if (extra.worlds.empty()) continue;
        if (!covers)
            throw validation_error(
                "conjoin_multitask requires extra tasks covering the support; partial "
                "coverage is handled by the counting engine directly");
        active.push_back(&extra);
    }
    if (active.empty()) return task;

    const std::uint64_t n = task.space->world_count_u64();
    int label_count = task.label_count;
    for (const auto* e : active) label_count *= e->knowledge.label_count();
    std::vector<int> table(n);
    for (std::uint64_t g = 0; g < n; ++g) {
        int y = task.knowledge.label_of(g);
        for (const auto* e : active) y = y * e->knowledge.label_count() + e->knowledge.label_of(g);
        table[g] = y;
    }
    return make_task(task.name.empty() ? "" : task.name + "+multitask", task.space,
                     KnowledgeTable(task.space, label_count, std::move(table)), task.support,
                     task.family);
}

} // namespace rsc
