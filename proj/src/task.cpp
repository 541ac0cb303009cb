#include "rsc/task.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace rsc {

namespace {

constexpr std::uint64_t kBitsetCutoff = std::uint64_t{1} << 24;
constexpr std::uint64_t kSupportMaterializeCap = std::uint64_t{1} << 24;

std::string world_str(const World& w) {
    std::string s = "(";
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(w[i]);
    }
    return s + ")";
}

} // namespace

ConceptSpace::ConceptSpace(std::vector<Factor> factors) : factors_(std::move(factors)) {
    if (factors_.empty()) throw validation_error("concept space needs at least one factor");
    std::set<std::string> names;
    total_ = 1;
    for (const auto& f : factors_) {
        if (f.cardinality < 1)
            throw validation_error("factor '" + f.name + "' has cardinality < 1");
        if (!names.insert(f.name).second)
            throw validation_error("duplicate factor name '" + f.name + "'");
        total_ *= f.cardinality;
    }
    fits_u64_ = total_.fits_ulong_p();
    if (fits_u64_) {
        strides_.assign(factors_.size(), 1);
        for (int i = static_cast<int>(factors_.size()) - 2; i >= 0; --i)
            strides_[i] = strides_[i + 1] * static_cast<std::uint64_t>(factors_[i + 1].cardinality);
    }
}

std::uint64_t ConceptSpace::world_count_u64() const {
    if (!fits_u64_) throw budget_error("concept space exceeds 64-bit world indexing");
    return mpz_get_ui(total_.get_mpz_t());
}

std::uint64_t ConceptSpace::index_of(const World& w) const {
    if (!valid_world(w)) throw validation_error("world " + world_str(w) + " not in concept space");
    std::uint64_t idx = 0;
    for (std::size_t i = 0; i < w.size(); ++i)
        idx += strides_[i] * static_cast<std::uint64_t>(w[i]);
    return idx;
}

World ConceptSpace::world_at(std::uint64_t index) const {
    World w(factors_.size());
    for (std::size_t i = 0; i < factors_.size(); ++i) {
        w[i] = static_cast<int>(index / strides_[i]);
        index %= strides_[i];
    }
    return w;
}

bool ConceptSpace::valid_world(const World& w) const {
    if (static_cast<int>(w.size()) != k()) return false;
    for (std::size_t i = 0; i < w.size(); ++i)
        if (w[i] < 0 || w[i] >= factors_[i].cardinality) return false;
    return true;
}

bool ConceptSpace::operator==(const ConceptSpace& o) const {
    if (factors_.size() != o.factors_.size()) return false;
    for (std::size_t i = 0; i < factors_.size(); ++i)
        if (factors_[i].name != o.factors_[i].name ||
            factors_[i].cardinality != o.factors_[i].cardinality)
            return false;
    return true;
}

KnowledgeTable::KnowledgeTable(SpacePtr space, int label_count, std::vector<int> labels)
    : space_(std::move(space)), label_count_(label_count), labels_(std::move(labels)) {
    if (label_count_ < 1) throw validation_error("label count must be >= 1");
    if (labels_.size() != space_->world_count_u64())
        throw validation_error("knowledge not total: table covers " +
                               std::to_string(labels_.size()) + " of " +
                               std::to_string(space_->world_count_u64()) + " worlds");
    for (std::size_t i = 0; i < labels_.size(); ++i)
        if (labels_[i] < 0 || labels_[i] >= label_count_)
            throw validation_error("knowledge entry out of range at world " +
                                   world_str(space_->world_at(i)));
}

KnowledgeTable builtin_knowledge(BuiltinKnowledge name, const SpacePtr& space, int modulus) {
    int label_count = 0;
    switch (name) {
        case BuiltinKnowledge::sum: {
            label_count = 1;
            for (const auto& f : space->factors()) label_count += f.cardinality - 1;
            break;
        }
        case BuiltinKnowledge::sum_parity: label_count = 2; break;
        case BuiltinKnowledge::xor_parity: {
            for (const auto& f : space->factors())
                if (f.cardinality != 2)
                    throw validation_error("xor knowledge requires binary factors, got cardinality " +
                                           std::to_string(f.cardinality));
            label_count = 2;
            break;
        }
        case BuiltinKnowledge::modular_sum: {
            if (modulus < 2) throw validation_error("modular_sum modulus must be >= 2");
            label_count = modulus;
            break;
        }
    }
    const std::uint64_t n = space->world_count_u64();
    std::vector<int> labels(n);
    for (std::uint64_t i = 0; i < n; ++i) {
        World w = space->world_at(i);
        long  sum = 0;
        for (int v : w) sum += v;
        switch (name) {
            case BuiltinKnowledge::sum: labels[i] = static_cast<int>(sum); break;
            case BuiltinKnowledge::sum_parity: labels[i] = static_cast<int>(sum % 2); break;
            case BuiltinKnowledge::xor_parity: labels[i] = static_cast<int>(sum % 2); break;
            case BuiltinKnowledge::modular_sum: labels[i] = static_cast<int>(sum % modulus); break;
        }
    }
    return {space, label_count, std::move(labels)};
}

SupportSet SupportSet::from_indices(const SpacePtr& space, std::vector<std::uint64_t> sorted) {
    SupportSet s;
    s.space_size_ = space->world_count_u64();
    s.indices_    = std::move(sorted);
    s.size_       = s.indices_.size();
    if (s.space_size_ <= kBitsetCutoff) {
        s.bits_.assign((s.space_size_ + 63) / 64, 0);
        for (std::uint64_t i : s.indices_) s.bits_[i >> 6] |= std::uint64_t{1} << (i & 63);
    }
    return s;
}

SupportSet SupportSet::full(const SpacePtr& space) {
    const std::uint64_t n = space->world_count_u64();
    if (n > kSupportMaterializeCap) throw budget_error("support too large to materialize");
    std::vector<std::uint64_t> all(n);
    for (std::uint64_t i = 0; i < n; ++i) all[i] = i;
    return from_indices(space, std::move(all));
}

SupportSet SupportSet::include_list(const SpacePtr& space, const std::vector<World>& worlds) {
    if (worlds.empty()) throw validation_error("include-list support must be non-empty");
    std::vector<std::uint64_t> idx;
    idx.reserve(worlds.size());
    for (const auto& w : worlds) idx.push_back(space->index_of(w));
    std::sort(idx.begin(), idx.end());
    idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
    return from_indices(space, std::move(idx));
}

SupportSet SupportSet::exclude_list(const SpacePtr& space, const std::vector<World>& worlds) {
    const std::uint64_t n = space->world_count_u64();
    if (n > kSupportMaterializeCap) throw budget_error("support too large to materialize");
    std::vector<bool> out(n, false);
    for (const auto& w : worlds) out[space->index_of(w)] = true;
    std::vector<std::uint64_t> idx;
    for (std::uint64_t i = 0; i < n; ++i)
        if (!out[i]) idx.push_back(i);
    return from_indices(space, std::move(idx));
}

SupportSet SupportSet::per_factor_product(const SpacePtr& space,
                                          const std::vector<std::vector<int>>& values) {
    if (static_cast<int>(values.size()) != space->k())
        throw validation_error("product support needs one value list per factor");
    std::vector<std::vector<int>> sorted = values;
    for (int i = 0; i < space->k(); ++i) {
        auto& vs = sorted[i];
        if (vs.empty()) throw validation_error("product support has empty value list for factor " +
                                               std::to_string(i));
        std::sort(vs.begin(), vs.end());
        vs.erase(std::unique(vs.begin(), vs.end()), vs.end());
        for (int v : vs)
            if (v < 0 || v >= space->cardinality(i))
                throw validation_error("product support value " + std::to_string(v) +
                                       " out of range for factor " + std::to_string(i));
    }
    std::vector<std::uint64_t> idx;
    World w(space->k(), 0);
    std::vector<std::size_t> pos(space->k(), 0);
    for (;;) {
        for (int i = 0; i < space->k(); ++i) w[i] = sorted[i][pos[i]];
        idx.push_back(space->index_of(w));
        int i = space->k() - 1;
        while (i >= 0 && ++pos[i] == sorted[i].size()) pos[i--] = 0;
        if (i < 0) break;
    }
    std::sort(idx.begin(), idx.end());
    return from_indices(space, std::move(idx));
}

bool SupportSet::contains(std::uint64_t i) const {
    if (!bits_.empty()) return (bits_[i >> 6] >> (i & 63)) & 1;
    return std::binary_search(indices_.begin(), indices_.end(), i);
}

AlphaFamily AlphaFamily::untied(int k) {
    AlphaFamily f;
    f.kind = Kind::factorized;
    for (int i = 0; i < k; ++i) f.tie_groups.push_back({i});
    return f;
}

AlphaFamily AlphaFamily::tied(const std::vector<std::vector<int>>& groups) {
    AlphaFamily f;
    f.kind       = Kind::factorized;
    f.tie_groups = groups;
    return f;
}

int AlphaFamily::group_of(int factor) const {
    for (int g = 0; g < group_count(); ++g)
        for (int f : tie_groups[g])
            if (f == factor) return g;
    throw validation_error("factor " + std::to_string(factor) + " not in any tie group");
}

namespace {

void validate_family(const AlphaFamily& family, const ConceptSpace& space) {
    if (family.kind == AlphaFamily::Kind::joint) {
        if (!family.tie_groups.empty())
            throw validation_error("joint alpha family takes no tie groups");
        return;
    }
    std::vector<bool> seen(space.k(), false);
    for (const auto& group : family.tie_groups) {
        if (group.empty()) throw validation_error("empty tie group");
        int card = -1;
        for (int f : group) {
            if (f < 0 || f >= space.k())
                throw validation_error("tie group references factor " + std::to_string(f));
            if (seen[f])
                throw validation_error("factor " + std::to_string(f) + " in two tie groups");
            seen[f] = true;
            if (card < 0) card = space.cardinality(f);
            if (space.cardinality(f) != card)
                throw validation_error("tie-group cardinality mismatch: factor " +
                                       std::to_string(f) + " has cardinality " +
                                       std::to_string(space.cardinality(f)) + ", group has " +
                                       std::to_string(card));
        }
    }
    for (int f = 0; f < space.k(); ++f)
        if (!seen[f])
            throw validation_error("tie groups must partition all factors; factor " +
                                   std::to_string(f) + " missing");
}

} // namespace

TaskSpec make_task(std::string name, SpacePtr space, KnowledgeTable knowledge,
                   SupportSet support, AlphaFamily family) {
    if (!(*knowledge.space() == *space))
        throw validation_error("knowledge defined over a different concept space");
    validate_family(family, *space);
    return TaskSpec{std::move(name), std::move(space), knowledge.label_count(),
                    std::move(knowledge), std::move(support), std::move(family)};
}

std::string TaskSpec::digest() const {
    // FNV-1a over a canonical rendering of the task content.
    std::ostringstream os;
    for (const auto& f : space->factors()) os << f.name << ':' << f.cardinality << ';';
    os << '|' << label_count << '|';
    for (int y : knowledge.table()) os << y << ',';
    os << '|';
    for (std::uint64_t i : support.indices()) os << i << ',';
    os << '|' << (family.kind == AlphaFamily::Kind::joint ? "J" : "F");
    for (const auto& g : family.tie_groups) {
        os << '[';
        for (int f : g) os << f << ' ';
        os << ']';
    }
    std::uint64_t h = 14695981039346656037ull;
    for (char c : os.str()) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

namespace {

using nlohmann::json;

void reject_unknown_keys(const json& obj, const std::set<std::string>& allowed,
                         const std::string& where) {
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!allowed.count(it.key()))
            throw validation_error("unknown key '" + it.key() + "' in " + where);
}

World parse_world(const json& j, const ConceptSpace& space, const std::string& where) {
    if (!j.is_array() || static_cast<int>(j.size()) != space.k())
        throw validation_error(where + ": world must be an array of " + std::to_string(space.k()) +
                               " values");
    World w;
    for (const auto& v : j) {
        if (!v.is_number_integer()) throw validation_error(where + ": world value not an integer");
        w.push_back(v.get<int>());
    }
    if (!space.valid_world(w)) throw validation_error(where + ": world " + world_str(w) + " invalid");
    return w;
}

std::vector<World> parse_world_list(const json& j, const ConceptSpace& space,
                                    const std::string& where) {
    if (!j.is_array()) throw validation_error(where + ": expected a list of worlds");
    std::vector<World> out;
    for (const auto& e : j) out.push_back(parse_world(e, space, where));
    return out;
}

} // namespace

TaskSpec build_task(const nlohmann::json& doc) {
    if (!doc.is_object()) throw validation_error("task document must be a JSON object");
    reject_unknown_keys(doc, {"name", "concepts", "labels", "knowledge", "support",
                              "alpha_family", "mitigations"},
                        "task document");

    if (!doc.contains("concepts") || !doc["concepts"].is_array() || doc["concepts"].empty())
        throw validation_error("task document needs a non-empty 'concepts' list");
    std::vector<Factor> factors;
    for (const auto& c : doc["concepts"]) {
        reject_unknown_keys(c, {"name", "cardinality"}, "concepts entry");
        if (!c.contains("name") || !c.contains("cardinality"))
            throw validation_error("concepts entries need 'name' and 'cardinality'");
        factors.push_back({c["name"].get<std::string>(), c["cardinality"].get<int>()});
    }
    auto space = std::make_shared<const ConceptSpace>(std::move(factors));

    if (!doc.contains("knowledge")) throw validation_error("task document needs 'knowledge'");
    const json& kj = doc["knowledge"];
    std::optional<KnowledgeTable> knowledge;
    if (kj.is_object() && kj.contains("builtin")) {
        reject_unknown_keys(kj, {"builtin", "modulus"}, "knowledge");
        const std::string name = kj["builtin"].get<std::string>();
        int modulus = kj.value("modulus", 0);
        if (name == "sum")
            knowledge = builtin_knowledge(BuiltinKnowledge::sum, space);
        else if (name == "sum_parity")
            knowledge = builtin_knowledge(BuiltinKnowledge::sum_parity, space);
        else if (name == "xor")
            knowledge = builtin_knowledge(BuiltinKnowledge::xor_parity, space);
        else if (name == "modular_sum")
            knowledge = builtin_knowledge(BuiltinKnowledge::modular_sum, space, modulus);
        else
            throw validation_error("unknown builtin knowledge '" + name + "'");
    } else if (kj.is_object() && kj.contains("table")) {
        reject_unknown_keys(kj, {"table"}, "knowledge");
        if (!doc.contains("labels"))
            throw validation_error("table knowledge requires the 'labels' key");
        const int label_count = doc["labels"].get<int>();
        const std::uint64_t n = space->world_count_u64();
        std::vector<int> labels(n, -1);
        for (const auto& row : kj["table"]) {
            if (!row.is_array() || static_cast<int>(row.size()) != space->k() + 1)
                throw validation_error("knowledge table rows must be [g_0..g_k-1, label]");
            World w;
            for (int i = 0; i < space->k(); ++i) w.push_back(row[i].get<int>());
            if (!space->valid_world(w))
                throw validation_error("knowledge table world " + world_str(w) + " invalid");
            const std::uint64_t idx = space->index_of(w);
            if (labels[idx] != -1)
                throw validation_error("knowledge table defines world " + world_str(w) + " twice");
            labels[idx] = row[space->k()].get<int>();
        }
        for (std::uint64_t i = 0; i < n; ++i)
            if (labels[i] == -1)
                throw validation_error("knowledge not total: world " +
                                       world_str(space->world_at(i)) + " missing");
        knowledge = KnowledgeTable(space, label_count, std::move(labels));
    } else {
        throw validation_error("'knowledge' must hold 'builtin' or 'table'");
    }
    if (doc.contains("labels") && doc["labels"].get<int>() != knowledge->label_count())
        throw validation_error("'labels' (" + std::to_string(doc["labels"].get<int>()) +
                               ") disagrees with knowledge label count (" +
                               std::to_string(knowledge->label_count()) + ")");

    SupportSet support = SupportSet::full(space);
    if (doc.contains("support")) {
        const json& sj = doc["support"];
        if (sj.is_string() && sj.get<std::string>() == "full") {
            // default
        } else if (sj.is_string() && sj.get<std::string>() == "biased-parity") {
            support = biased_parity_support(space);
        } else if (sj.is_object()) {
            reject_unknown_keys(sj, {"include", "exclude", "product"}, "support");
            if (sj.size() != 1)
                throw validation_error("'support' must hold exactly one of include/exclude/product");
            if (sj.contains("include"))
                support = SupportSet::include_list(space,
                                                   parse_world_list(sj["include"], *space, "support"));
            else if (sj.contains("exclude"))
                support = SupportSet::exclude_list(space,
                                                   parse_world_list(sj["exclude"], *space, "support"));
            else {
                std::vector<std::vector<int>> values;
                for (const auto& lst : sj["product"]) values.push_back(lst.get<std::vector<int>>());
                support = SupportSet::per_factor_product(space, values);
            }
        } else {
            throw validation_error("'support' must be \"full\", \"biased-parity\" or an object");
        }
    }

    AlphaFamily family = AlphaFamily::joint();
    if (doc.contains("alpha_family")) {
        const json& fj = doc["alpha_family"];
        reject_unknown_keys(fj, {"kind", "ties"}, "alpha_family");
        const std::string kind = fj.value("kind", "");
        if (kind == "joint") {
            if (fj.contains("ties")) throw validation_error("joint alpha family takes no 'ties'");
        } else if (kind == "factorized") {
            if (fj.contains("ties")) {
                std::vector<std::vector<int>> groups;
                for (const auto& g : fj["ties"]) groups.push_back(g.get<std::vector<int>>());
                family = AlphaFamily::tied(groups);
            } else {
                family = AlphaFamily::untied(space->k());
            }
        } else {
            throw validation_error("alpha_family kind must be 'joint' or 'factorized'");
        }
    }

    return make_task(doc.value("name", ""), space, std::move(*knowledge), std::move(support),
                     family);
}

TaskSpec load_task_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw validation_error("task file not found: " + path);
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw validation_error("malformed task file " + path + ": " + e.what());
    }
    return build_task(doc);
}

std::vector<World> enumerate_support(const TaskSpec& task) {
    std::vector<World> out;
    out.reserve(task.support.size());
    for (std::uint64_t i : task.support.indices()) out.push_back(task.space->world_at(i));
    return out;
}

SupportSet biased_parity_support(const SpacePtr& space) {
    if (space->k() != 2) throw validation_error("biased parity support requires two factors");
    std::vector<World> excluded;
    for (int a = 0; a < space->cardinality(0); a += 2)
        for (int b = 1; b < space->cardinality(1); b += 2) excluded.push_back({a, b});
    return SupportSet::exclude_list(space, excluded);
}

} // namespace rsc
