#include "fewkg/taskgen.hpp"

#include <algorithm>
#include <stdexcept>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "fewkg/rng.hpp"
#include "fewkg/util.hpp"

namespace fewkg {

RelationSplit split_relations(const std::vector<int>& relations,
                              int n_train, int n_valid, int n_test, uint64_t seed) {
    const size_t total = relations.size();
    if (n_train < 0 || n_valid < 0 || n_test < 0 ||
        static_cast<size_t>(n_train) + static_cast<size_t>(n_valid) +
                static_cast<size_t>(n_test) != total) {
        throw std::runtime_error("split_relations: counts " + std::to_string(n_train) +
                                 "+" + std::to_string(n_valid) + "+" + std::to_string(n_test) +
                                 " do not sum to " + std::to_string(total) + " relations");
    }
    Rng rng(derive_seed(seed, "split_relations"));
    auto perm = rng.permutation(total);
    RelationSplit s;
    size_t i = 0;
    for (int n = 0; n < n_train; ++n) s.train.push_back(relations[perm[i++]]);
    for (int n = 0; n < n_valid; ++n) s.valid.push_back(relations[perm[i++]]);
    for (int n = 0; n < n_test; ++n) s.test.push_back(relations[perm[i++]]);
    return s;
}

void validate_split(const RelationSplit& split, const std::vector<int>& all) {
    std::set<int> seen;
    auto check = [&](const std::vector<int>& part, const char* name) {
        for (int r : part) {
            if (!seen.insert(r).second)
                throw std::runtime_error(std::string("split: relation id ") +
                                         std::to_string(r) + " appears twice (in " + name + ")");
        }
    };
    check(split.train, "train");
    check(split.valid, "valid");
    check(split.test, "test");
    std::set<int> expected(all.begin(), all.end());
    if (seen != expected)
        throw std::runtime_error("split: parts do not cover the task relations exactly");
}

FewShotTask build_task_from_pairs(const std::vector<Pair>& pairs, int relation,
                                  int k, int j, uint64_t seed,
                                  std::vector<int> candidates) {
    const int total = static_cast<int>(pairs.size());
    if (k < 0) throw std::invalid_argument("build_task: K must be >= 0");
    if (total < k + 1)
        throw std::runtime_error("build_task: relation " + std::to_string(relation) +
                                 " has " + std::to_string(total) +
                                 " triples, needs at least " + std::to_string(k + 1));
    const int remaining = total - k;
    const int want_j = (j == kAllRemaining) ? remaining : j;
    if (want_j < 1 || want_j > remaining)
        throw std::runtime_error("build_task: relation " + std::to_string(relation) +
                                 " has " + std::to_string(remaining) +
                                 " triples left after support, cannot take " +
                                 std::to_string(want_j) + " queries");

    Rng rng(derive_seed(seed, "build_task", static_cast<uint64_t>(relation)));
    auto perm = rng.permutation(static_cast<size_t>(total));

    FewShotTask task;
    task.relation = relation;
    task.seed = seed;
    for (int i = 0; i < k; ++i) task.support.push_back(pairs[perm[static_cast<size_t>(i)]]);
    for (int i = 0; i < want_j; ++i)
        task.queries.push_back(pairs[perm[static_cast<size_t>(k + i)]]);
    task.candidates = std::move(candidates);
    return task;
}

FewShotTask build_task(const KnowledgeGraph& g, const EntityTypeTable& types,
                       int relation, int k, int j, uint64_t seed) {
    return build_task_from_pairs(g.pairs_of_relation(relation), relation, k, j, seed,
                                 build_candidates(g, types, relation));
}

std::vector<int> build_candidates(const KnowledgeGraph& g, const EntityTypeTable& types,
                                  int relation) {
    std::vector<Pair> pairs = g.pairs_of_relation(relation);
    if (pairs.empty())
        throw std::runtime_error("build_candidates: relation " + std::to_string(relation) +
                                 " has no known triples");

    std::set<std::string> tail_types;
    for (const Pair& p : pairs) tail_types.insert(types.type(p.tail));

    std::vector<int> out;
    const bool all_unknown =
        tail_types.size() == 1 && *tail_types.begin() == "unknown";
    if (all_unknown) {
        // Fallback: every entity observed in tail position of any triple.
        std::vector<char> is_tail(static_cast<size_t>(g.entities.size()), 0);
        for (const Triple& t : g.triples) is_tail[static_cast<size_t>(t.tail)] = 1;
        for (const auto& [rel, rel_pairs] : g.task_pairs)
            for (const Pair& p : rel_pairs) is_tail[static_cast<size_t>(p.tail)] = 1;
        for (int e = 0; e < g.entities.size(); ++e)
            if (is_tail[static_cast<size_t>(e)]) out.push_back(e);
    } else {
        for (int e = 0; e < g.entities.size(); ++e)
            if (tail_types.count(types.type(e))) out.push_back(e);
    }
    return out;
}

NegativeBatch sample_negatives(const std::vector<Pair>& targets,
                               const std::vector<int>& candidates,
                               const std::set<Pair>& positives,
                               int ratio, uint64_t seed, int relation) {
    if (ratio < 1) throw std::invalid_argument("sample_negatives: ratio must be >= 1");
    NegativeBatch batch;
    batch.tails.reserve(targets.size());

    std::unordered_set<int> positive_tails;
    Rng rng(derive_seed(seed, "negatives", static_cast<uint64_t>(relation)));
    size_t idx = 0;
    for (const Pair& pos : targets) {
        positive_tails.clear();
        for (const Pair& p : positives)
            if (p.head == pos.head) positive_tails.insert(p.tail);

        std::vector<int> valid;
        valid.reserve(candidates.size());
        for (int c : candidates)
            if (!positive_tails.count(c)) valid.push_back(c);
        if (valid.empty())
            throw std::runtime_error("sample_negatives: no valid corruption for positive #" +
                                     std::to_string(idx) + " (head " +
                                     std::to_string(pos.head) + ", tail " +
                                     std::to_string(pos.tail) + ")");

        std::vector<int> negs(static_cast<size_t>(ratio));
        for (int r = 0; r < ratio; ++r)
            negs[static_cast<size_t>(r)] = valid[rng.next_below(valid.size())];
        batch.tails.push_back(std::move(negs));
        ++idx;
    }
    return batch;
}

NegativeBatch sample_negatives(const FewShotTask& task, const std::set<Pair>& positives,
                               int ratio, uint64_t seed) {
    return sample_negatives(task.queries, task.candidates, positives, ratio, seed,
                            task.relation);
}

void cap_candidates(FewShotTask& task, int cap) {
    if (cap <= 0 || static_cast<int>(task.candidates.size()) <= cap) return;
    std::set<int> keep(task.candidates.begin(),
                       task.candidates.begin() + cap);
    for (const Pair& q : task.queries) keep.insert(q.tail);
    task.candidates.assign(keep.begin(), keep.end());
}

std::string task_to_json(const FewShotTask& task) {
    nlohmann::json j;
    j["relation"] = task.relation;
    auto pairs_to_json = [](const std::vector<Pair>& pairs) {
        nlohmann::json arr = nlohmann::json::array();
        for (const Pair& p : pairs) arr.push_back({p.head, p.tail});
        return arr;
    };
    j["support"] = pairs_to_json(task.support);
    j["queries"] = pairs_to_json(task.queries);
    j["candidates"] = task.candidates;
    j["seed"] = task.seed;
    return j.dump(2) + "\n";
}

FewShotTask task_from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    FewShotTask task;
    task.relation = j.at("relation").get<int>();
    for (const auto& p : j.at("support"))
        task.support.push_back({p.at(0).get<int>(), p.at(1).get<int>()});
    for (const auto& p : j.at("queries"))
        task.queries.push_back({p.at(0).get<int>(), p.at(1).get<int>()});
    task.candidates = j.at("candidates").get<std::vector<int>>();
    task.seed = j.at("seed").get<uint64_t>();
    return task;
}

std::string split_to_json(const RelationSplit& split, const KnowledgeGraph& g,
                          uint64_t config_hash, uint64_t seed) {
    nlohmann::json j;
    auto names = [&](const std::vector<int>& ids) {
        nlohmann::json arr = nlohmann::json::array();
        for (int r : ids) arr.push_back(g.relations.name(r));
        return arr;
    };
    j["config"] = hex64(config_hash);
    j["seed"] = seed;
    j["train"] = names(split.train);
    j["valid"] = names(split.valid);
    j["test"] = names(split.test);
    return j.dump(2) + "\n";
}

RelationSplit split_from_json(const std::string& text, const KnowledgeGraph& g) {
    nlohmann::json j = nlohmann::json::parse(text);
    RelationSplit s;
    auto ids = [&](const char* key, std::vector<int>& out) {
        for (const auto& name : j.at(key)) {
            auto id = g.relations.find(name.get<std::string>());
            if (!id)
                throw std::runtime_error(std::string("split: unknown relation \"") +
                                         name.get<std::string>() + "\"");
            out.push_back(*id);
        }
    };
    ids("train", s.train);
    ids("valid", s.valid);
    ids("test", s.test);
    return s;
}

}  // namespace fewkg
