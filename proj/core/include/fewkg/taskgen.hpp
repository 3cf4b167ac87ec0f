#pragma once
// Few-shot task construction: relation splits, K-shot support/query
// partitions, type-constrained candidate sets, and negative sampling.
// Everything is a pure function of (inputs, seed).

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "fewkg/kg.hpp"

namespace fewkg {

struct FewShotTask {
    int relation = -1;
    std::vector<Pair> support;   // K pairs
    std::vector<Pair> queries;   // (head, true tail)
    std::vector<int> candidates; // ascending entity ids, no duplicates
    uint64_t seed = 0;
};

struct RelationSplit {
    std::vector<int> train;
    std::vector<int> valid;
    std::vector<int> test;
};

// Per-positive lists of corrupted tails; negatives[i] belongs to positive i.
struct NegativeBatch {
    std::vector<std::vector<int>> tails;
};

// Seeded disjoint cover of `relations` with the given sizes.
RelationSplit split_relations(const std::vector<int>& relations,
                              int n_train, int n_valid, int n_test, uint64_t seed);

// Validates that three relation lists are pairwise disjoint and cover `all`.
void validate_split(const RelationSplit& split, const std::vector<int>& all);

inline constexpr int kAllRemaining = -1;

// Support = K seeded draws without replacement from the relation's pairs;
// queries = the next J draws (J = kAllRemaining takes everything left).
// Candidates come from build_candidates unless a prebuilt list is supplied.
FewShotTask build_task(const KnowledgeGraph& g, const EntityTypeTable& types,
                       int relation, int k, int j, uint64_t seed);
FewShotTask build_task_from_pairs(const std::vector<Pair>& pairs, int relation,
                                  int k, int j, uint64_t seed,
                                  std::vector<int> candidates);

// All entities whose type matches the type of any tail of the relation
// (background + task triples). If every tail is "unknown"-typed, falls back
// to all entities observed in tail position of any triple. Ascending ids.
std::vector<int> build_candidates(const KnowledgeGraph& g, const EntityTypeTable& types,
                                  int relation);

// For each target positive (h, t): `ratio` tails drawn uniformly from the
// candidates that do not form a known positive with h. `positives` is the
// relation's known-positive pair set used for rejection.
NegativeBatch sample_negatives(const std::vector<Pair>& targets,
                               const std::vector<int>& candidates,
                               const std::set<Pair>& positives,
                               int ratio, uint64_t seed, int relation);
// Convenience form corrupting the task's queries.
NegativeBatch sample_negatives(const FewShotTask& task, const std::set<Pair>& positives,
                               int ratio, uint64_t seed);

// Keep the lowest-id `cap` candidates plus every query true tail, so the
// candidate-completeness invariant survives capping. cap <= 0 is a no-op.
void cap_candidates(FewShotTask& task, int cap);

std::string task_to_json(const FewShotTask& task);
FewShotTask task_from_json(const std::string& text);

std::string split_to_json(const RelationSplit& split, const KnowledgeGraph& g,
                          uint64_t config_hash, uint64_t seed);
RelationSplit split_from_json(const std::string& text, const KnowledgeGraph& g);

}  // namespace fewkg
