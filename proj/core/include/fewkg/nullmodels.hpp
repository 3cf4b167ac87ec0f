#pragma once
// Synthetic relation generators carrying exactly one information source
// (symmetric / transitive structure, or community co-membership), plus
// Louvain community detection over the weighted undirected collapse of the
// background graph's largest connected component.

#include <cstdint>
#include <string>
#include <vector>

#include "fewkg/kg.hpp"

namespace fewkg {

enum class Pattern { Symmetric, Transitive, Positional };

std::string pattern_name(Pattern p);
Pattern pattern_from_name(const std::string& name);

struct SyntheticRelation {
    std::string name;  // "null_sym_3" style
    Pattern pattern = Pattern::Symmetric;
    std::vector<Pair> pairs;
    // provenance
    uint64_t seed = 0;
    int n = 0;                // iteration count, not the edge count
    int community_count = 0;  // positional only
};

struct CommunityPartition {
    // entity id -> community index; -1 for entities outside the component
    std::vector<int> assignment;
    // ascending member ids, communities ordered by smallest member
    std::vector<std::vector<int>> communities;
    double modularity = 0.0;
};

// N iterations, each sampling distinct (h, t) uniformly from the component
// and emitting both (h, t) and (t, h): exactly 2N edges. Duplicates across
// iterations are kept.
SyntheticRelation gen_symmetric(const std::vector<int>& lcc, int n, uint64_t seed,
                                int index = 0);

// N iterations, each sampling distinct (e1, e2, e3) and emitting (e1,e2),
// (e2,e3), (e1,e3): exactly 3N edges, closed within each iteration.
SyntheticRelation gen_transitive(const std::vector<int>& lcc, int n, uint64_t seed,
                                 int index = 0);

// N iterations, each picking a community uniformly among those with at least
// two members, then two distinct members: exactly N intra-community edges.
SyntheticRelation gen_positional(const CommunityPartition& partition, int n,
                                 uint64_t seed, int index = 0);

// Two-phase Louvain with deterministic ascending-id sweeps over the weighted
// undirected collapse of the component (edge weight = background triple
// multiplicity, self-loops kept). Local moves accept only gains above 1e-9,
// ties broken toward the smallest community id; aggregation repeats until a
// sweep moves nothing.
CommunityPartition louvain(const KnowledgeGraph& g, const std::vector<int>& lcc);

// Modularity of an assignment over the same weighted collapse, computed
// directly from the triple list (independent of louvain's bookkeeping).
double modularity(const KnowledgeGraph& g, const std::vector<int>& lcc,
                  const std::vector<int>& assignment);

// Same shape as real task files, so downstream tooling is agnostic:
// {"<name>": [["h", "<name>", "t"], ...], ...} with vocabulary names.
std::string synthetic_to_task_json(const std::vector<SyntheticRelation>& rels,
                                   const KnowledgeGraph& g);
// Sidecar with pattern/provenance per relation.
std::string synthetic_provenance_json(const std::vector<SyntheticRelation>& rels,
                                      uint64_t config_hash, uint64_t seed);
// Inverse of the pair above; entity names must exist in the graph. The graph
// itself is left untouched -- synthetic relations never enter it.
std::vector<SyntheticRelation> synthetic_from_task_json(const std::string& task_json,
                                                        const std::string& provenance_json,
                                                        const KnowledgeGraph& g);

std::string partition_to_json(const CommunityPartition& p, const KnowledgeGraph& g,
                              uint64_t config_hash, uint64_t seed);

}  // namespace fewkg
