#pragma once
// Knowledge-graph data model: string<->dense-id vocabularies, background
// triple store with degree/adjacency indices, and per-relation task pairs
// (few-shot relations whose triples live in task files, not in the
// background graph). Construction is single-threaded; once built the graph
// is immutable and safe to share across readers.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <unordered_map>
#include <vector>

namespace fewkg {

struct Triple {
    int head = 0;
    int rel = 0;
    int tail = 0;
    friend bool operator==(const Triple&, const Triple&) = default;
    friend auto operator<=>(const Triple&, const Triple&) = default;
};

// (head, tail) pair of a fixed relation.
struct Pair {
    int head = 0;
    int tail = 0;
    friend bool operator==(const Pair&, const Pair&) = default;
    friend auto operator<=>(const Pair&, const Pair&) = default;
};

struct AdjEntry {
    int neighbor = 0;
    int rel = 0;
    bool outgoing = false;  // true: this entity is the head of the triple
};

struct Vocab {
    std::vector<std::string> names;
    std::unordered_map<std::string, int> index;

    int intern(const std::string& name);
    std::optional<int> find(const std::string& name) const;
    const std::string& name(int id) const { return names.at(static_cast<size_t>(id)); }
    int size() const { return static_cast<int>(names.size()); }
};

struct IngestStats {
    size_t lines = 0;
    size_t triples = 0;
    size_t duplicates = 0;  // exact duplicate triples dropped
};

class KnowledgeGraph {
public:
    Vocab entities;
    Vocab relations;
    std::vector<Triple> triples;                 // background triples, deduplicated
    std::map<int, std::vector<Pair>> task_pairs; // few-shot relation id -> pairs
    IngestStats ingest;

    // Indices over the background triples only.
    const std::vector<int>& degree_index() const { return degree_; }
    const std::vector<std::vector<AdjEntry>>& adjacency() const { return adj_; }
    int degree(int entity) const { return degree_.at(static_cast<size_t>(entity)); }

    // Ingestion. Id assignment is first-appearance order, so two parses of
    // the same files produce identical graphs.
    void add_background_tsv(const std::filesystem::path& path);
    void add_task_json(const std::filesystem::path& path);
    void rebuild_indices();

    std::vector<Pair> pairs_of_relation(int rel) const;  // task pairs or background pairs
    bool has_background_triple(int h, int r, int t) const;

    std::string to_tsv() const;  // background triples, canonical form
    void log_ingest(std::ostream& os) const;

private:
    std::vector<int> degree_;
    std::vector<std::vector<AdjEntry>> adj_;
    std::vector<Triple> sorted_triples_;  // for has_background_triple lookups
};

enum class TripleFormat { BackgroundTsv, TaskJson };

// Parse one file into a fresh graph. TSV lines are head<TAB>relation<TAB>tail;
// task JSON is {relation: [[h, r, t], ...]} with r equal to the key.
KnowledgeGraph parse_triples(const std::filesystem::path& path, TripleFormat format);

// Vertex set of the largest component of the background graph viewed as
// undirected and unlabeled. Ties by smallest minimum entity id. Sorted.
std::vector<int> largest_connected_component(const KnowledgeGraph& g);

struct DegreeStats {
    int median_degree = 0;  // lower median for even counts
    int max_degree = 0;
    int max_degree_entity = 0;
    double max_degree_fraction = 0.0;  // |distinct neighbors of argmax| / |entities|
    std::vector<std::pair<int, int>> top_k;  // (entity, degree), non-increasing
};

DegreeStats degree_stats(const KnowledgeGraph& g, int k);

// "concept:athlete:jordan" -> "athlete"; anything without a non-empty second
// colon field -> "unknown".
std::string entity_type_of(const std::string& identifier);

struct EntityTypeTable {
    std::vector<std::string> type_of;  // indexed by entity id

    static EntityTypeTable from_graph(const KnowledgeGraph& g);
    const std::string& type(int entity) const { return type_of.at(static_cast<size_t>(entity)); }
};

}  // namespace fewkg
