#include "fewkg/kg.hpp"

#include <algorithm>
#include <fstream>
#include <queue>
#include <set>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace fewkg {

int Vocab::intern(const std::string& name) {
    auto it = index.find(name);
    if (it != index.end()) return it->second;
    int id = static_cast<int>(names.size());
    names.push_back(name);
    index.emplace(name, id);
    return id;
}

std::optional<int> Vocab::find(const std::string& name) const {
    auto it = index.find(name);
    if (it == index.end()) return std::nullopt;
    return it->second;
}

void KnowledgeGraph::add_background_tsv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open file: " + path.string());

    std::set<Triple> seen(triples.begin(), triples.end());
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        size_t t1 = line.find('\t');
        size_t t2 = (t1 == std::string::npos) ? std::string::npos : line.find('\t', t1 + 1);
        size_t t3 = (t2 == std::string::npos) ? std::string::npos : line.find('\t', t2 + 1);
        if (t1 == std::string::npos || t2 == std::string::npos || t3 != std::string::npos) {
            throw std::runtime_error(path.string() + ":" + std::to_string(lineno) +
                                     ": expected 3 tab-separated fields");
        }
        ++ingest.lines;
        Triple t;
        t.head = entities.intern(line.substr(0, t1));
        t.rel = relations.intern(line.substr(t1 + 1, t2 - t1 - 1));
        t.tail = entities.intern(line.substr(t2 + 1));
        if (seen.insert(t).second) {
            triples.push_back(t);
            ++ingest.triples;
        } else {
            ++ingest.duplicates;
        }
    }
    rebuild_indices();
}

void KnowledgeGraph::add_task_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open file: " + path.string());
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(path.string() + ": " + e.what());
    }
    if (!doc.is_object())
        throw std::runtime_error(path.string() + ": task file must be a JSON object");

    for (const auto& [rel_name, arr] : doc.items()) {
        if (!arr.is_array())
            throw std::runtime_error(path.string() + ": value of \"" + rel_name +
                                     "\" must be an array of triples");
        int rel = relations.intern(rel_name);
        auto& pairs = task_pairs[rel];
        std::set<Pair> seen(pairs.begin(), pairs.end());
        for (const auto& item : arr) {
            if (!item.is_array() || item.size() != 3 || !item[0].is_string() ||
                !item[1].is_string() || !item[2].is_string()) {
                throw std::runtime_error(path.string() + ": triple of \"" + rel_name +
                                         "\" must be [head, relation, tail] strings");
            }
            if (item[1].get<std::string>() != rel_name) {
                throw std::runtime_error(path.string() + ": triple relation \"" +
                                         item[1].get<std::string>() +
                                         "\" disagrees with its key \"" + rel_name + "\"");
            }
            Pair p;
            p.head = entities.intern(item[0].get<std::string>());
            p.tail = entities.intern(item[2].get<std::string>());
            ++ingest.lines;
            if (seen.insert(p).second) {
                pairs.push_back(p);
                ++ingest.triples;
            } else {
                ++ingest.duplicates;
            }
        }
    }
    rebuild_indices();
}

void KnowledgeGraph::rebuild_indices() {
    const size_t n = static_cast<size_t>(entities.size());
    degree_.assign(n, 0);
    adj_.assign(n, {});
    for (const Triple& t : triples) {
        ++degree_[static_cast<size_t>(t.head)];
        ++degree_[static_cast<size_t>(t.tail)];
        adj_[static_cast<size_t>(t.head)].push_back({t.tail, t.rel, true});
        adj_[static_cast<size_t>(t.tail)].push_back({t.head, t.rel, false});
    }
    sorted_triples_ = triples;
    std::sort(sorted_triples_.begin(), sorted_triples_.end());
}

std::vector<Pair> KnowledgeGraph::pairs_of_relation(int rel) const {
    auto it = task_pairs.find(rel);
    if (it != task_pairs.end()) return it->second;
    std::vector<Pair> out;
    for (const Triple& t : triples)
        if (t.rel == rel) out.push_back({t.head, t.tail});
    return out;
}

bool KnowledgeGraph::has_background_triple(int h, int r, int t) const {
    return std::binary_search(sorted_triples_.begin(), sorted_triples_.end(),
                              Triple{h, r, t});
}

std::string KnowledgeGraph::to_tsv() const {
    std::string out;
    for (const Triple& t : triples) {
        out += entities.name(t.head);
        out += '\t';
        out += relations.name(t.rel);
        out += '\t';
        out += entities.name(t.tail);
        out += '\n';
    }
    return out;
}

void KnowledgeGraph::log_ingest(std::ostream& os) const {
    os << "ingest: entities=" << entities.size() << "\n";
    os << "ingest: relations=" << relations.size() << "\n";
    size_t task_triples = 0;
    for (const auto& [rel, pairs] : task_pairs) task_triples += pairs.size();
    os << "ingest: background_triples=" << triples.size() << "\n";
    os << "ingest: task_triples=" << task_triples << "\n";
    os << "ingest: duplicates_dropped=" << ingest.duplicates << "\n";
}

KnowledgeGraph parse_triples(const std::filesystem::path& path, TripleFormat format) {
    KnowledgeGraph g;
    if (format == TripleFormat::BackgroundTsv) {
        g.add_background_tsv(path);
    } else {
        g.add_task_json(path);
    }
    return g;
}

std::vector<int> largest_connected_component(const KnowledgeGraph& g) {
    const int n = g.entities.size();
    if (n == 0) return {};
    const auto& adj = g.adjacency();

    std::vector<int> comp(static_cast<size_t>(n), -1);
    int best_size = 0;
    int best_min_id = 0;
    int best_comp = -1;
    int num_comp = 0;
    for (int start = 0; start < n; ++start) {
        if (comp[static_cast<size_t>(start)] >= 0) continue;
        int id = num_comp++;
        int size = 0;
        std::queue<int> q;
        q.push(start);
        comp[static_cast<size_t>(start)] = id;
        while (!q.empty()) {
            int u = q.front();
            q.pop();
            ++size;
            for (const AdjEntry& e : adj[static_cast<size_t>(u)]) {
                if (comp[static_cast<size_t>(e.neighbor)] < 0) {
                    comp[static_cast<size_t>(e.neighbor)] = id;
                    q.push(e.neighbor);
                }
            }
        }
        // start is the minimum id of its component (ids scanned ascending).
        if (size > best_size || (size == best_size && start < best_min_id)) {
            best_size = size;
            best_min_id = start;
            best_comp = id;
        }
    }
    std::vector<int> out;
    out.reserve(static_cast<size_t>(best_size));
    for (int e = 0; e < n; ++e)
        if (comp[static_cast<size_t>(e)] == best_comp) out.push_back(e);
    return out;
}

DegreeStats degree_stats(const KnowledgeGraph& g, int k) {
    if (k < 1) throw std::invalid_argument("degree_stats: k must be >= 1");
    const int n = g.entities.size();
    if (n == 0) throw std::runtime_error("degree_stats: no entities");

    const auto& deg = g.degree_index();
    std::vector<int> sorted(deg.begin(), deg.end());
    std::sort(sorted.begin(), sorted.end());

    DegreeStats s;
    s.median_degree = sorted[static_cast<size_t>((n - 1) / 2)];  // lower median

    s.max_degree_entity = 0;
    s.max_degree = deg[0];
    for (int e = 1; e < n; ++e) {
        if (deg[static_cast<size_t>(e)] > s.max_degree) {
            s.max_degree = deg[static_cast<size_t>(e)];
            s.max_degree_entity = e;
        }
    }
    std::set<int> neighbors;
    for (const AdjEntry& e : g.adjacency()[static_cast<size_t>(s.max_degree_entity)])
        neighbors.insert(e.neighbor);
    s.max_degree_fraction = static_cast<double>(neighbors.size()) / static_cast<double>(n);

    std::vector<std::pair<int, int>> by_degree;  // (entity, degree)
    by_degree.reserve(static_cast<size_t>(n));
    for (int e = 0; e < n; ++e) by_degree.emplace_back(e, deg[static_cast<size_t>(e)]);
    std::sort(by_degree.begin(), by_degree.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    by_degree.resize(std::min<size_t>(by_degree.size(), static_cast<size_t>(k)));
    s.top_k = std::move(by_degree);
    return s;
}

std::string entity_type_of(const std::string& identifier) {
    size_t c1 = identifier.find(':');
    if (c1 == std::string::npos) return "unknown";
    size_t c2 = identifier.find(':', c1 + 1);
    std::string second = (c2 == std::string::npos)
                             ? identifier.substr(c1 + 1)
                             : identifier.substr(c1 + 1, c2 - c1 - 1);
    if (second.empty()) return "unknown";
    return second;
}

EntityTypeTable EntityTypeTable::from_graph(const KnowledgeGraph& g) {
    EntityTypeTable t;
    t.type_of.reserve(static_cast<size_t>(g.entities.size()));
    for (const std::string& name : g.entities.names)
        t.type_of.push_back(entity_type_of(name));
    return t;
}

}  // namespace fewkg
