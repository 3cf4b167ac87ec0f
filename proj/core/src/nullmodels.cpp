#include "fewkg/nullmodels.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "fewkg/rng.hpp"
#include "fewkg/util.hpp"

namespace fewkg {

std::string pattern_name(Pattern p) {
    switch (p) {
        case Pattern::Symmetric: return "symmetric";
        case Pattern::Transitive: return "transitive";
        case Pattern::Positional: return "positional";
    }
    throw std::logic_error("pattern_name: bad enum value");
}

Pattern pattern_from_name(const std::string& name) {
    if (name == "symmetric") return Pattern::Symmetric;
    if (name == "transitive") return Pattern::Transitive;
    if (name == "positional") return Pattern::Positional;
    throw std::runtime_error("unknown pattern \"" + name +
                             "\" (expected symmetric, transitive, or positional)");
}

SyntheticRelation gen_symmetric(const std::vector<int>& lcc, int n, uint64_t seed,
                                int index) {
    if (lcc.size() < 2)
        throw std::runtime_error("gen_symmetric: component has " +
                                 std::to_string(lcc.size()) + " entities, needs at least 2");
    if (n < 1) throw std::invalid_argument("gen_symmetric: N must be >= 1");
    SyntheticRelation rel;
    rel.name = "null_sym_" + std::to_string(index);
    rel.pattern = Pattern::Symmetric;
    rel.seed = seed;
    rel.n = n;
    Rng rng(derive_seed(seed, "null_sym"));
    for (int i = 0; i < n; ++i) {
        const auto idx = rng.sample_distinct(lcc.size(), 2);
        const int a = lcc[idx[0]];
        const int b = lcc[idx[1]];
        rel.pairs.push_back({a, b});
        rel.pairs.push_back({b, a});
    }
    return rel;
}

SyntheticRelation gen_transitive(const std::vector<int>& lcc, int n, uint64_t seed,
                                 int index) {
    if (lcc.size() < 3)
        throw std::runtime_error("gen_transitive: component has " +
                                 std::to_string(lcc.size()) + " entities, needs at least 3");
    if (n < 1) throw std::invalid_argument("gen_transitive: N must be >= 1");
    SyntheticRelation rel;
    rel.name = "null_trans_" + std::to_string(index);
    rel.pattern = Pattern::Transitive;
    rel.seed = seed;
    rel.n = n;
    Rng rng(derive_seed(seed, "null_trans"));
    for (int i = 0; i < n; ++i) {
        const auto idx = rng.sample_distinct(lcc.size(), 3);
        const int e1 = lcc[idx[0]];
        const int e2 = lcc[idx[1]];
        const int e3 = lcc[idx[2]];
        rel.pairs.push_back({e1, e2});
        rel.pairs.push_back({e2, e3});
        rel.pairs.push_back({e1, e3});
    }
    return rel;
}

SyntheticRelation gen_positional(const CommunityPartition& partition, int n,
                                 uint64_t seed, int index) {
    if (n < 1) throw std::invalid_argument("gen_positional: N must be >= 1");
    std::vector<const std::vector<int>*> eligible;
    for (const auto& c : partition.communities)
        if (c.size() >= 2) eligible.push_back(&c);
    if (eligible.empty())
        throw std::runtime_error("gen_positional: no community with at least two members");
    SyntheticRelation rel;
    rel.name = "null_pos_" + std::to_string(index);
    rel.pattern = Pattern::Positional;
    rel.seed = seed;
    rel.n = n;
    rel.community_count = static_cast<int>(partition.communities.size());
    Rng rng(derive_seed(seed, "null_pos"));
    for (int i = 0; i < n; ++i) {
        const auto& members = *eligible[rng.next_below(eligible.size())];
        const auto idx = rng.sample_distinct(members.size(), 2);
        rel.pairs.push_back({members[idx[0]], members[idx[1]]});
    }
    return rel;
}

// ---------------------------------------------------------------------------
// Louvain

namespace {

// Undirected weighted graph; self-loops tracked separately. Degrees follow
// the usual convention of a self-loop counting twice.
struct WeightedGraph {
    std::vector<std::map<int, double>> adj;  // node -> (other node -> weight)
    std::vector<double> self_w;
    std::vector<double> degree;
    double m2 = 0.0;  // total degree = 2m

    void finish_degrees() {
        const size_t n = adj.size();
        degree.assign(n, 0.0);
        m2 = 0.0;
        for (size_t u = 0; u < n; ++u) {
            double k = 2.0 * self_w[u];
            for (const auto& [v, w] : adj[u]) k += w;
            degree[u] = k;
            m2 += k;
        }
    }
};

WeightedGraph collapse_component(const KnowledgeGraph& g, const std::vector<int>& lcc) {
    WeightedGraph w;
    const size_t n = lcc.size();
    w.adj.resize(n);
    w.self_w.assign(n, 0.0);
    std::unordered_map<int, int> node_of;
    node_of.reserve(n);
    for (size_t i = 0; i < n; ++i) node_of[lcc[i]] = static_cast<int>(i);
    for (const Triple& t : g.triples) {
        const auto hi = node_of.find(t.head);
        const auto ti = node_of.find(t.tail);
        if (hi == node_of.end() || ti == node_of.end()) continue;
        if (hi->second == ti->second) {
            w.self_w[static_cast<size_t>(hi->second)] += 1.0;
        } else {
            w.adj[static_cast<size_t>(hi->second)][ti->second] += 1.0;
            w.adj[static_cast<size_t>(ti->second)][hi->second] += 1.0;
        }
    }
    w.finish_degrees();
    return w;
}

// One pass of local moving, ascending node order, until a full sweep moves
// nothing. Returns whether any node moved at all.
bool local_moving(const WeightedGraph& g, std::vector<int>& comm) {
    const size_t n = g.adj.size();
    std::vector<double> tot(n, 0.0);
    for (size_t u = 0; u < n; ++u) tot[static_cast<size_t>(comm[u])] += g.degree[u];

    bool moved_any = false;
    bool sweep_moved = true;
    while (sweep_moved) {
        sweep_moved = false;
        for (size_t u = 0; u < n; ++u) {
            const int old_c = comm[u];
            tot[static_cast<size_t>(old_c)] -= g.degree[u];

            std::map<int, double> kin;
            kin.try_emplace(old_c, 0.0);
            for (const auto& [v, w] : g.adj[u]) kin[comm[static_cast<size_t>(v)]] += w;

            // Gain of inserting the isolated node into community c.
            auto gain = [&](int c, double k_in) {
                return (2.0 / g.m2) *
                       (k_in - g.degree[u] * tot[static_cast<size_t>(c)] / g.m2);
            };
            int best = old_c;
            double best_gain = gain(old_c, kin.at(old_c));
            for (const auto& [c, k_in] : kin) {
                const double gn = gain(c, k_in);
                if (gn > best_gain + 1e-9) {  // ascending c, so ties keep the smaller id
                    best = c;
                    best_gain = gn;
                }
            }
            if (best != old_c) {
                comm[u] = best;
                moved_any = true;
                sweep_moved = true;
            }
            tot[static_cast<size_t>(comm[u])] += g.degree[u];
        }
    }
    return moved_any;
}

// Collapse communities to nodes; labels renumbered by ascending old label.
WeightedGraph aggregate(const WeightedGraph& g, const std::vector<int>& comm,
                        std::vector<int>& new_id_of_label) {
    std::vector<int> labels(comm.begin(), comm.end());
    std::sort(labels.begin(), labels.end());
    labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
    new_id_of_label.assign(g.adj.size(), -1);
    for (size_t i = 0; i < labels.size(); ++i)
        new_id_of_label[static_cast<size_t>(labels[i])] = static_cast<int>(i);

    WeightedGraph out;
    out.adj.resize(labels.size());
    out.self_w.assign(labels.size(), 0.0);
    for (size_t u = 0; u < g.adj.size(); ++u) {
        const int cu = new_id_of_label[static_cast<size_t>(comm[u])];
        out.self_w[static_cast<size_t>(cu)] += g.self_w[u];
        for (const auto& [v, w] : g.adj[u]) {
            if (static_cast<size_t>(v) < u) continue;  // each undirected edge once
            const int cv = new_id_of_label[static_cast<size_t>(comm[static_cast<size_t>(v)])];
            if (cu == cv) {
                out.self_w[static_cast<size_t>(cu)] += w;
            } else {
                out.adj[static_cast<size_t>(cu)][cv] += w;
                out.adj[static_cast<size_t>(cv)][cu] += w;
            }
        }
    }
    out.finish_degrees();
    return out;
}

}  // namespace

CommunityPartition louvain(const KnowledgeGraph& g, const std::vector<int>& lcc) {
    if (lcc.empty()) throw std::runtime_error("louvain: empty component");
    WeightedGraph cur = collapse_component(g, lcc);
    if (cur.m2 <= 0.0)
        throw std::runtime_error("louvain: component has no edges");

    // Original node -> node at the current aggregation level.
    std::vector<int> top(lcc.size());
    std::iota(top.begin(), top.end(), 0);

    while (true) {
        std::vector<int> comm(cur.adj.size());
        std::iota(comm.begin(), comm.end(), 0);
        if (!local_moving(cur, comm)) break;
        std::vector<int> new_id;
        cur = aggregate(cur, comm, new_id);
        for (int& t : top)
            t = new_id[static_cast<size_t>(comm[static_cast<size_t>(t)])];
    }

    // Group entities by final node; order communities by smallest member.
    std::map<int, std::vector<int>> groups;
    for (size_t i = 0; i < lcc.size(); ++i)
        groups[top[i]].push_back(lcc[i]);  // lcc ascending, so members ascending
    std::vector<std::vector<int>> communities;
    communities.reserve(groups.size());
    for (auto& [label, members] : groups) communities.push_back(std::move(members));
    std::sort(communities.begin(), communities.end(),
              [](const auto& a, const auto& b) { return a.front() < b.front(); });

    CommunityPartition part;
    part.assignment.assign(static_cast<size_t>(g.entities.size()), -1);
    for (size_t c = 0; c < communities.size(); ++c)
        for (int e : communities[c]) part.assignment[static_cast<size_t>(e)] = static_cast<int>(c);
    part.communities = std::move(communities);

    // Final modularity from the top-level collapsed graph (each node is one
    // community): Q = sum_c [ 2*self_w/m2 - (degree/m2)^2 ].
    double q = 0.0;
    for (size_t c = 0; c < cur.adj.size(); ++c) {
        const double frac = cur.degree[c] / cur.m2;
        q += 2.0 * cur.self_w[c] / cur.m2 - frac * frac;
    }
    part.modularity = q;
    return part;
}

double modularity(const KnowledgeGraph& g, const std::vector<int>& lcc,
                  const std::vector<int>& assignment) {
    if (assignment.size() != static_cast<size_t>(g.entities.size()))
        throw std::invalid_argument("modularity: assignment must cover every entity id");
    std::unordered_map<int, char> in_lcc;
    in_lcc.reserve(lcc.size());
    int max_comm = -1;
    for (int e : lcc) {
        if (assignment[static_cast<size_t>(e)] < 0)
            throw std::invalid_argument("modularity: component entity " + std::to_string(e) +
                                        " has no community");
        max_comm = std::max(max_comm, assignment[static_cast<size_t>(e)]);
        in_lcc.emplace(e, 1);
    }

    std::vector<double> in_c(static_cast<size_t>(max_comm) + 1, 0.0);
    std::vector<double> deg_c(static_cast<size_t>(max_comm) + 1, 0.0);
    double m2 = 0.0;
    for (const Triple& t : g.triples) {
        if (!in_lcc.count(t.head) || !in_lcc.count(t.tail)) continue;
        const int ch = assignment[static_cast<size_t>(t.head)];
        const int ct = assignment[static_cast<size_t>(t.tail)];
        if (t.head == t.tail) {
            deg_c[static_cast<size_t>(ch)] += 2.0;
            in_c[static_cast<size_t>(ch)] += 2.0;
            m2 += 2.0;
        } else {
            deg_c[static_cast<size_t>(ch)] += 1.0;
            deg_c[static_cast<size_t>(ct)] += 1.0;
            m2 += 2.0;
            if (ch == ct) in_c[static_cast<size_t>(ch)] += 2.0;
        }
    }
    if (m2 <= 0.0) throw std::runtime_error("modularity: component has no edges");

    double q = 0.0;
    for (size_t c = 0; c < in_c.size(); ++c) {
        const double frac = deg_c[c] / m2;
        q += in_c[c] / m2 - frac * frac;
    }
    return q;
}

// ---------------------------------------------------------------------------
// Serialization

std::string synthetic_to_task_json(const std::vector<SyntheticRelation>& rels,
                                   const KnowledgeGraph& g) {
    nlohmann::json j = nlohmann::json::object();
    for (const SyntheticRelation& rel : rels) {
        nlohmann::json arr = nlohmann::json::array();
        for (const Pair& p : rel.pairs)
            arr.push_back({g.entities.name(p.head), rel.name, g.entities.name(p.tail)});
        j[rel.name] = std::move(arr);
    }
    return j.dump(2) + "\n";
}

std::string synthetic_provenance_json(const std::vector<SyntheticRelation>& rels,
                                      uint64_t config_hash, uint64_t seed) {
    nlohmann::json j;
    j["config"] = hex64(config_hash);
    j["seed"] = seed;
    nlohmann::json arr = nlohmann::json::array();
    for (const SyntheticRelation& rel : rels) {
        nlohmann::json r;
        r["name"] = rel.name;
        r["pattern"] = pattern_name(rel.pattern);
        r["seed"] = rel.seed;
        r["n"] = rel.n;
        if (rel.pattern == Pattern::Positional) r["community_count"] = rel.community_count;
        arr.push_back(std::move(r));
    }
    j["relations"] = std::move(arr);
    return j.dump(2) + "\n";
}

std::vector<SyntheticRelation> synthetic_from_task_json(const std::string& task_json,
                                                        const std::string& provenance_json,
                                                        const KnowledgeGraph& g) {
    const nlohmann::json tasks = nlohmann::json::parse(task_json);
    const nlohmann::json prov = nlohmann::json::parse(provenance_json);

    std::vector<SyntheticRelation> out;
    for (const auto& r : prov.at("relations")) {
        SyntheticRelation rel;
        rel.name = r.at("name").get<std::string>();
        rel.pattern = pattern_from_name(r.at("pattern").get<std::string>());
        rel.seed = r.at("seed").get<uint64_t>();
        rel.n = r.at("n").get<int>();
        if (r.contains("community_count"))
            rel.community_count = r.at("community_count").get<int>();

        if (!tasks.contains(rel.name))
            throw std::runtime_error("synthetic tasks: relation \"" + rel.name +
                                     "\" from the provenance file is missing");
        for (const auto& triple : tasks.at(rel.name)) {
            if (!triple.is_array() || triple.size() != 3)
                throw std::runtime_error("synthetic tasks: relation \"" + rel.name +
                                         "\" has a malformed triple");
            if (triple.at(1).get<std::string>() != rel.name)
                throw std::runtime_error("synthetic tasks: triple relation \"" +
                                         triple.at(1).get<std::string>() +
                                         "\" disagrees with its key \"" + rel.name + "\"");
            const auto h = g.entities.find(triple.at(0).get<std::string>());
            const auto t = g.entities.find(triple.at(2).get<std::string>());
            if (!h || !t)
                throw std::runtime_error("synthetic tasks: unknown entity in relation \"" +
                                         rel.name + "\"");
            rel.pairs.push_back({*h, *t});
        }
        out.push_back(std::move(rel));
    }
    return out;
}

std::string partition_to_json(const CommunityPartition& p, const KnowledgeGraph& g,
                              uint64_t config_hash, uint64_t seed) {
    nlohmann::json j;
    j["config"] = hex64(config_hash);
    j["seed"] = seed;
    j["modularity"] = p.modularity;
    j["community_count"] = p.communities.size();
    nlohmann::json assign = nlohmann::json::object();
    for (size_t e = 0; e < p.assignment.size(); ++e)
        if (p.assignment[e] >= 0)
            assign[g.entities.name(static_cast<int>(e))] = p.assignment[e];
    j["assignment"] = std::move(assign);
    return j.dump(2) + "\n";
}

}  // namespace fewkg
