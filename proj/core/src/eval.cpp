#include "fewkg/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "fewkg/rng.hpp"
#include "fewkg/util.hpp"

namespace fewkg {

int rank_query(const std::vector<double>& scores, size_t true_index) {
    if (true_index >= scores.size())
        throw std::invalid_argument("rank_query: true index " + std::to_string(true_index) +
                                    " is outside the score list (" +
                                    std::to_string(scores.size()) + ")");
    const double s_true = scores[true_index];
    if (!std::isfinite(s_true))
        throw std::runtime_error("rank_query: non-finite score for the true candidate");
    int rank = 1;
    for (size_t j = 0; j < scores.size(); ++j) {
        if (!std::isfinite(scores[j]))
            throw std::runtime_error("rank_query: non-finite score at index " +
                                     std::to_string(j));
        if (scores[j] > s_true) ++rank;
        else if (scores[j] == s_true && j < true_index) ++rank;
    }
    return rank;
}

Metrics metrics_from_ranks(const std::vector<int>& ranks) {
    if (ranks.empty()) throw std::invalid_argument("metrics_from_ranks: no ranks");
    Metrics m;
    for (int r : ranks) {
        if (r < 1) throw std::invalid_argument("metrics_from_ranks: rank below 1");
        m.mrr += 1.0 / r;
        if (r <= 1) m.hits1 += 1.0;
        if (r <= 5) m.hits5 += 1.0;
        if (r <= 10) m.hits10 += 1.0;
    }
    const double inv = 1.0 / static_cast<double>(ranks.size());
    m.mrr *= inv;
    m.hits1 *= inv;
    m.hits5 *= inv;
    m.hits10 *= inv;
    return m;
}

EvalReport evaluate(const ModelState& s, const std::vector<FewShotTask>& tasks,
                    const HyperParams& hp, uint64_t seed, const KnowledgeGraph* g,
                    const std::vector<std::string>* names) {
    if (tasks.empty()) throw std::invalid_argument("evaluate: no tasks");
    if (names && names->size() != tasks.size())
        throw std::invalid_argument("evaluate: " + std::to_string(names->size()) +
                                    " names for " + std::to_string(tasks.size()) + " tasks");

    // Rows keyed by relation id, in first-appearance order; tasks of the same
    // relation pool their query ranks.
    std::vector<RelationResult> rows;
    std::vector<std::vector<int>> pooled_ranks;
    std::map<int, size_t> row_of;

    for (size_t i = 0; i < tasks.size(); ++i) {
        const FewShotTask& task = tasks[i];
        const uint64_t rel_bits = static_cast<uint64_t>(task.relation);
        const EncoderContext ctx{g, &hp, derive_seed(seed, "eval_enc", rel_bits, i)};

        Vec r = relation_embed(s, task, ctx);
        Vec r_prime = support_gradient_step(s, task, r, hp.eta,
                                            derive_seed(seed, "eval_neg", rel_bits, i),
                                            hp, ctx);

        std::map<int, Vec> enc;
        auto encoded = [&](int e) -> const Vec& {
            auto it = enc.find(e);
            if (it == enc.end()) it = enc.emplace(e, encode_entity(s, e, ctx)).first;
            return it->second;
        };

        std::vector<int> ranks;
        ranks.reserve(task.queries.size());
        std::vector<double> scores(task.candidates.size());
        for (const Pair& q : task.queries) {
            const Vec& h = encoded(q.head);
            for (size_t j = 0; j < task.candidates.size(); ++j)
                scores[j] = -transe_distance(h, r_prime, encoded(task.candidates[j]), hp.norm);
            const auto lo = std::lower_bound(task.candidates.begin(), task.candidates.end(),
                                             q.tail);
            if (lo == task.candidates.end() || *lo != q.tail)
                throw std::runtime_error("evaluate: true tail " + std::to_string(q.tail) +
                                         " missing from the candidate set of relation " +
                                         std::to_string(task.relation));
            ranks.push_back(rank_query(scores, static_cast<size_t>(lo - task.candidates.begin())));
        }

        const auto it = row_of.find(task.relation);
        if (it == row_of.end()) {
            row_of.emplace(task.relation, rows.size());
            RelationResult row;
            if (names) {
                row.relation = (*names)[i];
            } else if (g && task.relation >= 0 && task.relation < g->relations.size()) {
                row.relation = g->relations.name(task.relation);
            } else {
                row.relation = std::to_string(task.relation);
            }
            row.k = static_cast<int>(task.support.size());
            rows.push_back(std::move(row));
            pooled_ranks.emplace_back();
        }
        auto& pool = pooled_ranks[row_of.at(task.relation)];
        pool.insert(pool.end(), ranks.begin(), ranks.end());
    }

    EvalReport report;
    for (size_t r = 0; r < rows.size(); ++r) {
        rows[r].metrics = metrics_from_ranks(pooled_ranks[r]);
        rows[r].n_queries = static_cast<int>(pooled_ranks[r].size());
        report.aggregate.mrr += rows[r].metrics.mrr;
        report.aggregate.hits1 += rows[r].metrics.hits1;
        report.aggregate.hits5 += rows[r].metrics.hits5;
        report.aggregate.hits10 += rows[r].metrics.hits10;
    }
    const double inv = 1.0 / static_cast<double>(rows.size());
    report.aggregate.mrr *= inv;
    report.aggregate.hits1 *= inv;
    report.aggregate.hits5 *= inv;
    report.aggregate.hits10 *= inv;
    report.per_relation = std::move(rows);
    report.n_relations = static_cast<int>(report.per_relation.size());
    report.variant = variant_name(s.variant);
    report.seed = seed;
    return report;
}

std::string format_row(const Metrics& m) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "MRR %.3f, Hits@10 %.3f, Hits@5 %.3f, Hits@1 %.3f",
                  m.mrr, m.hits10, m.hits5, m.hits1);
    return buf;
}

namespace {

nlohmann::json metrics_json(const Metrics& m) {
    nlohmann::json j;
    j["mrr"] = m.mrr;
    j["hits@1"] = m.hits1;
    j["hits@5"] = m.hits5;
    j["hits@10"] = m.hits10;
    return j;
}

nlohmann::json report_body(const EvalReport& r) {
    nlohmann::json j;
    j["config"] = hex64(r.config_hash);
    j["seed"] = r.seed;
    j["variant"] = r.variant;
    j["dataset"] = r.dataset;
    j["checkpoint"] = r.checkpoint_id;
    j["n_relations"] = r.n_relations;
    j["aggregate"] = metrics_json(r.aggregate);
    nlohmann::json rows = nlohmann::json::array();
    for (const RelationResult& row : r.per_relation) {
        nlohmann::json jr = metrics_json(row.metrics);
        jr["relation"] = row.relation;
        jr["k"] = row.k;
        jr["n_queries"] = row.n_queries;
        rows.push_back(std::move(jr));
    }
    j["per_relation"] = std::move(rows);
    return j;
}

std::string csv_header(uint64_t config_hash, uint64_t seed) {
    return "# config=" + hex64(config_hash) + " seed=" + std::to_string(seed) + "\n";
}

void append_relation_rows(std::string& out, const EvalReport& r) {
    out += "relation,k,n_queries,mrr,hits@1,hits@5,hits@10\n";
    for (const RelationResult& row : r.per_relation) {
        out += row.relation + "," + std::to_string(row.k) + "," +
               std::to_string(row.n_queries) + "," + fmt_double(row.metrics.mrr) + "," +
               fmt_double(row.metrics.hits1) + "," + fmt_double(row.metrics.hits5) + "," +
               fmt_double(row.metrics.hits10) + "\n";
    }
}

}  // namespace

std::string eval_report_json(const EvalReport& r) {
    return report_body(r).dump(2) + "\n";
}

std::string eval_report_csv(const EvalReport& r) {
    std::string out = csv_header(r.config_hash, r.seed);
    append_relation_rows(out, r);
    return out;
}

ProbeReport probe_null_tasks(const ModelState& s, const std::vector<SyntheticRelation>& synth,
                             const std::vector<int>& lcc, int k, uint64_t seed,
                             const HyperParams& hp, const KnowledgeGraph* g,
                             int candidate_cap) {
    if (synth.empty()) throw std::invalid_argument("probe_null_tasks: no synthetic relations");
    std::vector<FewShotTask> tasks;
    std::vector<std::string> names;
    tasks.reserve(synth.size());
    for (size_t i = 0; i < synth.size(); ++i) {
        // Surrogate ids below the vocabulary range keep synthetic relations
        // distinct from real ones.
        const int rel_id = -static_cast<int>(i) - 1;
        FewShotTask task = build_task_from_pairs(synth[i].pairs, rel_id, k, kAllRemaining,
                                                 derive_seed(seed, "probe", i), lcc);
        cap_candidates(task, candidate_cap);
        tasks.push_back(std::move(task));
        names.push_back(synth[i].name);
    }

    ProbeReport report;
    report.eval = evaluate(s, tasks, hp, seed, g, &names);
    report.eval.dataset = "synthetic-null";

    std::map<std::string, double> sums;
    std::map<std::string, int> counts;
    for (size_t i = 0; i < synth.size(); ++i) {
        const std::string p = pattern_name(synth[i].pattern);
        sums[p] += report.eval.per_relation[i].metrics.hits10;
        counts[p] += 1;
    }
    for (const auto& [p, total] : sums) report.hits10_by_pattern[p] = total / counts.at(p);
    return report;
}

std::string probe_report_json(const ProbeReport& r) {
    nlohmann::json j = report_body(r.eval);
    j["hits@10_by_pattern"] = r.hits10_by_pattern;
    return j.dump(2) + "\n";
}

std::string probe_report_csv(const ProbeReport& r) {
    std::string out = csv_header(r.eval.config_hash, r.eval.seed);
    out += "pattern,hits@10\n";
    for (const auto& [p, h] : r.hits10_by_pattern) out += p + "," + fmt_double(h) + "\n";
    append_relation_rows(out, r.eval);
    return out;
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size())
        throw std::invalid_argument("pearson: length mismatch (" + std::to_string(x.size()) +
                                    " vs " + std::to_string(y.size()) + ")");
    if (x.size() < 2) throw std::invalid_argument("pearson: needs at least two points");
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0)
        throw std::runtime_error("pearson: correlation undefined for a constant sequence");
    return sxy / std::sqrt(sxx * syy);
}

double log_frequency_feature(const std::vector<double>& degrees) {
    if (degrees.empty()) throw std::invalid_argument("log_frequency_feature: no degrees");
    double total = 0.0;
    for (double d : degrees) {
        if (d < 0.0) throw std::invalid_argument("log_frequency_feature: negative degree");
        total += std::log1p(d);
    }
    return total / static_cast<double>(degrees.size());
}

double support_frequency_feature(const KnowledgeGraph& g, const FewShotTask& task) {
    if (task.support.empty())
        throw std::invalid_argument("support_frequency_feature: empty support");
    std::vector<double> degrees;
    degrees.reserve(task.support.size() * 2);
    for (const Pair& p : task.support) {
        degrees.push_back(static_cast<double>(g.degree(p.head)));
        degrees.push_back(static_cast<double>(g.degree(p.tail)));
    }
    return log_frequency_feature(degrees);
}

CorrelationReport correlate(const std::vector<CorrelationPoint>& points) {
    CorrelationReport report;
    report.points = points;
    report.n = static_cast<int>(points.size());
    std::vector<double> x, y;
    x.reserve(points.size());
    y.reserve(points.size());
    for (const CorrelationPoint& p : points) {
        x.push_back(p.x);
        y.push_back(p.y);
    }
    report.r = pearson(x, y);
    return report;
}

std::string correlation_csv(const CorrelationReport& r) {
    std::string out = csv_header(r.config_hash, r.seed);
    out += "relation,support_log_freq,mrr\n";
    for (const CorrelationPoint& p : r.points)
        out += p.relation + "," + fmt_double(p.x) + "," + fmt_double(p.y) + "\n";
    return out;
}

std::string correlation_json(const CorrelationReport& r) {
    nlohmann::json j;
    j["config"] = hex64(r.config_hash);
    j["seed"] = r.seed;
    j["r"] = r.r;
    j["n"] = r.n;
    nlohmann::json pts = nlohmann::json::array();
    for (const CorrelationPoint& p : r.points) {
        nlohmann::json jp;
        jp["relation"] = p.relation;
        jp["support_log_freq"] = p.x;
        jp["mrr"] = p.y;
        pts.push_back(std::move(jp));
    }
    j["points"] = std::move(pts);
    return j.dump(2) + "\n";
}

WitnessVerdict witness_check(const std::vector<Pair>& support, Pattern pattern) {
    WitnessVerdict v;
    v.pattern = pattern;
    switch (pattern) {
        case Pattern::Symmetric: {
            // Self-loops are their own reversal and witness nothing.
            for (const Pair& p : support) {
                if (p.head == p.tail) continue;
                const Pair rev{p.tail, p.head};
                if (std::find(support.begin(), support.end(), rev) != support.end()) {
                    v.witnessed = true;
                    v.witnessing_triples = {p, rev};
                    return v;
                }
            }
            return v;
        }
        case Pattern::Transitive: {
            const std::set<Pair> members(support.begin(), support.end());
            for (const Pair& ab : support) {
                if (ab.head == ab.tail) continue;
                for (const Pair& bc : support) {
                    if (bc.head != ab.tail) continue;
                    if (bc.tail == bc.head || bc.tail == ab.head) continue;
                    const Pair ac{ab.head, bc.tail};
                    if (members.count(ac)) {
                        v.witnessed = true;
                        v.witnessing_triples = {ab, bc, ac};
                        return v;
                    }
                }
            }
            return v;
        }
        case Pattern::Positional:
            throw std::invalid_argument(
                "witness_check: positional structure is not witnessable from a support set");
    }
    throw std::logic_error("witness_check: bad enum value");
}

int min_witness_k(Pattern pattern) {
    switch (pattern) {
        case Pattern::Symmetric: return 2;
        case Pattern::Transitive: return 3;
        case Pattern::Positional:
            throw std::invalid_argument(
                "min_witness_k: positional structure is not witnessable from a support set");
    }
    throw std::logic_error("min_witness_k: bad enum value");
}

}  // namespace fewkg
