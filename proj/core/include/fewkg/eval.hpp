#pragma once
// Ranking metrics over candidate sets, task-list evaluation, the synthetic
// null-relation probe, support-frequency correlation, and the pattern
// witnessability checker.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "fewkg/kg.hpp"
#include "fewkg/model.hpp"
#include "fewkg/nullmodels.hpp"
#include "fewkg/taskgen.hpp"

namespace fewkg {

// rank = 1 + |{j : s_j > s_true}| + |{j != true : s_j = s_true, j < true}|;
// candidates are listed in ascending entity id, so the tie-break is by id.
int rank_query(const std::vector<double>& scores, size_t true_index);

struct Metrics {
    double mrr = 0.0;
    double hits1 = 0.0;
    double hits5 = 0.0;
    double hits10 = 0.0;
};
Metrics metrics_from_ranks(const std::vector<int>& ranks);

struct RelationResult {
    std::string relation;
    int k = 0;  // support size
    Metrics metrics;
    int n_queries = 0;
};

struct EvalReport {
    std::vector<RelationResult> per_relation;
    Metrics aggregate;  // unweighted mean over relations
    int n_relations = 0;
    std::string variant;
    std::string dataset;
    std::string checkpoint_id;
    uint64_t seed = 0;
    uint64_t config_hash = 0;
};

// Per relation: r from the relation learner, one update step on the support
// loss, then every query's candidates scored by -distance. Tasks sharing a
// relation pool their queries into one row; aggregate is the unweighted mean
// over rows. `names`, when given, labels task i (defaults to the vocabulary
// name, or the bare id without a graph).
EvalReport evaluate(const ModelState& s, const std::vector<FewShotTask>& tasks,
                    const HyperParams& hp, uint64_t seed,
                    const KnowledgeGraph* g = nullptr,
                    const std::vector<std::string>* names = nullptr);

// "MRR 0.294, Hits@10 0.464, Hits@5 0.398, Hits@1 0.201"
std::string format_row(const Metrics& m);

std::string eval_report_json(const EvalReport& r);
// One row per relation; leading comment line carries config hash and seed.
std::string eval_report_csv(const EvalReport& r);

struct ProbeReport {
    EvalReport eval;  // one row per synthetic relation
    // pattern name -> mean Hits@10 over that pattern's relations
    std::map<std::string, double> hits10_by_pattern;
};

// K-shot tasks built from each synthetic relation (seeded support draw,
// remaining edges as queries, candidates = the whole component, optionally
// capped), evaluated and grouped by pattern.
ProbeReport probe_null_tasks(const ModelState& s, const std::vector<SyntheticRelation>& synth,
                             const std::vector<int>& lcc, int k, uint64_t seed,
                             const HyperParams& hp, const KnowledgeGraph* g = nullptr,
                             int candidate_cap = 0);
std::string probe_report_json(const ProbeReport& r);
std::string probe_report_csv(const ProbeReport& r);

double pearson(const std::vector<double>& x, const std::vector<double>& y);

// Mean of ln(1 + degree) over the given degrees.
double log_frequency_feature(const std::vector<double>& degrees);
// The same over all support heads and tails, degrees from the background graph.
double support_frequency_feature(const KnowledgeGraph& g, const FewShotTask& task);

struct CorrelationPoint {
    std::string relation;
    double x = 0.0;  // mean ln(1 + degree) over support entities
    double y = 0.0;  // relation MRR
};
struct CorrelationReport {
    std::vector<CorrelationPoint> points;
    double r = 0.0;
    int n = 0;
    uint64_t config_hash = 0;
    uint64_t seed = 0;
};
CorrelationReport correlate(const std::vector<CorrelationPoint>& points);
std::string correlation_csv(const CorrelationReport& r);
std::string correlation_json(const CorrelationReport& r);

struct WitnessVerdict {
    Pattern pattern = Pattern::Symmetric;
    bool witnessed = false;
    std::vector<Pair> witnessing_triples;
};

// Symmetry: some a != b with (a,b) and (b,a) both present. Transitivity:
// some a, b, c with (a,b), (b,c), (a,c) all present (literal membership).
// Returns the first witness in support order.
WitnessVerdict witness_check(const std::vector<Pair>& support, Pattern pattern);

// Smallest K admitting a witnessed support: 2 for Symmetry, 3 for Transitivity.
int min_witness_k(Pattern pattern);

}  // namespace fewkg
