// Operator surface: every experiment step (ingest, split, train, eval,
// gen-null, probe, analyze, stats, witness) as one subcommand over a flat
// JSON config with key=value overrides. Artifacts land under the configured
// output directory and embed the config hash and seed.

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "fewkg/config.hpp"
#include "fewkg/eval.hpp"
#include "fewkg/kg.hpp"
#include "fewkg/model.hpp"
#include "fewkg/nullmodels.hpp"
#include "fewkg/optim.hpp"
#include "fewkg/rng.hpp"
#include "fewkg/taskgen.hpp"
#include "fewkg/util.hpp"

namespace {

using namespace fewkg;
namespace fs = std::filesystem;

struct Common {
    std::string config_path;
    std::vector<std::string> overrides;
};

void add_config_options(CLI::App* cmd, Common& common) {
    cmd->add_option("--config", common.config_path, "JSON run configuration")
        ->required();
    cmd->allow_extras();  // trailing key=value pairs override config keys
}

RunConfig load(const Common& common, CLI::App* cmd) {
    Common c = common;
    for (const std::string& extra : cmd->remaining()) c.overrides.push_back(extra);
    return load_config(c.config_path, c.overrides);
}

KnowledgeGraph load_graph(const RunConfig& c) {
    if (c.background.empty())
        throw std::runtime_error("this command needs the background TSV; set \"background\"");
    KnowledgeGraph g;
    g.add_background_tsv(c.background);
    if (!c.train_tasks.empty()) g.add_task_json(c.train_tasks);
    if (!c.valid_tasks.empty()) g.add_task_json(c.valid_tasks);
    if (!c.test_tasks.empty()) g.add_task_json(c.test_tasks);
    return g;
}

std::vector<int> relations_in_task_file(const KnowledgeGraph& g, const std::string& path) {
    const nlohmann::json j = nlohmann::json::parse(read_file(path));
    std::vector<int> out;
    for (const auto& item : j.items()) {
        const auto id = g.relations.find(item.key());
        if (!id)
            throw std::runtime_error("relation \"" + item.key() + "\" from " + path +
                                     " is not in the loaded graph");
        out.push_back(*id);
    }
    std::sort(out.begin(), out.end());
    return out;
}

// Either a seeded split over all task relations (when split sizes are set) or
// the relation sets of the three task files as given.
RelationSplit resolve_split(const RunConfig& c, const KnowledgeGraph& g) {
    if (c.split_train + c.split_valid + c.split_test > 0) {
        std::vector<int> all;
        for (const auto& [rel, pairs] : g.task_pairs) all.push_back(rel);
        return split_relations(all, c.split_train, c.split_valid, c.split_test, c.seed);
    }
    RelationSplit s;
    if (!c.train_tasks.empty()) s.train = relations_in_task_file(g, c.train_tasks);
    if (!c.valid_tasks.empty()) s.valid = relations_in_task_file(g, c.valid_tasks);
    if (!c.test_tasks.empty()) s.test = relations_in_task_file(g, c.test_tasks);
    return s;
}

fs::path ensure_out_dir(const RunConfig& c) {
    const fs::path out = c.resolved_out_dir();
    fs::create_directories(out);
    return out;
}

fs::path default_checkpoint(const fs::path& out) {
    const fs::path best = out / "checkpoint_best.bin";
    if (fs::exists(best)) return best;
    const fs::path final_ck = out / "checkpoint_final.bin";
    if (fs::exists(final_ck)) return final_ck;
    throw std::runtime_error("no checkpoint under " + out.string() + "; pass --checkpoint");
}

Pattern cli_pattern(std::string name) {
    if (name == "symmetry") name = "symmetric";
    if (name == "transitivity") name = "transitive";
    return pattern_from_name(name);
}

const std::vector<int>& split_part(const RelationSplit& s, const std::string& which) {
    if (which == "train") return s.train;
    if (which == "valid") return s.valid;
    if (which == "test") return s.test;
    throw std::runtime_error("--split must be train, valid, or test; got \"" + which + "\"");
}

// Tasks for evaluation: `draws` independent support draws per relation, the
// remaining pairs as queries each time.
std::vector<FewShotTask> eval_tasks(const KnowledgeGraph& g, const EntityTypeTable& types,
                                    const std::vector<int>& relations, int k, int draws,
                                    uint64_t seed, int candidate_cap) {
    if (relations.empty()) throw std::runtime_error("no relations in the selected split");
    std::vector<FewShotTask> tasks;
    tasks.reserve(relations.size() * static_cast<size_t>(draws));
    for (int rel : relations) {
        for (int draw = 0; draw < draws; ++draw) {
            FewShotTask t = build_task(g, types, rel, k, kAllRemaining,
                                       derive_seed(seed, "eval_task",
                                                   static_cast<uint64_t>(rel),
                                                   static_cast<uint64_t>(draw)));
            cap_candidates(t, candidate_cap);
            tasks.push_back(std::move(t));
        }
    }
    return tasks;
}

int median_pair_count(const KnowledgeGraph& g, const std::vector<int>& rels) {
    std::vector<size_t> counts;
    counts.reserve(rels.size());
    for (int rel : rels) counts.push_back(g.pairs_of_relation(rel).size());
    std::sort(counts.begin(), counts.end());
    return static_cast<int>(counts[(counts.size() - 1) / 2]);  // lower median
}

// ---------------------------------------------------------------------------
// Subcommands

int cmd_ingest(const RunConfig& c) {
    const KnowledgeGraph g = load_graph(c);
    g.log_ingest(std::cout);
    const auto lcc = largest_connected_component(g);

    size_t task_pairs_total = 0;
    for (const auto& [rel, pairs] : g.task_pairs) task_pairs_total += pairs.size();

    nlohmann::json j;
    j["config"] = hex64(config_hash(c));
    j["seed"] = c.seed;
    j["entities"] = g.entities.size();
    j["relations"] = g.relations.size();
    j["background_triples"] = g.triples.size();
    j["duplicates_dropped"] = g.ingest.duplicates;
    j["task_relations"] = g.task_pairs.size();
    j["task_pairs"] = task_pairs_total;
    j["largest_component"] = lcc.size();

    const fs::path out = ensure_out_dir(c);
    write_atomic(out / "ingest_report.json", j.dump(2) + "\n");
    std::cout << "wrote " << (out / "ingest_report.json").string() << "\n";
    return 0;
}

int cmd_split(const RunConfig& c) {
    const KnowledgeGraph g = load_graph(c);
    const RelationSplit split = resolve_split(c, g);
    const fs::path out = ensure_out_dir(c);
    write_atomic(out / "split.json", split_to_json(split, g, config_hash(c), c.seed));
    std::cout << "split: " << split.train.size() << " train, " << split.valid.size()
              << " valid, " << split.test.size() << " test relations\n"
              << "wrote " << (out / "split.json").string() << "\n";
    return 0;
}

int cmd_train(const RunConfig& c, const std::string& resume) {
    const KnowledgeGraph g = load_graph(c);
    const EntityTypeTable types = EntityTypeTable::from_graph(g);
    const RelationSplit split = resolve_split(c, g);
    const fs::path out = ensure_out_dir(c);

    Checkpoint ck;
    if (!resume.empty()) {
        ck = load_checkpoint(resume);
        if (ck.config_hash != config_hash(c))
            throw std::runtime_error("checkpoint " + resume +
                                     " was written by a different configuration (" +
                                     hex64(ck.config_hash) + " vs " +
                                     hex64(config_hash(c)) + ")");
        std::cout << "resuming from " << resume << " at step " << ck.step << "\n";
    } else {
        ck.state = ModelState::init(c.variant_enum(), g.entities.size(),
                                    g.relations.size(), c.hp, c.seed);
        if (!c.pretrained.empty()) {
            const LoadEmbedReport rep = load_pretrained_embeddings(
                c.pretrained, ck.state, c.freeze_pretrained, g.entities);
            std::cout << "pretrained embeddings: " << rep.loaded << " loaded, "
                      << rep.missing << " missing, " << rep.unknown << " unknown\n";
        }
        ck.adam = AdamState::zeros_like(ck.state);
        ck.hp = c.hp;
        ck.seed = c.seed;
        ck.config_hash = config_hash(c);
    }

    const TrainLoopResult res = train_loop(ck, g, types, split, c.train, out);
    std::cout << "trained " << res.steps_run << " steps ("
              << (res.early_stopped ? "early stopped" : "completed") << ")\n";
    if (res.best_step >= 0)
        std::cout << "best validation MRR " << fmt_double(res.best_val_mrr) << " at step "
                  << res.best_step << "\n";
    std::cout << "wrote " << res.final_checkpoint.string() << "\n";
    return 0;
}

int cmd_eval(const RunConfig& c, std::string checkpoint, const std::string& which) {
    const KnowledgeGraph g = load_graph(c);
    const EntityTypeTable types = EntityTypeTable::from_graph(g);
    const RelationSplit split = resolve_split(c, g);
    const fs::path out = ensure_out_dir(c);
    if (checkpoint.empty()) checkpoint = default_checkpoint(out).string();

    const Checkpoint ck = load_checkpoint(checkpoint);
    const std::vector<FewShotTask> tasks =
        eval_tasks(g, types, split_part(split, which), c.train.k_shot,
                   c.eval_support_draws, c.seed, c.candidate_cap);

    EvalReport rep = evaluate(ck.state, tasks, ck.hp, c.seed, &g);
    rep.dataset = which;
    rep.checkpoint_id = fs::path(checkpoint).filename().string();
    rep.config_hash = config_hash(c);

    write_atomic(out / ("eval_" + which + ".json"), eval_report_json(rep));
    write_atomic(out / ("eval_" + which + ".csv"), eval_report_csv(rep));
    std::cout << rep.n_relations << " relations, " << which << " split: "
              << format_row(rep.aggregate) << "\n"
              << "wrote " << (out / ("eval_" + which + ".json")).string() << " and .csv\n";
    return 0;
}

int cmd_gen_null(const RunConfig& c) {
    const KnowledgeGraph g = load_graph(c);
    const auto lcc = largest_connected_component(g);
    const CommunityPartition partition = louvain(g, lcc);
    const fs::path out = ensure_out_dir(c);

    int n = c.null_n;
    if (n == 0) {
        RelationSplit split = resolve_split(c, g);
        std::vector<int> rels = split.test;
        if (rels.empty())
            for (const auto& [rel, pairs] : g.task_pairs) rels.push_back(rel);
        if (rels.empty())
            throw std::runtime_error(
                "no task relations to take the median episode size from; set null_n");
        n = median_pair_count(g, rels);
    }

    std::vector<SyntheticRelation> rels;
    for (int i = 0; i < c.null_per_pattern; ++i)
        rels.push_back(gen_symmetric(lcc, n, derive_seed(c.seed, "null_rel", 0,
                                                         static_cast<uint64_t>(i)), i));
    for (int i = 0; i < c.null_per_pattern; ++i)
        rels.push_back(gen_transitive(lcc, n, derive_seed(c.seed, "null_rel", 1,
                                                          static_cast<uint64_t>(i)), i));
    for (int i = 0; i < c.null_per_pattern; ++i)
        rels.push_back(gen_positional(partition, n, derive_seed(c.seed, "null_rel", 2,
                                                                static_cast<uint64_t>(i)), i));

    const uint64_t hash = config_hash(c);
    write_atomic(out / "null_tasks.json", synthetic_to_task_json(rels, g));
    write_atomic(out / "null_provenance.json", synthetic_provenance_json(rels, hash, c.seed));
    write_atomic(out / "communities.json", partition_to_json(partition, g, hash, c.seed));
    std::cout << rels.size() << " synthetic relations (N=" << n << " per pattern instance), "
              << partition.communities.size() << " communities, modularity "
              << fmt_double(partition.modularity) << "\n"
              << "wrote " << (out / "null_tasks.json").string()
              << ", null_provenance.json, communities.json\n";
    return 0;
}

int cmd_probe(const RunConfig& c, std::string checkpoint, const std::string& pattern,
              int k) {
    const KnowledgeGraph g = load_graph(c);
    const auto lcc = largest_connected_component(g);
    const fs::path out = ensure_out_dir(c);
    if (checkpoint.empty()) checkpoint = default_checkpoint(out).string();

    std::vector<SyntheticRelation> synth =
        synthetic_from_task_json(read_file(out / "null_tasks.json"),
                                 read_file(out / "null_provenance.json"), g);
    if (!pattern.empty()) {
        const Pattern want = cli_pattern(pattern);
        std::erase_if(synth, [&](const SyntheticRelation& r) { return r.pattern != want; });
        if (synth.empty())
            throw std::runtime_error("no synthetic relations of pattern \"" + pattern +
                                     "\" under " + out.string());
    }

    const Checkpoint ck = load_checkpoint(checkpoint);
    if (k <= 0) k = c.train.k_shot;
    ProbeReport rep = probe_null_tasks(ck.state, synth, lcc, k, c.seed, ck.hp, &g,
                                       c.candidate_cap);
    rep.eval.checkpoint_id = fs::path(checkpoint).filename().string();
    rep.eval.config_hash = config_hash(c);

    write_atomic(out / "probe_report.json", probe_report_json(rep));
    write_atomic(out / "probe_report.csv", probe_report_csv(rep));
    for (const auto& [p, h] : rep.hits10_by_pattern)
        std::cout << p << " Hits@10 " << fmt_double(h) << "\n";
    std::cout << "wrote " << (out / "probe_report.json").string() << " and .csv\n";
    return 0;
}

int cmd_analyze(const RunConfig& c, std::string checkpoint, const std::string& which) {
    const KnowledgeGraph g = load_graph(c);
    const EntityTypeTable types = EntityTypeTable::from_graph(g);
    const RelationSplit split = resolve_split(c, g);
    const fs::path out = ensure_out_dir(c);
    if (checkpoint.empty()) checkpoint = default_checkpoint(out).string();

    const Checkpoint ck = load_checkpoint(checkpoint);
    const std::vector<FewShotTask> tasks = eval_tasks(g, types, split_part(split, which),
                                                      c.train.k_shot, 1, c.seed,
                                                      c.candidate_cap);
    const EvalReport rep = evaluate(ck.state, tasks, ck.hp, c.seed, &g);

    std::vector<CorrelationPoint> points;
    points.reserve(tasks.size());
    for (size_t i = 0; i < tasks.size(); ++i) {
        CorrelationPoint p;
        p.relation = rep.per_relation[i].relation;
        p.x = support_frequency_feature(g, tasks[i]);
        p.y = rep.per_relation[i].metrics.mrr;
        points.push_back(std::move(p));
    }
    CorrelationReport corr = correlate(points);
    corr.config_hash = config_hash(c);
    corr.seed = c.seed;

    write_atomic(out / "correlation.json", correlation_json(corr));
    write_atomic(out / "correlation.csv", correlation_csv(corr));
    std::cout << "support-frequency vs MRR over " << corr.n << " relations: r = "
              << fmt_double(corr.r) << "\n"
              << "wrote " << (out / "correlation.json").string() << " and .csv\n";
    return 0;
}

int cmd_stats(const RunConfig& c, int top) {
    const KnowledgeGraph g = load_graph(c);
    const DegreeStats ds = degree_stats(g, top);
    const auto lcc = largest_connected_component(g);

    size_t task_pairs_total = 0;
    for (const auto& [rel, pairs] : g.task_pairs) task_pairs_total += pairs.size();

    std::cout << g.entities.size() << " entities, " << g.relations.size() << " relations, "
              << g.triples.size() << " background triples\n"
              << g.task_pairs.size() << " task relations with " << task_pairs_total
              << " pairs\n"
              << "largest component: " << lcc.size() << " entities\n"
              << "median degree " << ds.median_degree << ", max degree " << ds.max_degree
              << " at " << g.entities.name(ds.max_degree_entity) << " (adjacent to "
              << fmt_double(ds.max_degree_fraction * 100.0) << "% of entities)\n";
    for (const auto& [entity, degree] : ds.top_k)
        std::cout << "  " << degree << "  " << g.entities.name(entity) << "\n";

    nlohmann::json j;
    j["config"] = hex64(config_hash(c));
    j["seed"] = c.seed;
    j["entities"] = g.entities.size();
    j["relations"] = g.relations.size();
    j["background_triples"] = g.triples.size();
    j["task_relations"] = g.task_pairs.size();
    j["task_pairs"] = task_pairs_total;
    j["largest_component"] = lcc.size();
    j["median_degree"] = ds.median_degree;
    j["max_degree"] = ds.max_degree;
    j["max_degree_entity"] = g.entities.name(ds.max_degree_entity);
    j["max_degree_fraction"] = ds.max_degree_fraction;
    nlohmann::json topk = nlohmann::json::array();
    for (const auto& [entity, degree] : ds.top_k)
        topk.push_back({{"entity", g.entities.name(entity)}, {"degree", degree}});
    j["top"] = std::move(topk);

    const fs::path out = ensure_out_dir(c);
    write_atomic(out / "stats.json", j.dump(2) + "\n");
    std::cout << "wrote " << (out / "stats.json").string() << "\n";
    return 0;
}

int cmd_witness(const std::string& pattern, int k) {
    const Pattern p = cli_pattern(pattern);
    const int mk = min_witness_k(p);  // rejects positional
    if (k < mk)
        std::cout << "not witnessable (min K = " << mk << ")\n";
    else
        std::cout << "witnessable (min K = " << mk << ")\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"few-shot knowledge-graph link prediction laboratory"};
    app.require_subcommand(1);

    Common common;
    std::string resume, checkpoint, pattern, which_split = "test";
    int k = 0, top = 10;

    CLI::App* ingest = app.add_subcommand("ingest", "load the graph and report its shape");
    add_config_options(ingest, common);

    CLI::App* split = app.add_subcommand("split", "write the relation split");
    add_config_options(split, common);

    CLI::App* train = app.add_subcommand("train", "episodic training with checkpoints");
    add_config_options(train, common);
    train->add_option("--resume", resume, "checkpoint to continue from");

    CLI::App* eval = app.add_subcommand("eval", "ranking metrics on a relation split");
    add_config_options(eval, common);
    eval->add_option("--checkpoint", checkpoint, "checkpoint to evaluate");
    eval->add_option("--split", which_split, "train, valid, or test")
        ->default_val("test");

    CLI::App* gen_null = app.add_subcommand("gen-null",
                                            "synthetic pattern relations and communities");
    add_config_options(gen_null, common);

    CLI::App* probe = app.add_subcommand("probe", "evaluate on synthetic pattern relations");
    add_config_options(probe, common);
    probe->add_option("--checkpoint", checkpoint, "checkpoint to probe");
    probe->add_option("--pattern", pattern, "restrict to one pattern");
    probe->add_option("--k", k, "support size (default: k_shot)");

    CLI::App* analyze = app.add_subcommand("analyze",
                                           "support-frequency vs per-relation MRR");
    add_config_options(analyze, common);
    analyze->add_option("--checkpoint", checkpoint, "checkpoint to analyze");
    analyze->add_option("--split", which_split, "train, valid, or test")
        ->default_val("test");

    CLI::App* stats = app.add_subcommand("stats", "degree statistics of the graph");
    add_config_options(stats, common);
    stats->add_option("--top", top, "entities in the degree table")->default_val(10);

    CLI::App* witness = app.add_subcommand("witness",
                                           "can K support triples witness a pattern?");
    witness->add_option("--pattern", pattern, "symmetry or transitivity")->required();
    witness->add_option("--k", k, "support size")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (witness->parsed()) return cmd_witness(pattern, k);
        CLI::App* active = app.get_subcommands().front();
        const RunConfig c = load(common, active);
        if (ingest->parsed()) return cmd_ingest(c);
        if (split->parsed()) return cmd_split(c);
        if (train->parsed()) return cmd_train(c, resume);
        if (eval->parsed()) return cmd_eval(c, checkpoint, which_split);
        if (gen_null->parsed()) return cmd_gen_null(c);
        if (probe->parsed()) return cmd_probe(c, checkpoint, pattern, k);
        if (analyze->parsed()) return cmd_analyze(c, checkpoint, which_split);
        if (stats->parsed()) return cmd_stats(c, top);
        throw std::logic_error("unhandled subcommand");
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
