#include "fewkg/optim.hpp"

#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "fewkg/eval.hpp"
#include "fewkg/rng.hpp"
#include "fewkg/util.hpp"

namespace fewkg {

void TrainConfig::validate() const {
    if (!(lr > 0.0)) throw std::invalid_argument("train config: lr must be > 0");
    if (beta1 < 0.0 || beta1 >= 1.0)
        throw std::invalid_argument("train config: beta1 must be in [0, 1)");
    if (beta2 < 0.0 || beta2 >= 1.0)
        throw std::invalid_argument("train config: beta2 must be in [0, 1)");
    if (!(epsilon > 0.0)) throw std::invalid_argument("train config: epsilon must be > 0");
    if (batch_tasks < 1) throw std::invalid_argument("train config: batch_tasks must be >= 1");
    if (k_shot < 1) throw std::invalid_argument("train config: k_shot must be >= 1");
    if (queries_per_task < 1)
        throw std::invalid_argument("train config: queries_per_task must be >= 1");
    if (max_steps < 0) throw std::invalid_argument("train config: max_steps must be >= 0");
    if (eval_every < 0) throw std::invalid_argument("train config: eval_every must be >= 0");
    if (early_stop_patience < 0)
        throw std::invalid_argument("train config: early_stop_patience must be >= 0");
}

AdamState AdamState::zeros_like(ModelState& s) {
    AdamState a;
    for (const ParamView& pv : param_views(s)) {
        a.m.emplace(pv.name, Vec(pv.n, 0.0));
        a.v.emplace(pv.name, Vec(pv.n, 0.0));
    }
    return a;
}

void adam_step(ModelState& s, GradientBundle& g, AdamState& adam, const TrainConfig& cfg) {
    const auto pv = param_views(s);
    auto gv = grad_views(g, s);
    if (pv.size() != gv.size())
        throw std::logic_error("adam_step: parameter/gradient view mismatch");

    ++adam.t;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(adam.t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(adam.t));

    for (size_t i = 0; i < pv.size(); ++i) {
        if (!pv[i].trainable) continue;
        if (!all_finite(gv[i].data, gv[i].n))
            throw std::runtime_error("adam_step: non-finite gradient in group \"" +
                                     pv[i].name + "\"");
        const auto mi = adam.m.find(pv[i].name);
        const auto vi = adam.v.find(pv[i].name);
        if (mi == adam.m.end() || vi == adam.v.end() || mi->second.size() != pv[i].n ||
            vi->second.size() != pv[i].n)
            throw std::runtime_error("adam_step: moment buffers do not match group \"" +
                                     pv[i].name + "\"");
        double* m = mi->second.data();
        double* v = vi->second.data();
        double* p = pv[i].data;
        const double* grad = gv[i].data;
        for (size_t j = 0; j < pv[i].n; ++j) {
            m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * grad[j];
            v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * grad[j] * grad[j];
            p[j] -= cfg.lr * (m[j] / bc1) / (std::sqrt(v[j] / bc2) + cfg.epsilon);
        }
    }
}

double train_step(ModelState& s, AdamState& adam, const KnowledgeGraph& g,
                  const EntityTypeTable& types, const RelationSplit& split,
                  const TrainConfig& cfg, const HyperParams& hp, uint64_t step_seed) {
    cfg.validate();
    if (split.train.empty()) throw std::runtime_error("train_step: empty training split");

    GradientBundle grads = GradientBundle::zeros_like(s);
    Rng batch_rng(derive_seed(step_seed, "batch"));
    double total = 0.0;
    for (int i = 0; i < cfg.batch_tasks; ++i) {
        const int rel = split.train[batch_rng.next_below(split.train.size())];
        const FewShotTask task =
            build_task(g, types, rel, cfg.k_shot, cfg.queries_per_task,
                       derive_seed(step_seed, "task", static_cast<uint64_t>(i)));
        const TaskPlan plan = build_task_plan(s, &g, task, hp,
                                              derive_seed(step_seed, "plan",
                                                          static_cast<uint64_t>(i)));
        total += task_loss_backward(s, plan, hp, grads);
    }
    grads.scale(1.0 / cfg.batch_tasks);
    adam_step(s, grads, adam, cfg);
    return total / cfg.batch_tasks;
}

// ---------------------------------------------------------------------------
// Checkpoint format, version 1. Little-endian scalars, named tensors; the
// whole model plus optimizer moments, so a resumed run continues bitwise.

namespace {

constexpr char kMagic[4] = {'F', 'K', 'G', 'C'};
constexpr uint32_t kVersion = 1;

void put_bytes(std::string& b, const void* p, size_t n) {
    b.append(static_cast<const char*>(p), n);
}
void put_u8(std::string& b, uint8_t v) { put_bytes(b, &v, 1); }
void put_u32(std::string& b, uint32_t v) { put_bytes(b, &v, 4); }
void put_u64(std::string& b, uint64_t v) { put_bytes(b, &v, 8); }
void put_i32(std::string& b, int32_t v) { put_bytes(b, &v, 4); }
void put_i64(std::string& b, int64_t v) { put_bytes(b, &v, 8); }
void put_f64(std::string& b, double v) { put_bytes(b, &v, 8); }
void put_str(std::string& b, const std::string& s) {
    put_u32(b, static_cast<uint32_t>(s.size()));
    put_bytes(b, s.data(), s.size());
}
void put_vec(std::string& b, const double* p, size_t n) {
    put_u64(b, n);
    put_bytes(b, p, n * sizeof(double));
}

struct Reader {
    const std::string& buf;
    size_t pos = 0;

    void need(size_t n) const {
        if (pos + n > buf.size()) throw std::runtime_error("checkpoint file truncated");
    }
    void raw(void* out, size_t n) {
        need(n);
        std::memcpy(out, buf.data() + pos, n);
        pos += n;
    }
    uint8_t u8() { uint8_t v; raw(&v, 1); return v; }
    uint32_t u32() { uint32_t v; raw(&v, 4); return v; }
    uint64_t u64() { uint64_t v; raw(&v, 8); return v; }
    int32_t i32() { int32_t v; raw(&v, 4); return v; }
    int64_t i64() { int64_t v; raw(&v, 8); return v; }
    double f64() { double v; raw(&v, 8); return v; }
    std::string str() {
        const uint32_t n = u32();
        need(n);
        std::string s(buf.data() + pos, n);
        pos += n;
        return s;
    }
    Vec vec() {
        const uint64_t n = u64();
        need(n * sizeof(double));
        Vec v(n);
        std::memcpy(v.data(), buf.data() + pos, n * sizeof(double));
        pos += n * sizeof(double);
        return v;
    }
};

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
    std::string b;
    put_bytes(b, kMagic, 4);
    put_u32(b, kVersion);
    put_u64(b, ck.config_hash);
    put_u64(b, ck.seed);
    put_i64(b, ck.step);

    put_u8(b, static_cast<uint8_t>(ck.state.variant));
    put_u8(b, ck.state.frozen_entities ? 1 : 0);
    const HyperParams& hp = ck.hp;
    put_i32(b, hp.d);
    put_i32(b, hp.d_h);
    put_f64(b, hp.eta);
    put_f64(b, hp.gamma);
    put_i32(b, hp.neg_ratio);
    put_u8(b, hp.norm == Norm::L1 ? 1 : 2);
    put_u8(b, hp.second_order ? 1 : 0);
    put_i32(b, hp.rgcn_neighbors);
    put_i32(b, hp.rgcn_bases);
    put_i32(b, hp.rgcn_hidden);
    put_i32(b, ck.state.num_entities());
    put_i32(b, ck.state.rgcn ? ck.state.rgcn->num_relations : 0);

    // param_views needs a mutable state; this path only reads through it.
    auto views = param_views(const_cast<ModelState&>(ck.state));
    put_u32(b, static_cast<uint32_t>(views.size()));
    for (const ParamView& pv : views) {
        put_str(b, pv.name);
        put_vec(b, pv.data, pv.n);
    }

    put_u32(b, static_cast<uint32_t>(ck.adam.m.size()));
    for (const auto& [name, m] : ck.adam.m) {
        const auto vi = ck.adam.v.find(name);
        if (vi == ck.adam.v.end() || vi->second.size() != m.size())
            throw std::runtime_error("save_checkpoint: optimizer moments disagree for group \"" +
                                     name + "\"");
        put_str(b, name);
        put_vec(b, m.data(), m.size());
        put_vec(b, vi->second.data(), vi->second.size());
    }
    put_i64(b, ck.adam.t);

    put_f64(b, ck.best_val_mrr);
    put_i64(b, ck.best_step);
    put_i32(b, ck.evals_since_improve);
    write_atomic(path, b);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    const std::string buf = read_file(path);
    Reader r{buf};
    char magic[4];
    r.raw(magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error(path.string() + " is not a checkpoint file");
    const uint32_t version = r.u32();
    if (version != kVersion)
        throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));

    Checkpoint ck;
    ck.config_hash = r.u64();
    ck.seed = r.u64();
    ck.step = r.i64();

    const uint8_t variant_code = r.u8();
    if (variant_code > 3)
        throw std::runtime_error("checkpoint has unknown variant code " +
                                 std::to_string(variant_code));
    const Variant variant = static_cast<Variant>(variant_code);
    const bool frozen = r.u8() != 0;

    HyperParams hp;
    hp.d = r.i32();
    hp.d_h = r.i32();
    hp.eta = r.f64();
    hp.gamma = r.f64();
    hp.neg_ratio = r.i32();
    const uint8_t norm_code = r.u8();
    if (norm_code != 1 && norm_code != 2)
        throw std::runtime_error("checkpoint has unknown norm code " +
                                 std::to_string(norm_code));
    hp.norm = norm_code == 1 ? Norm::L1 : Norm::L2;
    hp.second_order = r.u8() != 0;
    hp.rgcn_neighbors = r.i32();
    hp.rgcn_bases = r.i32();
    hp.rgcn_hidden = r.i32();
    ck.hp = hp;

    const int num_entities = r.i32();
    const int num_relations = r.i32();
    ck.state = ModelState::init(variant, num_entities,
                                variant == Variant::RGCN ? num_relations : 0, hp, 0);
    ck.state.frozen_entities = frozen;

    std::map<std::string, Vec> tensors;
    const uint32_t n_tensors = r.u32();
    for (uint32_t i = 0; i < n_tensors; ++i) {
        std::string name = r.str();
        tensors.emplace(std::move(name), r.vec());
    }
    for (const ParamView& pv : param_views(ck.state)) {
        const auto it = tensors.find(pv.name);
        if (it == tensors.end())
            throw std::runtime_error("checkpoint is missing parameter group \"" + pv.name +
                                     "\"");
        if (it->second.size() != pv.n)
            throw std::runtime_error("checkpoint group \"" + pv.name + "\" has " +
                                     std::to_string(it->second.size()) + " values, expected " +
                                     std::to_string(pv.n));
        std::memcpy(pv.data, it->second.data(), pv.n * sizeof(double));
        tensors.erase(it);
    }
    if (!tensors.empty())
        throw std::runtime_error("checkpoint has unknown parameter group \"" +
                                 tensors.begin()->first + "\"");

    const uint32_t n_groups = r.u32();
    for (uint32_t i = 0; i < n_groups; ++i) {
        std::string name = r.str();
        Vec m = r.vec();
        Vec v = r.vec();
        ck.adam.m.emplace(name, std::move(m));
        ck.adam.v.emplace(std::move(name), std::move(v));
    }
    ck.adam.t = r.i64();

    ck.best_val_mrr = r.f64();
    ck.best_step = r.i64();
    ck.evals_since_improve = r.i32();
    if (r.pos != buf.size())
        throw std::runtime_error("checkpoint has trailing bytes");
    return ck;
}

// ---------------------------------------------------------------------------

namespace {

// Fail fast if any relation cannot fill its episodes, instead of erroring on
// a random training step much later.
void check_pair_counts(const KnowledgeGraph& g, const RelationSplit& split,
                       const TrainConfig& cfg) {
    std::string bad;
    for (int rel : split.train) {
        const size_t n = g.pairs_of_relation(rel).size();
        if (n < static_cast<size_t>(cfg.k_shot + cfg.queries_per_task)) {
            if (!bad.empty()) bad += ", ";
            bad += g.relations.name(rel) + " (" + std::to_string(n) + " pairs)";
        }
    }
    if (!bad.empty())
        throw std::runtime_error("train_loop: training relations need at least " +
                                 std::to_string(cfg.k_shot + cfg.queries_per_task) +
                                 " pairs for K=" + std::to_string(cfg.k_shot) + ", J=" +
                                 std::to_string(cfg.queries_per_task) + ": " + bad);
    bad.clear();
    for (int rel : split.valid) {
        const size_t n = g.pairs_of_relation(rel).size();
        if (n < static_cast<size_t>(cfg.k_shot + 1)) {
            if (!bad.empty()) bad += ", ";
            bad += g.relations.name(rel) + " (" + std::to_string(n) + " pairs)";
        }
    }
    if (!bad.empty())
        throw std::runtime_error("train_loop: validation relations need at least " +
                                 std::to_string(cfg.k_shot + 1) + " pairs for K=" +
                                 std::to_string(cfg.k_shot) + ": " + bad);
}

}  // namespace

TrainLoopResult train_loop(Checkpoint& ck, const KnowledgeGraph& g,
                           const EntityTypeTable& types, const RelationSplit& split,
                           const TrainConfig& cfg, const std::filesystem::path& out_dir) {
    cfg.validate();
    ck.hp.validate();
    if (cfg.seed != ck.seed)
        throw std::runtime_error("train_loop: config seed " + std::to_string(cfg.seed) +
                                 " does not match checkpoint seed " + std::to_string(ck.seed));
    if (split.train.empty()) throw std::runtime_error("train_loop: empty training split");
    if (ck.step < 0 || ck.step > cfg.max_steps)
        throw std::runtime_error("train_loop: checkpoint is at step " +
                                 std::to_string(ck.step) + " of " +
                                 std::to_string(cfg.max_steps));
    check_pair_counts(g, split, cfg);

    std::filesystem::create_directories(out_dir);
    const auto log_path = out_dir / "train_log.jsonl";
    std::ofstream log(log_path, ck.step > 0 ? std::ios::app : std::ios::trunc);
    if (!log) throw std::runtime_error("cannot open " + log_path.string());

    // Validation tasks are fixed for the whole run: seeded by relation only,
    // so every evaluation (and every resume) sees the same episodes.
    std::vector<FewShotTask> val_tasks;
    const bool validate_runs = cfg.eval_every > 0 && !split.valid.empty();
    if (validate_runs) {
        val_tasks.reserve(split.valid.size());
        for (int rel : split.valid)
            val_tasks.push_back(build_task(g, types, rel, cfg.k_shot, kAllRemaining,
                                           derive_seed(cfg.seed, "val",
                                                       static_cast<uint64_t>(rel))));
    }

    TrainLoopResult res;
    res.best_val_mrr = ck.best_val_mrr;
    res.best_step = ck.best_step;
    const int64_t start_step = ck.step;

    for (int64_t step = ck.step; step < cfg.max_steps; ++step) {
        const auto t0 = std::chrono::steady_clock::now();
        const uint64_t step_seed = derive_seed(cfg.seed, "step", static_cast<uint64_t>(step));
        const double loss = train_step(ck.state, ck.adam, g, types, split, cfg, ck.hp,
                                       step_seed);
        ck.step = step + 1;

        nlohmann::json line;
        line["step"] = ck.step;
        line["loss"] = loss;

        bool stop = false;
        if (validate_runs && ck.step % cfg.eval_every == 0) {
            const EvalReport rep =
                evaluate(ck.state, val_tasks, ck.hp,
                         derive_seed(cfg.seed, "val_eval", static_cast<uint64_t>(ck.step)),
                         &g);
            const double val = rep.aggregate.mrr;
            line["val_mrr"] = val;
            if (val > ck.best_val_mrr) {
                ck.best_val_mrr = val;
                ck.best_step = ck.step;
                ck.evals_since_improve = 0;
            } else {
                ++ck.evals_since_improve;
            }
            save_checkpoint(out_dir / ("checkpoint_step" + std::to_string(ck.step) + ".bin"),
                            ck);
            if (ck.best_step == ck.step) {
                save_checkpoint(out_dir / "checkpoint_best.bin", ck);
            }
            if (cfg.early_stop_patience > 0 &&
                ck.evals_since_improve >= cfg.early_stop_patience) {
                stop = true;
            }
        }

        const auto t1 = std::chrono::steady_clock::now();
        line["wall_ms"] =
            std::chrono::duration_cast<std::chrono::milliseconds>(t1 - t0).count();
        log << line.dump() << '\n';
        log.flush();

        if (stop) {
            res.early_stopped = true;
            break;
        }
    }

    res.steps_run = ck.step - start_step;
    res.best_val_mrr = ck.best_val_mrr;
    res.best_step = ck.best_step;
    res.final_checkpoint = out_dir / "checkpoint_final.bin";
    save_checkpoint(res.final_checkpoint, ck);
    if (ck.best_step >= 0) res.best_checkpoint = out_dir / "checkpoint_best.bin";
    return res;
}

}  // namespace fewkg
