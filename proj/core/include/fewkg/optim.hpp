#pragma once
// Adam over the named parameter groups, the episodic training loop
// (sample tasks, inner relation step, query loss, outer update), and the
// versioned binary checkpoint format.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "fewkg/kg.hpp"
#include "fewkg/model.hpp"
#include "fewkg/taskgen.hpp"

namespace fewkg {

struct TrainConfig {
    double lr = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    int batch_tasks = 64;  // tasks per outer step; 1024 at benchmark scale
    int k_shot = 1;
    int queries_per_task = 3;
    int64_t max_steps = 200;
    int64_t eval_every = 0;        // 0 disables validation/checkpoint cadence
    int early_stop_patience = 10;  // evaluations without val-MRR improvement; 0 disables
    uint64_t seed = 0;

    void validate() const;
};

struct AdamState {
    std::map<std::string, Vec> m;
    std::map<std::string, Vec> v;
    int64_t t = 0;

    static AdamState zeros_like(ModelState& s);
};

// One bias-corrected Adam update over the trainable groups. Frozen or
// untrainable groups are left untouched, moments included. A non-finite
// gradient raises an error naming the parameter group.
void adam_step(ModelState& s, GradientBundle& g, AdamState& adam, const TrainConfig& cfg);

// One outer step: batch_tasks training relations drawn with replacement, each
// materialized as a fresh K-shot task, gradients of the query loss (inner
// relation step included) accumulated in task order, one Adam update.
// Returns the mean query loss. step_seed should be unique per step.
double train_step(ModelState& s, AdamState& adam, const KnowledgeGraph& g,
                  const EntityTypeTable& types, const RelationSplit& split,
                  const TrainConfig& cfg, const HyperParams& hp, uint64_t step_seed);

struct Checkpoint {
    ModelState state;
    HyperParams hp;
    AdamState adam;
    uint64_t seed = 0;       // master training seed; with `step` this fixes all streams
    int64_t step = 0;        // completed outer steps
    uint64_t config_hash = 0;
    double best_val_mrr = -1.0;
    int64_t best_step = -1;
    int evals_since_improve = 0;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::filesystem::path& path);

struct TrainLoopResult {
    int64_t steps_run = 0;
    bool early_stopped = false;
    double best_val_mrr = -1.0;
    int64_t best_step = -1;
    std::filesystem::path final_checkpoint;
    std::filesystem::path best_checkpoint;  // empty when never evaluated
};

// Runs train_step from ck.step up to cfg.max_steps, mutating the checkpoint
// in place (ck.hp is the model's hyperparameters; cfg.seed must match
// ck.seed). Every eval_every steps: validation MRR on fixed seeded validation
// tasks, a step-stamped checkpoint, and a refreshed best-validation copy;
// early stop after `patience` evaluations without improvement. Appends one
// JSON line per step {step, loss, val_mrr?, wall_ms} to train_log.jsonl under
// out_dir. Resuming from a mid-run checkpoint reproduces the uninterrupted
// run bitwise: all randomness is derived from (seed, step), never loop state.
TrainLoopResult train_loop(Checkpoint& ck, const KnowledgeGraph& g,
                           const EntityTypeTable& types, const RelationSplit& split,
                           const TrainConfig& cfg, const std::filesystem::path& out_dir);

}  // namespace fewkg
