#pragma once
// The model family: entity encoders (embedding lookup, 2-layer R-GCN with
// basis decomposition), relation learners (support-set MLP, shared
// embedding), TransE decoder, margin contrastive loss, and the one-step
// relation update against the support loss. Every gradient is derived by
// hand; there is no autograd graph. 64-bit floats throughout.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "fewkg/kg.hpp"
#include "fewkg/matrix.hpp"
#include "fewkg/taskgen.hpp"

namespace fewkg {

enum class Variant { MetaR, SharedEmbed, ZeroShot, RGCN };
enum class Norm { L1, L2 };

std::string variant_name(Variant v);
Variant variant_from_name(const std::string& name);

struct HyperParams {
    int d = 100;            // entity embedding dimension
    int d_h = 0;            // relation-MLP hidden width; 0 = encoder dim
    double eta = 1.0;       // relation update step size
    double gamma = 1.0;     // hinge margin
    int neg_ratio = 3;      // negatives per positive
    Norm norm = Norm::L2;
    bool second_order = false;  // differentiate through the relation update
    int rgcn_neighbors = 10;    // sampled neighbors per relation per hop
    int rgcn_bases = 2;
    int rgcn_hidden = 50;

    int encoder_dim(Variant v) const { return v == Variant::RGCN ? rgcn_hidden : d; }
    int mlp_hidden(Variant v) const { return d_h > 0 ? d_h : encoder_dim(v); }
    void validate() const;
};

struct RgcnLayer {
    std::vector<Matrix> bases;  // B matrices, each (in x out)
    Matrix coeffs;              // (2R x B): directed relation -> basis weights
    Matrix self_weight;         // (in x out)
};

struct RgcnParams {
    RgcnLayer layer1;  // d -> rgcn_hidden
    RgcnLayer layer2;  // rgcn_hidden -> rgcn_hidden
    int num_relations = 0;  // undirected relation count R; directed ids in [0, 2R)
};

struct ModelState {
    Variant variant = Variant::MetaR;
    Matrix entity_embeddings;  // |V| x d
    Matrix w1;                 // 2*d_enc x d_h
    Vec b1;                    // d_h
    Matrix w2;                 // d_h x d_enc
    Vec b2;                    // d_enc
    Vec shared_relation;       // d_enc (r_g)
    std::optional<RgcnParams> rgcn;
    bool frozen_entities = false;

    int num_entities() const { return entity_embeddings.rows; }
    int embed_dim() const { return entity_embeddings.cols; }
    int encoder_dim() const { return static_cast<int>(shared_relation.size()); }

    // All parameters drawn uniformly from [-6/sqrt(d), +6/sqrt(d)] in a fixed
    // order; biases start at zero.
    static ModelState init(Variant v, int num_entities, int num_relations,
                           const HyperParams& hp, uint64_t seed);
};

// Gradients mirroring ModelState shapes.
struct GradientBundle {
    Matrix d_entity;
    Matrix d_w1;
    Vec d_b1;
    Matrix d_w2;
    Vec d_b2;
    Vec d_shared;
    std::optional<RgcnParams> d_rgcn;  // same shapes as the parameters

    static GradientBundle zeros_like(const ModelState& s);
    void clear();
    void scale(double f);
};

// Flat named views over parameter/gradient storage, enumerated in a fixed
// order shared by the optimizer and the checkpoint format.
struct ParamView {
    std::string name;
    double* data = nullptr;
    size_t n = 0;
    bool trainable = true;
};
std::vector<ParamView> param_views(ModelState& s);
std::vector<ParamView> grad_views(GradientBundle& g, const ModelState& s);

// ---------------------------------------------------------------------------
// Encoders

// Row `entity` of the embedding table.
Vec encode_entity_lookup(const ModelState& s, int entity);

// Sampled 2-hop computation tree for one R-GCN encoding. Neighbor samples are
// fixed by (seed, layer, entity), so the encoding is a pure function of the
// parameters once the plan exists.
struct RgcnRelGroup {
    int directed_rel = 0;           // [0, R) forward: in-neighbors; [R, 2R) inverse
    std::vector<int> members;       // indices into the previous level
};
struct RgcnNode {
    int entity = 0;
    int self_prev = -1;             // index of this entity at the previous level
    std::vector<RgcnRelGroup> groups;
};
struct RgcnPlan {
    int root_entity = 0;
    std::vector<int> level0;        // entity ids feeding layer 1
    std::vector<RgcnNode> level1;
    RgcnNode root;
};

RgcnPlan build_rgcn_plan(const KnowledgeGraph& g, int entity, const HyperParams& hp,
                         uint64_t seed);

struct RgcnTrace {
    std::vector<Vec> pre1, h1;  // per level-1 node
    Vec pre2;
};

Vec rgcn_forward(const ModelState& s, const RgcnPlan& plan, RgcnTrace* trace = nullptr);

// d_out is the loss gradient at the encoder output; accumulates into grads.
void rgcn_backward(const ModelState& s, const RgcnPlan& plan, const RgcnTrace& trace,
                   const Vec& d_out, GradientBundle& grads);

// Convenience wrapper: plan + forward. Errors if rgcn parameters are absent.
Vec encode_entity_rgcn(const ModelState& s, const KnowledgeGraph& g, int entity,
                       const HyperParams& hp, uint64_t seed);

// ---------------------------------------------------------------------------
// Relation learners

// r = (1/K) sum_k MLP([h_k ; t_k]); hidden rectifier, linear output.
struct MlpTrace {
    std::vector<Vec> z;   // per pair, concatenated input (2*d_enc)
    std::vector<Vec> a1;  // hidden pre-activation
    std::vector<Vec> h1;  // hidden activation
};
Vec rel_learner_mlp(const ModelState& s,
                    const std::vector<std::pair<Vec, Vec>>& support_embeds,
                    MlpTrace* trace = nullptr);
// d_r: loss gradient at the MLP output (already including the 1/K mean is NOT
// expected; the function applies the mean itself). d_support receives per-pair
// gradients on the head/tail encoder outputs.
void rel_learner_mlp_backward(const ModelState& s, const MlpTrace& trace, const Vec& d_r,
                              GradientBundle& grads,
                              std::vector<std::pair<Vec, Vec>>* d_support);

// Everything an encoder needs beyond the state: the background graph and a
// seed for R-GCN neighbor sampling. Lookup variants ignore it.
struct EncoderContext {
    const KnowledgeGraph* graph = nullptr;
    const HyperParams* hp = nullptr;
    uint64_t seed = 0;
};

// Variant dispatch used by every scoring and loss path: embedding lookup, or
// the R-GCN encoder seeded per entity from the context.
Vec encode_entity(const ModelState& s, int entity, const EncoderContext& ctx = {});

// Pre-update relation vector per variant: MetaR/RGCN run the MLP over encoded
// support pairs, SharedEmbed and ZeroShot return the shared embedding.
Vec relation_embed(const ModelState& s, const FewShotTask& task,
                   const EncoderContext& ctx = {});

// ---------------------------------------------------------------------------
// Decoder and loss

double transe_distance(const Vec& h, const Vec& r, const Vec& t, Norm norm);

// Gradient of the distance w.r.t. its first argument direction:
// u/||u||_2 (L2) or sign(u) (L1) for u = h + r - t. Gradients w.r.t. h and r
// equal this; w.r.t. t its negation.
Vec transe_direction(const Vec& h, const Vec& r, const Vec& t, Norm norm);

struct MarginLossResult {
    double loss = 0.0;
    std::vector<double> d_pos;               // dL/d(pos distance), per positive
    std::vector<std::vector<double>> d_neg;  // dL/d(neg distance), paired
};
// Mean over (positive, negative) pairs of max(0, gamma + d_pos - d_neg).
MarginLossResult margin_loss(const std::vector<double>& pos_dists,
                             const std::vector<std::vector<double>>& neg_dists,
                             double gamma);

// One gradient step on the relation vector against the support-set loss:
// r' = r - eta * grad_r L(support). ZeroShot returns r unchanged.
Vec support_gradient_step(const ModelState& s, const FewShotTask& task, const Vec& r,
                          double eta, uint64_t seed, const HyperParams& hp,
                          const EncoderContext& ctx = {});

// -distance(E(head), r', E(candidate)); errors if candidate is not in the
// task's candidate set.
double score_query(const ModelState& s, const FewShotTask& task, const Vec& r_prime,
                   int head, int candidate, const HyperParams& hp,
                   const EncoderContext& ctx = {});

// ---------------------------------------------------------------------------
// Whole-episode loss

// All sampled choices for one episode (negatives, R-GCN neighbor trees),
// fixed up front: given a plan, the loss is a pure deterministic function of
// the parameters.
struct TaskPlan {
    FewShotTask task;
    NegativeBatch support_negs;  // empty for ZeroShot
    NegativeBatch query_negs;
    std::map<int, RgcnPlan> rgcn_plans;  // per involved entity (RGCN only)
    std::vector<int> involved;           // distinct entity ids used anywhere
};

TaskPlan build_task_plan(const ModelState& s, const KnowledgeGraph* g,
                         const FewShotTask& task, const HyperParams& hp, uint64_t seed);

// Query-set loss after the relation update; the update itself is part of the
// forward computation.
double task_loss(const ModelState& s, const TaskPlan& plan, const HyperParams& hp);

// Same forward plus analytic backward into all parameter groups. By default
// the inner-step gradient is treated as constant; hp.second_order adds the
// curvature terms of the update.
double task_loss_backward(const ModelState& s, const TaskPlan& plan,
                          const HyperParams& hp, GradientBundle& grads);

// ---------------------------------------------------------------------------
// Pre-trained embeddings

struct LoadEmbedReport {
    size_t loaded = 0;
    size_t missing = 0;  // vocab entities not present in the file
    size_t unknown = 0;  // file entities not present in the vocab
};
// File format: header line "d <dim>", then "entity<TAB>f1 f2 ... fd".
LoadEmbedReport load_pretrained_embeddings(const std::filesystem::path& path,
                                           ModelState& s, bool freeze,
                                           const Vocab& entities);

}  // namespace fewkg
