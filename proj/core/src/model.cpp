#include "fewkg/model.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "fewkg/rng.hpp"

namespace fewkg {

namespace {

constexpr double kTinyNorm = 1e-12;

Vec relu(const Vec& x) {
    Vec y(x.size());
    for (size_t i = 0; i < x.size(); ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
    return y;
}

// Lazily materialized W_rho = sum_b coeffs(rho, b) * bases[b] for one layer.
struct BasisCache {
    const RgcnLayer* layer;
    std::map<int, Matrix> built;

    explicit BasisCache(const RgcnLayer& l) : layer(&l) {}

    const Matrix& get(int rho) {
        auto it = built.find(rho);
        if (it != built.end()) return it->second;
        const auto& bases = layer->bases;
        Matrix w(bases.front().rows, bases.front().cols);
        for (size_t b = 0; b < bases.size(); ++b) {
            const double c = layer->coeffs.at(rho, static_cast<int>(b));
            if (c == 0.0) continue;
            for (size_t e = 0; e < w.a.size(); ++e) w.a[e] += c * bases[b].a[e];
        }
        return built.emplace(rho, std::move(w)).first->second;
    }
};

Vec embedding_row(const ModelState& s, int entity) {
    if (entity < 0 || entity >= s.num_entities())
        throw std::out_of_range("entity id " + std::to_string(entity) +
                                " is outside the embedding table (" +
                                std::to_string(s.num_entities()) + " rows)");
    const double* p = s.entity_embeddings.row(entity);
    return Vec(p, p + s.entity_embeddings.cols);
}

Vec encode_one(const ModelState& s, int entity, const EncoderContext& ctx) {
    if (s.variant != Variant::RGCN) return embedding_row(s, entity);
    if (!ctx.graph || !ctx.hp)
        throw std::runtime_error(
            "R-GCN encoding needs the background graph and hyperparameters in the "
            "encoder context");
    return encode_entity_rgcn(s, *ctx.graph, entity, *ctx.hp,
                              derive_seed(ctx.seed, "rgcn", static_cast<uint64_t>(entity)));
}

// One TransE distance term d(h, r, t) = ||h + r - t|| with the pieces the
// backward pass and the curvature terms need.
struct Term {
    int head = -1;
    int tail = -1;
    double dist = 0.0;
    double unorm = 0.0;  // ||u||_2, kept for the L2 projection terms
    Vec dir;             // d dist / d u: u/||u||_2 or sign(u)
};

Term make_term(const std::map<int, Vec>& enc, const Vec& r, int head, int tail, Norm norm) {
    Term t;
    t.head = head;
    t.tail = tail;
    const Vec& h = enc.at(head);
    const Vec& ta = enc.at(tail);
    Vec u(r.size());
    for (size_t i = 0; i < r.size(); ++i) u[i] = h[i] + r[i] - ta[i];
    t.unorm = norm_l2(u);
    if (norm == Norm::L2) {
        t.dist = t.unorm;
        t.dir.assign(u.size(), 0.0);
        if (t.unorm >= kTinyNorm)
            for (size_t i = 0; i < u.size(); ++i) t.dir[i] = u[i] / t.unorm;
    } else {
        t.dist = norm_l1(u);
        t.dir.resize(u.size());
        for (size_t i = 0; i < u.size(); ++i)
            t.dir[i] = u[i] > 0.0 ? 1.0 : (u[i] < 0.0 ? -1.0 : 0.0);
    }
    return t;
}

}  // namespace

Vec encode_entity(const ModelState& s, int entity, const EncoderContext& ctx) {
    return encode_one(s, entity, ctx);
}

std::string variant_name(Variant v) {
    switch (v) {
        case Variant::MetaR: return "metar";
        case Variant::SharedEmbed: return "shared-embed";
        case Variant::ZeroShot: return "zero-shot";
        case Variant::RGCN: return "rgcn";
    }
    throw std::logic_error("variant_name: bad enum value");
}

Variant variant_from_name(const std::string& name) {
    if (name == "metar") return Variant::MetaR;
    if (name == "shared-embed") return Variant::SharedEmbed;
    if (name == "zero-shot") return Variant::ZeroShot;
    if (name == "rgcn") return Variant::RGCN;
    throw std::runtime_error("unknown variant \"" + name +
                             "\" (expected metar, shared-embed, zero-shot, or rgcn)");
}

void HyperParams::validate() const {
    if (d < 1) throw std::invalid_argument("hyperparams: d must be >= 1");
    if (d_h < 0) throw std::invalid_argument("hyperparams: d_h must be >= 0");
    if (eta < 0.0) throw std::invalid_argument("hyperparams: eta must be >= 0");
    if (gamma < 0.0) throw std::invalid_argument("hyperparams: gamma must be >= 0");
    if (neg_ratio < 1) throw std::invalid_argument("hyperparams: neg_ratio must be >= 1");
    if (rgcn_neighbors < 1)
        throw std::invalid_argument("hyperparams: rgcn_neighbors must be >= 1");
    if (rgcn_bases < 1) throw std::invalid_argument("hyperparams: rgcn_bases must be >= 1");
    if (rgcn_hidden < 1) throw std::invalid_argument("hyperparams: rgcn_hidden must be >= 1");
}

ModelState ModelState::init(Variant v, int num_entities, int num_relations,
                            const HyperParams& hp, uint64_t seed) {
    hp.validate();
    if (num_entities < 1)
        throw std::invalid_argument("model init: need at least one entity");
    if (v == Variant::RGCN && num_relations < 1)
        throw std::invalid_argument("model init: R-GCN needs at least one relation");

    const int d_enc = hp.encoder_dim(v);
    const int d_h = hp.mlp_hidden(v);
    const double bound = 6.0 / std::sqrt(static_cast<double>(hp.d));
    Rng rng(derive_seed(seed, "init"));
    auto draw = [&](double* p, size_t n) {
        for (size_t i = 0; i < n; ++i) p[i] = rng.next_double(-bound, bound);
    };

    ModelState s;
    s.variant = v;
    s.entity_embeddings = Matrix(num_entities, hp.d);
    draw(s.entity_embeddings.a.data(), s.entity_embeddings.size());
    s.w1 = Matrix(2 * d_enc, d_h);
    draw(s.w1.a.data(), s.w1.size());
    s.b1.assign(static_cast<size_t>(d_h), 0.0);
    s.w2 = Matrix(d_h, d_enc);
    draw(s.w2.a.data(), s.w2.size());
    s.b2.assign(static_cast<size_t>(d_enc), 0.0);
    s.shared_relation.assign(static_cast<size_t>(d_enc), 0.0);
    draw(s.shared_relation.data(), s.shared_relation.size());
    if (v == Variant::RGCN) {
        RgcnParams rp;
        rp.num_relations = num_relations;
        auto make_layer = [&](int in, int out) {
            RgcnLayer l;
            for (int b = 0; b < hp.rgcn_bases; ++b) {
                Matrix m(in, out);
                draw(m.a.data(), m.size());
                l.bases.push_back(std::move(m));
            }
            l.coeffs = Matrix(2 * num_relations, hp.rgcn_bases);
            draw(l.coeffs.a.data(), l.coeffs.size());
            l.self_weight = Matrix(in, out);
            draw(l.self_weight.a.data(), l.self_weight.size());
            return l;
        };
        rp.layer1 = make_layer(hp.d, hp.rgcn_hidden);
        rp.layer2 = make_layer(hp.rgcn_hidden, hp.rgcn_hidden);
        s.rgcn = std::move(rp);
    }
    return s;
}

GradientBundle GradientBundle::zeros_like(const ModelState& s) {
    GradientBundle g;
    g.d_entity = Matrix(s.entity_embeddings.rows, s.entity_embeddings.cols);
    g.d_w1 = Matrix(s.w1.rows, s.w1.cols);
    g.d_b1.assign(s.b1.size(), 0.0);
    g.d_w2 = Matrix(s.w2.rows, s.w2.cols);
    g.d_b2.assign(s.b2.size(), 0.0);
    g.d_shared.assign(s.shared_relation.size(), 0.0);
    if (s.rgcn) {
        RgcnParams dr;
        dr.num_relations = s.rgcn->num_relations;
        auto zero_layer = [](const RgcnLayer& l) {
            RgcnLayer z;
            for (const Matrix& b : l.bases) z.bases.emplace_back(b.rows, b.cols);
            z.coeffs = Matrix(l.coeffs.rows, l.coeffs.cols);
            z.self_weight = Matrix(l.self_weight.rows, l.self_weight.cols);
            return z;
        };
        dr.layer1 = zero_layer(s.rgcn->layer1);
        dr.layer2 = zero_layer(s.rgcn->layer2);
        g.d_rgcn = std::move(dr);
    }
    return g;
}

void GradientBundle::clear() {
    d_entity.fill(0.0);
    d_w1.fill(0.0);
    std::fill(d_b1.begin(), d_b1.end(), 0.0);
    d_w2.fill(0.0);
    std::fill(d_b2.begin(), d_b2.end(), 0.0);
    std::fill(d_shared.begin(), d_shared.end(), 0.0);
    if (d_rgcn) {
        for (RgcnLayer* l : {&d_rgcn->layer1, &d_rgcn->layer2}) {
            for (Matrix& b : l->bases) b.fill(0.0);
            l->coeffs.fill(0.0);
            l->self_weight.fill(0.0);
        }
    }
}

void GradientBundle::scale(double f) {
    auto mul = [f](double* p, size_t n) {
        for (size_t i = 0; i < n; ++i) p[i] *= f;
    };
    mul(d_entity.a.data(), d_entity.size());
    mul(d_w1.a.data(), d_w1.size());
    mul(d_b1.data(), d_b1.size());
    mul(d_w2.a.data(), d_w2.size());
    mul(d_b2.data(), d_b2.size());
    mul(d_shared.data(), d_shared.size());
    if (d_rgcn) {
        for (RgcnLayer* l : {&d_rgcn->layer1, &d_rgcn->layer2}) {
            for (Matrix& b : l->bases) mul(b.a.data(), b.size());
            mul(l->coeffs.a.data(), l->coeffs.size());
            mul(l->self_weight.a.data(), l->self_weight.size());
        }
    }
}

namespace {

// Shared enumeration for param_views/grad_views so the two stay aligned.
void enumerate_views(Variant variant, bool frozen_entities, Matrix& entity, Matrix& w1,
                     Vec& b1, Matrix& w2, Vec& b2, Vec& shared, RgcnLayer* layer1,
                     RgcnLayer* layer2, std::vector<ParamView>& out) {
    const bool mlp_trainable = variant == Variant::MetaR || variant == Variant::RGCN;
    const bool shared_trainable =
        variant == Variant::SharedEmbed || variant == Variant::ZeroShot;
    out.push_back({"entity", entity.a.data(), entity.size(), !frozen_entities});
    out.push_back({"w1", w1.a.data(), w1.size(), mlp_trainable});
    out.push_back({"b1", b1.data(), b1.size(), mlp_trainable});
    out.push_back({"w2", w2.a.data(), w2.size(), mlp_trainable});
    out.push_back({"b2", b2.data(), b2.size(), mlp_trainable});
    out.push_back({"r_g", shared.data(), shared.size(), shared_trainable});
    if (layer1) {
        const bool rgcn_trainable = variant == Variant::RGCN;
        int ln = 1;
        for (RgcnLayer* l : {layer1, layer2}) {
            const std::string prefix = "rgcn" + std::to_string(ln++);
            for (size_t b = 0; b < l->bases.size(); ++b)
                out.push_back({prefix + "_basis" + std::to_string(b), l->bases[b].a.data(),
                               l->bases[b].size(), rgcn_trainable});
            out.push_back({prefix + "_coeffs", l->coeffs.a.data(), l->coeffs.size(),
                           rgcn_trainable});
            out.push_back({prefix + "_self", l->self_weight.a.data(), l->self_weight.size(),
                           rgcn_trainable});
        }
    }
}

}  // namespace

std::vector<ParamView> param_views(ModelState& s) {
    std::vector<ParamView> out;
    enumerate_views(s.variant, s.frozen_entities, s.entity_embeddings, s.w1, s.b1, s.w2,
                    s.b2, s.shared_relation, s.rgcn ? &s.rgcn->layer1 : nullptr,
                    s.rgcn ? &s.rgcn->layer2 : nullptr, out);
    return out;
}

std::vector<ParamView> grad_views(GradientBundle& g, const ModelState& s) {
    std::vector<ParamView> out;
    enumerate_views(s.variant, s.frozen_entities, g.d_entity, g.d_w1, g.d_b1, g.d_w2,
                    g.d_b2, g.d_shared, g.d_rgcn ? &g.d_rgcn->layer1 : nullptr,
                    g.d_rgcn ? &g.d_rgcn->layer2 : nullptr, out);
    return out;
}

Vec encode_entity_lookup(const ModelState& s, int entity) {
    return embedding_row(s, entity);
}

// ---------------------------------------------------------------------------
// R-GCN

RgcnPlan build_rgcn_plan(const KnowledgeGraph& g, int entity, const HyperParams& hp,
                         uint64_t seed) {
    if (entity < 0 || entity >= g.entities.size())
        throw std::out_of_range("rgcn plan: entity id " + std::to_string(entity) +
                                " is not in the graph");
    const auto& adj = g.adjacency();
    const int r_count = g.relations.size();
    const int cap = hp.rgcn_neighbors;

    // Sampled neighbors of u, bucketed by directed relation. Forward channel
    // rho = r carries in-neighbors (v, r, u); inverse channel rho = R + r
    // carries out-neighbors (u, r, v). At most `cap` per channel, drawn
    // without replacement; short lists pass through in adjacency order.
    auto sample_groups = [&](int u, int layer) {
        std::map<int, std::vector<int>> buckets;
        for (const AdjEntry& e : adj[static_cast<size_t>(u)]) {
            const int rho = e.outgoing ? r_count + e.rel : e.rel;
            buckets[rho].push_back(e.neighbor);
        }
        Rng rng(derive_seed(seed, "hop", static_cast<uint64_t>(layer),
                            static_cast<uint64_t>(u)));
        std::vector<std::pair<int, std::vector<int>>> out;
        for (auto& [rho, list] : buckets) {
            if (static_cast<int>(list.size()) <= cap) {
                out.emplace_back(rho, list);
            } else {
                std::vector<int> pick;
                pick.reserve(static_cast<size_t>(cap));
                for (size_t idx : rng.sample_distinct(list.size(), static_cast<size_t>(cap)))
                    pick.push_back(list[idx]);
                out.emplace_back(rho, std::move(pick));
            }
        }
        return out;
    };

    RgcnPlan plan;
    plan.root_entity = entity;

    std::vector<int> l1_entities;
    std::map<int, int> l1_index;
    auto l1_add = [&](int e) {
        auto [it, fresh] = l1_index.emplace(e, static_cast<int>(l1_entities.size()));
        if (fresh) l1_entities.push_back(e);
        return it->second;
    };
    plan.root.entity = entity;
    plan.root.self_prev = l1_add(entity);
    for (auto& [rho, members] : sample_groups(entity, 2)) {
        RgcnRelGroup grp;
        grp.directed_rel = rho;
        for (int v : members) grp.members.push_back(l1_add(v));
        plan.root.groups.push_back(std::move(grp));
    }

    std::map<int, int> l0_index;
    auto l0_add = [&](int e) {
        auto [it, fresh] = l0_index.emplace(e, static_cast<int>(plan.level0.size()));
        if (fresh) plan.level0.push_back(e);
        return it->second;
    };
    for (int u : l1_entities) {
        RgcnNode node;
        node.entity = u;
        node.self_prev = l0_add(u);
        for (auto& [rho, members] : sample_groups(u, 1)) {
            RgcnRelGroup grp;
            grp.directed_rel = rho;
            for (int v : members) grp.members.push_back(l0_add(v));
            node.groups.push_back(std::move(grp));
        }
        plan.level1.push_back(std::move(node));
    }
    return plan;
}

namespace {

// pre = W_self^T x_self + sum_groups W_rho^T mean(x_members).
Vec rgcn_node_forward(const RgcnNode& node, const Matrix& self_w, BasisCache& wc,
                      const std::vector<Vec>& prev) {
    Vec pre = matvec_in_out(prev[static_cast<size_t>(node.self_prev)], self_w);
    for (const RgcnRelGroup& grp : node.groups) {
        const double inv = 1.0 / static_cast<double>(grp.members.size());
        Vec mean(prev.front().size(), 0.0);
        for (int m : grp.members) axpy(inv, prev[static_cast<size_t>(m)], mean);
        axpy(1.0, matvec_in_out(mean, wc.get(grp.directed_rel)), pre);
    }
    return pre;
}

void rgcn_node_backward(const RgcnNode& node, const RgcnLayer& layer, BasisCache& wc,
                        const std::vector<Vec>& prev, const Vec& d_pre,
                        Matrix& d_self, std::map<int, Matrix>& d_w_by_rel,
                        std::vector<Vec>& d_prev) {
    matvec_in_out_backward(prev[static_cast<size_t>(node.self_prev)], layer.self_weight,
                           d_pre, d_self, d_prev[static_cast<size_t>(node.self_prev)]);
    for (const RgcnRelGroup& grp : node.groups) {
        const double inv = 1.0 / static_cast<double>(grp.members.size());
        Vec mean(prev.front().size(), 0.0);
        for (int m : grp.members) axpy(inv, prev[static_cast<size_t>(m)], mean);
        const Matrix& w = wc.get(grp.directed_rel);
        Matrix& dw = d_w_by_rel.try_emplace(grp.directed_rel, w.rows, w.cols).first->second;
        Vec d_mean(mean.size(), 0.0);
        matvec_in_out_backward(mean, w, d_pre, dw, d_mean);
        for (int m : grp.members) axpy(inv, d_mean, d_prev[static_cast<size_t>(m)]);
    }
}

// Scatter accumulated per-relation weight gradients onto bases and coefficients.
void distribute_basis_grads(const RgcnLayer& layer, const std::map<int, Matrix>& d_w_by_rel,
                            RgcnLayer& d_layer) {
    for (const auto& [rho, dw] : d_w_by_rel) {
        for (size_t b = 0; b < layer.bases.size(); ++b) {
            const Matrix& basis = layer.bases[b];
            const double c = layer.coeffs.at(rho, static_cast<int>(b));
            double coeff_grad = 0.0;
            double* db = d_layer.bases[b].a.data();
            for (size_t e = 0; e < dw.a.size(); ++e) {
                coeff_grad += dw.a[e] * basis.a[e];
                db[e] += c * dw.a[e];
            }
            d_layer.coeffs.at(rho, static_cast<int>(b)) += coeff_grad;
        }
    }
}

}  // namespace

Vec rgcn_forward(const ModelState& s, const RgcnPlan& plan, RgcnTrace* trace) {
    if (!s.rgcn) throw std::runtime_error("rgcn_forward: model has no R-GCN parameters");
    const RgcnParams& rp = *s.rgcn;
    BasisCache c1(rp.layer1), c2(rp.layer2);

    std::vector<Vec> x0;
    x0.reserve(plan.level0.size());
    for (int e : plan.level0) x0.push_back(embedding_row(s, e));

    std::vector<Vec> h1;
    h1.reserve(plan.level1.size());
    for (const RgcnNode& node : plan.level1) {
        Vec pre = rgcn_node_forward(node, rp.layer1.self_weight, c1, x0);
        Vec h = relu(pre);
        if (trace) {
            trace->pre1.push_back(pre);
            trace->h1.push_back(h);
        }
        h1.push_back(std::move(h));
    }
    Vec pre2 = rgcn_node_forward(plan.root, rp.layer2.self_weight, c2, h1);
    if (trace) trace->pre2 = pre2;
    return relu(pre2);
}

void rgcn_backward(const ModelState& s, const RgcnPlan& plan, const RgcnTrace& trace,
                   const Vec& d_out, GradientBundle& grads) {
    if (!s.rgcn || !grads.d_rgcn)
        throw std::runtime_error("rgcn_backward: missing R-GCN parameters or gradients");
    const RgcnParams& rp = *s.rgcn;
    RgcnParams& dg = *grads.d_rgcn;
    BasisCache c1(rp.layer1), c2(rp.layer2);

    std::vector<Vec> x0;
    x0.reserve(plan.level0.size());
    for (int e : plan.level0) x0.push_back(embedding_row(s, e));

    Vec d_pre2(d_out.size());
    for (size_t i = 0; i < d_out.size(); ++i)
        d_pre2[i] = trace.pre2[i] > 0.0 ? d_out[i] : 0.0;

    std::vector<Vec> d_h1(plan.level1.size(), Vec(trace.h1.front().size(), 0.0));
    std::map<int, Matrix> dw2;
    rgcn_node_backward(plan.root, rp.layer2, c2, trace.h1, d_pre2, dg.layer2.self_weight,
                       dw2, d_h1);
    distribute_basis_grads(rp.layer2, dw2, dg.layer2);

    std::vector<Vec> d_x0(plan.level0.size(), Vec(x0.front().size(), 0.0));
    std::map<int, Matrix> dw1;
    for (size_t i = 0; i < plan.level1.size(); ++i) {
        Vec d_pre1(d_h1[i].size());
        for (size_t j = 0; j < d_h1[i].size(); ++j)
            d_pre1[j] = trace.pre1[i][j] > 0.0 ? d_h1[i][j] : 0.0;
        rgcn_node_backward(plan.level1[i], rp.layer1, c1, x0, d_pre1,
                           dg.layer1.self_weight, dw1, d_x0);
    }
    distribute_basis_grads(rp.layer1, dw1, dg.layer1);

    for (size_t i = 0; i < plan.level0.size(); ++i) {
        double* row = grads.d_entity.row(plan.level0[i]);
        for (size_t j = 0; j < d_x0[i].size(); ++j) row[j] += d_x0[i][j];
    }
}

Vec encode_entity_rgcn(const ModelState& s, const KnowledgeGraph& g, int entity,
                       const HyperParams& hp, uint64_t seed) {
    return rgcn_forward(s, build_rgcn_plan(g, entity, hp, seed), nullptr);
}

// ---------------------------------------------------------------------------
// Relation learners

Vec rel_learner_mlp(const ModelState& s,
                    const std::vector<std::pair<Vec, Vec>>& support_embeds,
                    MlpTrace* trace) {
    if (support_embeds.empty())
        throw std::runtime_error("relation learner: empty support set");
    const int d_enc = s.encoder_dim();
    const double inv_k = 1.0 / static_cast<double>(support_embeds.size());
    Vec r(static_cast<size_t>(d_enc), 0.0);
    for (const auto& [h, t] : support_embeds) {
        if (static_cast<int>(h.size()) != d_enc || static_cast<int>(t.size()) != d_enc)
            throw std::invalid_argument("relation learner: support embedding has wrong size");
        Vec z;
        z.reserve(h.size() + t.size());
        z.insert(z.end(), h.begin(), h.end());
        z.insert(z.end(), t.begin(), t.end());
        Vec a1 = matvec_in_out(z, s.w1);
        for (size_t i = 0; i < a1.size(); ++i) a1[i] += s.b1[i];
        Vec h1 = relu(a1);
        Vec out = matvec_in_out(h1, s.w2);
        for (size_t i = 0; i < out.size(); ++i) out[i] += s.b2[i];
        axpy(1.0, out, r);
        if (trace) {
            trace->z.push_back(std::move(z));
            trace->a1.push_back(std::move(a1));
            trace->h1.push_back(std::move(h1));
        }
    }
    for (double& v : r) v *= inv_k;
    return r;
}

void rel_learner_mlp_backward(const ModelState& s, const MlpTrace& trace, const Vec& d_r,
                              GradientBundle& grads,
                              std::vector<std::pair<Vec, Vec>>* d_support) {
    const size_t k = trace.z.size();
    if (k == 0) throw std::logic_error("relation learner backward: empty trace");
    const size_t d_enc = static_cast<size_t>(s.encoder_dim());
    Vec d_out(d_r.size());
    const double inv_k = 1.0 / static_cast<double>(k);
    for (size_t i = 0; i < d_r.size(); ++i) d_out[i] = d_r[i] * inv_k;

    for (size_t p = 0; p < k; ++p) {
        for (size_t i = 0; i < d_out.size(); ++i) grads.d_b2[i] += d_out[i];
        Vec d_h1(trace.h1[p].size(), 0.0);
        matvec_in_out_backward(trace.h1[p], s.w2, d_out, grads.d_w2, d_h1);
        Vec d_a1(d_h1.size());
        for (size_t i = 0; i < d_h1.size(); ++i)
            d_a1[i] = trace.a1[p][i] > 0.0 ? d_h1[i] : 0.0;
        for (size_t i = 0; i < d_a1.size(); ++i) grads.d_b1[i] += d_a1[i];
        Vec d_z(trace.z[p].size(), 0.0);
        matvec_in_out_backward(trace.z[p], s.w1, d_a1, grads.d_w1, d_z);
        if (d_support)
            d_support->emplace_back(Vec(d_z.begin(), d_z.begin() + d_enc),
                                    Vec(d_z.begin() + d_enc, d_z.end()));
    }
}

Vec relation_embed(const ModelState& s, const FewShotTask& task, const EncoderContext& ctx) {
    switch (s.variant) {
        case Variant::SharedEmbed:
        case Variant::ZeroShot:
            return s.shared_relation;
        case Variant::MetaR:
        case Variant::RGCN: {
            if (task.support.empty())
                throw std::runtime_error("relation_embed: relation " +
                                         std::to_string(task.relation) +
                                         " has an empty support set");
            std::vector<std::pair<Vec, Vec>> embeds;
            embeds.reserve(task.support.size());
            for (const Pair& p : task.support)
                embeds.emplace_back(encode_one(s, p.head, ctx), encode_one(s, p.tail, ctx));
            return rel_learner_mlp(s, embeds, nullptr);
        }
    }
    throw std::logic_error("relation_embed: bad variant");
}

// ---------------------------------------------------------------------------
// Decoder and loss

double transe_distance(const Vec& h, const Vec& r, const Vec& t, Norm norm) {
    if (h.size() != r.size() || t.size() != r.size())
        throw std::invalid_argument("transe_distance: dimension mismatch");
    Vec u(r.size());
    for (size_t i = 0; i < r.size(); ++i) u[i] = h[i] + r[i] - t[i];
    return norm == Norm::L2 ? norm_l2(u) : norm_l1(u);
}

Vec transe_direction(const Vec& h, const Vec& r, const Vec& t, Norm norm) {
    if (h.size() != r.size() || t.size() != r.size())
        throw std::invalid_argument("transe_direction: dimension mismatch");
    Vec u(r.size());
    for (size_t i = 0; i < r.size(); ++i) u[i] = h[i] + r[i] - t[i];
    if (norm == Norm::L2) {
        const double n = norm_l2(u);
        Vec dir(u.size(), 0.0);
        if (n >= kTinyNorm)
            for (size_t i = 0; i < u.size(); ++i) dir[i] = u[i] / n;
        return dir;
    }
    Vec dir(u.size());
    for (size_t i = 0; i < u.size(); ++i)
        dir[i] = u[i] > 0.0 ? 1.0 : (u[i] < 0.0 ? -1.0 : 0.0);
    return dir;
}

MarginLossResult margin_loss(const std::vector<double>& pos_dists,
                             const std::vector<std::vector<double>>& neg_dists,
                             double gamma) {
    if (pos_dists.size() != neg_dists.size())
        throw std::invalid_argument("margin_loss: positive and negative lists disagree");
    MarginLossResult res;
    res.d_pos.assign(pos_dists.size(), 0.0);
    res.d_neg.reserve(neg_dists.size());
    size_t m = 0;
    for (const auto& negs : neg_dists) {
        res.d_neg.emplace_back(negs.size(), 0.0);
        m += negs.size();
    }
    if (m == 0) return res;
    const double inv_m = 1.0 / static_cast<double>(m);
    double total = 0.0;
    for (size_t i = 0; i < pos_dists.size(); ++i) {
        for (size_t j = 0; j < neg_dists[i].size(); ++j) {
            const double z = gamma + pos_dists[i] - neg_dists[i][j];
            if (z > 0.0) {
                total += z;
                res.d_pos[i] += inv_m;
                res.d_neg[i][j] = -inv_m;
            }
        }
    }
    res.loss = total * inv_m;
    return res;
}

// ---------------------------------------------------------------------------
// Episode machinery

namespace {

std::set<Pair> known_positives(const FewShotTask& task) {
    std::set<Pair> pos(task.support.begin(), task.support.end());
    pos.insert(task.queries.begin(), task.queries.end());
    return pos;
}

// g_r = sum_i d_pos[i] * dir(pos_i) + sum_ij d_neg[i][j] * dir(neg_ij).
Vec relation_gradient(const std::vector<Term>& pos, const std::vector<std::vector<Term>>& neg,
                      const MarginLossResult& ml, size_t dim) {
    Vec g(dim, 0.0);
    for (size_t i = 0; i < pos.size(); ++i) {
        if (ml.d_pos[i] != 0.0) axpy(ml.d_pos[i], pos[i].dir, g);
        for (size_t j = 0; j < neg[i].size(); ++j)
            if (ml.d_neg[i][j] != 0.0) axpy(ml.d_neg[i][j], neg[i][j].dir, g);
    }
    return g;
}

}  // namespace

Vec support_gradient_step(const ModelState& s, const FewShotTask& task, const Vec& r,
                          double eta, uint64_t seed, const HyperParams& hp,
                          const EncoderContext& ctx) {
    if (eta < 0.0)
        throw std::invalid_argument("support_gradient_step: eta must be >= 0");
    if (static_cast<int>(r.size()) != s.encoder_dim())
        throw std::invalid_argument("support_gradient_step: relation vector has dimension " +
                                    std::to_string(r.size()) + ", expected " +
                                    std::to_string(s.encoder_dim()));
    if (s.variant == Variant::ZeroShot) return r;
    if (task.support.empty())
        throw std::runtime_error("support_gradient_step: relation " +
                                 std::to_string(task.relation) +
                                 " has an empty support set");

    NegativeBatch negs = sample_negatives(task.support, task.candidates,
                                          known_positives(task), hp.neg_ratio, seed,
                                          task.relation);
    std::map<int, Vec> enc;
    auto ensure = [&](int e) {
        if (!enc.count(e)) enc.emplace(e, encode_one(s, e, ctx));
    };
    for (size_t i = 0; i < task.support.size(); ++i) {
        ensure(task.support[i].head);
        ensure(task.support[i].tail);
        for (int t : negs.tails[i]) ensure(t);
    }

    std::vector<Term> pos;
    std::vector<std::vector<Term>> neg;
    std::vector<double> pos_d;
    std::vector<std::vector<double>> neg_d;
    for (size_t i = 0; i < task.support.size(); ++i) {
        pos.push_back(make_term(enc, r, task.support[i].head, task.support[i].tail, hp.norm));
        pos_d.push_back(pos.back().dist);
        neg.emplace_back();
        neg_d.emplace_back();
        for (int t : negs.tails[i]) {
            neg.back().push_back(make_term(enc, r, task.support[i].head, t, hp.norm));
            neg_d.back().push_back(neg.back().back().dist);
        }
    }
    const MarginLossResult ml = margin_loss(pos_d, neg_d, hp.gamma);
    const Vec g = relation_gradient(pos, neg, ml, r.size());
    Vec out(r.size());
    for (size_t i = 0; i < r.size(); ++i) out[i] = r[i] - eta * g[i];
    return out;
}

double score_query(const ModelState& s, const FewShotTask& task, const Vec& r_prime,
                   int head, int candidate, const HyperParams& hp,
                   const EncoderContext& ctx) {
    if (std::find(task.candidates.begin(), task.candidates.end(), candidate) ==
        task.candidates.end())
        throw std::runtime_error("score_query: entity " + std::to_string(candidate) +
                                 " is not a candidate of relation " +
                                 std::to_string(task.relation));
    const Vec h = encode_one(s, head, ctx);
    const Vec t = encode_one(s, candidate, ctx);
    return -transe_distance(h, r_prime, t, hp.norm);
}

TaskPlan build_task_plan(const ModelState& s, const KnowledgeGraph* g,
                         const FewShotTask& task, const HyperParams& hp, uint64_t seed) {
    TaskPlan plan;
    plan.task = task;
    const bool zero_shot = s.variant == Variant::ZeroShot;
    const std::set<Pair> positives = known_positives(task);
    const auto rel = static_cast<uint64_t>(task.relation);
    if (!zero_shot && !task.support.empty())
        plan.support_negs =
            sample_negatives(task.support, task.candidates, positives, hp.neg_ratio,
                             derive_seed(seed, "supp_neg", rel), task.relation);
    if (!task.queries.empty())
        plan.query_negs =
            sample_negatives(task.queries, task.candidates, positives, hp.neg_ratio,
                             derive_seed(seed, "query_neg", rel), task.relation);

    std::set<int> involved;
    if (!zero_shot) {
        for (size_t i = 0; i < task.support.size(); ++i) {
            involved.insert(task.support[i].head);
            involved.insert(task.support[i].tail);
            for (int t : plan.support_negs.tails[i]) involved.insert(t);
        }
    }
    for (size_t i = 0; i < task.queries.size(); ++i) {
        involved.insert(task.queries[i].head);
        involved.insert(task.queries[i].tail);
        for (int t : plan.query_negs.tails[i]) involved.insert(t);
    }
    plan.involved.assign(involved.begin(), involved.end());

    if (s.variant == Variant::RGCN) {
        if (!g)
            throw std::runtime_error("build_task_plan: R-GCN variant needs the background graph");
        for (int e : plan.involved)
            plan.rgcn_plans.emplace(
                e, build_rgcn_plan(*g, e, hp, derive_seed(seed, "rgcn",
                                                          static_cast<uint64_t>(e))));
    }
    return plan;
}

namespace {

// Forward pass of one episode; when `grads` is given, also the hand-derived
// backward. The inner relation update is part of the forward computation, so
// the returned value already reflects r' = r - eta * grad_r L(support).
double episode_run(const ModelState& s, const TaskPlan& plan, const HyperParams& hp,
                   GradientBundle* grads) {
    const FewShotTask& task = plan.task;
    const bool zero_shot = s.variant == Variant::ZeroShot;
    const bool mlp_variant = s.variant == Variant::MetaR || s.variant == Variant::RGCN;
    const size_t d_enc = static_cast<size_t>(s.encoder_dim());

    std::map<int, Vec> enc;
    std::map<int, RgcnTrace> traces;
    for (int e : plan.involved) {
        if (s.variant == Variant::RGCN) {
            RgcnTrace tr;
            Vec v = rgcn_forward(s, plan.rgcn_plans.at(e), grads ? &tr : nullptr);
            enc.emplace(e, std::move(v));
            if (grads) traces.emplace(e, std::move(tr));
        } else {
            enc.emplace(e, embedding_row(s, e));
        }
    }

    Vec r;
    MlpTrace mlp_trace;
    if (mlp_variant) {
        if (task.support.empty())
            throw std::runtime_error("episode: relation " + std::to_string(task.relation) +
                                     " has an empty support set");
        std::vector<std::pair<Vec, Vec>> embeds;
        embeds.reserve(task.support.size());
        for (const Pair& p : task.support)
            embeds.emplace_back(enc.at(p.head), enc.at(p.tail));
        r = rel_learner_mlp(s, embeds, grads ? &mlp_trace : nullptr);
    } else {
        r = s.shared_relation;
    }

    // Inner step on the support loss.
    std::vector<Term> sup_pos;
    std::vector<std::vector<Term>> sup_neg;
    MarginLossResult sup_ml;
    Vec r_prime = r;
    if (!zero_shot) {
        std::vector<double> pos_d;
        std::vector<std::vector<double>> neg_d;
        for (size_t i = 0; i < task.support.size(); ++i) {
            sup_pos.push_back(
                make_term(enc, r, task.support[i].head, task.support[i].tail, hp.norm));
            pos_d.push_back(sup_pos.back().dist);
            sup_neg.emplace_back();
            neg_d.emplace_back();
            for (int t : plan.support_negs.tails[i]) {
                sup_neg.back().push_back(make_term(enc, r, task.support[i].head, t, hp.norm));
                neg_d.back().push_back(sup_neg.back().back().dist);
            }
        }
        sup_ml = margin_loss(pos_d, neg_d, hp.gamma);
        const Vec g = relation_gradient(sup_pos, sup_neg, sup_ml, d_enc);
        for (size_t i = 0; i < d_enc; ++i) r_prime[i] = r[i] - hp.eta * g[i];
    }

    // Query loss under the updated relation.
    std::vector<Term> qry_pos;
    std::vector<std::vector<Term>> qry_neg;
    std::vector<double> qpos_d;
    std::vector<std::vector<double>> qneg_d;
    const std::vector<int> no_tails;
    for (size_t i = 0; i < task.queries.size(); ++i) {
        qry_pos.push_back(
            make_term(enc, r_prime, task.queries[i].head, task.queries[i].tail, hp.norm));
        qpos_d.push_back(qry_pos.back().dist);
        qry_neg.emplace_back();
        qneg_d.emplace_back();
        const auto& tails =
            i < plan.query_negs.tails.size() ? plan.query_negs.tails[i] : no_tails;
        for (int t : tails) {
            qry_neg.back().push_back(make_term(enc, r_prime, task.queries[i].head, t, hp.norm));
            qneg_d.back().push_back(qry_neg.back().back().dist);
        }
    }
    const MarginLossResult qry_ml = margin_loss(qpos_d, qneg_d, hp.gamma);
    if (!grads) return qry_ml.loss;

    // ---- backward ----
    std::map<int, Vec> d_enc_out;
    auto add_enc = [&](int e, double c, const Vec& v) {
        axpy(c, v, d_enc_out.try_emplace(e, Vec(d_enc, 0.0)).first->second);
    };

    // Query terms: gradient w.r.t. r' and the involved encodings.
    Vec q(d_enc, 0.0);
    for (size_t i = 0; i < qry_pos.size(); ++i) {
        const double cp = qry_ml.d_pos[i];
        if (cp != 0.0) {
            axpy(cp, qry_pos[i].dir, q);
            add_enc(qry_pos[i].head, cp, qry_pos[i].dir);
            add_enc(qry_pos[i].tail, -cp, qry_pos[i].dir);
        }
        for (size_t j = 0; j < qry_neg[i].size(); ++j) {
            const double cn = qry_ml.d_neg[i][j];
            if (cn == 0.0) continue;
            axpy(cn, qry_neg[i][j].dir, q);
            add_enc(qry_neg[i][j].head, cn, qry_neg[i][j].dir);
            add_enc(qry_neg[i][j].tail, -cn, qry_neg[i][j].dir);
        }
    }

    // dL/dr = (I - eta * H_rr) q plus, per support term of the inner gradient,
    // the -eta * (d g / d encoding)^T q corrections. Each active support term
    // with margin coefficient c contributes through the unit-vector Jacobian
    // P/||u|| (P = I - uu^T/||u||^2), which hits r and the head encoding with
    // one sign and the tail encoding with the other. The hinge's active set is
    // treated as locally constant, and the L1 curvature is zero almost
    // everywhere, so only L2 carries second-order terms.
    Vec delta_r = q;
    if (!zero_shot && hp.second_order && hp.eta != 0.0 && hp.norm == Norm::L2) {
        auto curvature = [&](const Term& term, double c) {
            if (c == 0.0 || term.unorm < kTinyNorm) return;
            Vec pq(d_enc);
            const double proj = dot(term.dir, q);
            for (size_t i = 0; i < d_enc; ++i)
                pq[i] = (q[i] - term.dir[i] * proj) / term.unorm;
            axpy(-hp.eta * c, pq, delta_r);
            add_enc(term.head, -hp.eta * c, pq);
            add_enc(term.tail, hp.eta * c, pq);
        };
        for (size_t i = 0; i < sup_pos.size(); ++i) {
            curvature(sup_pos[i], sup_ml.d_pos[i]);
            for (size_t j = 0; j < sup_neg[i].size(); ++j)
                curvature(sup_neg[i][j], sup_ml.d_neg[i][j]);
        }
    }

    // Relation path.
    if (mlp_variant) {
        std::vector<std::pair<Vec, Vec>> d_support;
        rel_learner_mlp_backward(s, mlp_trace, delta_r, *grads, &d_support);
        for (size_t k = 0; k < task.support.size(); ++k) {
            add_enc(task.support[k].head, 1.0, d_support[k].first);
            add_enc(task.support[k].tail, 1.0, d_support[k].second);
        }
    } else {
        axpy(1.0, delta_r, grads->d_shared);
    }

    // Encoder path, ascending entity id.
    for (const auto& [e, v] : d_enc_out) {
        if (s.variant == Variant::RGCN) {
            rgcn_backward(s, plan.rgcn_plans.at(e), traces.at(e), v, *grads);
        } else {
            double* row = grads->d_entity.row(e);
            for (size_t j = 0; j < v.size(); ++j) row[j] += v[j];
        }
    }
    return qry_ml.loss;
}

}  // namespace

double task_loss(const ModelState& s, const TaskPlan& plan, const HyperParams& hp) {
    return episode_run(s, plan, hp, nullptr);
}

double task_loss_backward(const ModelState& s, const TaskPlan& plan, const HyperParams& hp,
                          GradientBundle& grads) {
    return episode_run(s, plan, hp, &grads);
}

// ---------------------------------------------------------------------------
// Pre-trained embeddings

LoadEmbedReport load_pretrained_embeddings(const std::filesystem::path& path,
                                           ModelState& s, bool freeze,
                                           const Vocab& entities) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open embedding file " + path.string());
    std::string line;
    if (!std::getline(in, line))
        throw std::runtime_error(path.string() + ": empty embedding file");

    std::istringstream header(line);
    std::string tag;
    int dim = 0;
    if (!(header >> tag >> dim) || tag != "d" || (header >> std::ws, !header.eof()))
        throw std::runtime_error(path.string() + ":1: expected header \"d <dim>\"");
    if (dim != s.embed_dim())
        throw std::runtime_error(path.string() + ": embedding dimension " +
                                 std::to_string(dim) + " does not match model dimension " +
                                 std::to_string(s.embed_dim()));

    LoadEmbedReport rep;
    std::set<int> seen;
    size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const size_t tab = line.find('\t');
        if (tab == std::string::npos)
            throw std::runtime_error(path.string() + ":" + std::to_string(lineno) +
                                     ": expected \"entity<TAB>values\"");
        const std::string name = line.substr(0, tab);

        std::vector<double> values;
        values.reserve(static_cast<size_t>(dim));
        size_t p = tab + 1;
        while (p < line.size()) {
            while (p < line.size() && std::isspace(static_cast<unsigned char>(line[p]))) ++p;
            if (p >= line.size()) break;
            size_t q = p;
            while (q < line.size() && !std::isspace(static_cast<unsigned char>(line[q]))) ++q;
            double v = 0.0;
            const auto [end, ec] = std::from_chars(line.data() + p, line.data() + q, v);
            if (ec != std::errc() || end != line.data() + q)
                throw std::runtime_error(path.string() + ":" + std::to_string(lineno) +
                                         ": bad float \"" + line.substr(p, q - p) + "\"");
            values.push_back(v);
            p = q;
        }
        if (static_cast<int>(values.size()) != dim)
            throw std::runtime_error(path.string() + ":" + std::to_string(lineno) +
                                     ": expected " + std::to_string(dim) + " values, got " +
                                     std::to_string(values.size()));

        const auto id = entities.find(name);
        if (!id) {
            ++rep.unknown;
            continue;
        }
        double* row = s.entity_embeddings.row(*id);
        std::copy(values.begin(), values.end(), row);
        seen.insert(*id);
    }
    rep.loaded = seen.size();
    rep.missing = static_cast<size_t>(entities.size()) - seen.size();
    if (freeze) s.frozen_entities = true;
    return rep;
}

}  // namespace fewkg
