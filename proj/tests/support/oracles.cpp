#include "support/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <set>
#include <stdexcept>

namespace oracle {

using fewkg::KnowledgeGraph;
using fewkg::Matrix;
using fewkg::Pair;
using fewkg::Triple;
using fewkg::Vec;

std::vector<int> bfs_lcc(const KnowledgeGraph& g) {
    const int n = g.entities.size();
    std::vector<std::vector<int>> nbr(static_cast<size_t>(n));
    for (const Triple& t : g.triples) {
        nbr[static_cast<size_t>(t.head)].push_back(t.tail);
        nbr[static_cast<size_t>(t.tail)].push_back(t.head);
    }
    std::vector<char> seen(static_cast<size_t>(n), 0);
    std::vector<int> best;
    for (int start = 0; start < n; ++start) {
        if (seen[static_cast<size_t>(start)]) continue;
        std::vector<int> comp;
        std::queue<int> q;
        q.push(start);
        seen[static_cast<size_t>(start)] = 1;
        while (!q.empty()) {
            const int u = q.front();
            q.pop();
            comp.push_back(u);
            for (int v : nbr[static_cast<size_t>(u)]) {
                if (!seen[static_cast<size_t>(v)]) {
                    seen[static_cast<size_t>(v)] = 1;
                    q.push(v);
                }
            }
        }
        // Strictly larger wins; the first (smallest start id) wins ties.
        if (comp.size() > best.size()) best = std::move(comp);
    }
    std::sort(best.begin(), best.end());
    return best;
}

double modularity_dense(const KnowledgeGraph& g, const std::vector<int>& lcc,
                        const std::vector<int>& assignment) {
    const size_t n = lcc.size();
    std::vector<int> idx_of(static_cast<size_t>(g.entities.size()), -1);
    for (size_t i = 0; i < n; ++i) idx_of[static_cast<size_t>(lcc[i])] = static_cast<int>(i);

    std::vector<std::vector<double>> a(n, std::vector<double>(n, 0.0));
    for (const Triple& t : g.triples) {
        const int hi = idx_of[static_cast<size_t>(t.head)];
        const int ti = idx_of[static_cast<size_t>(t.tail)];
        if (hi < 0 || ti < 0) continue;
        if (hi == ti) {
            a[static_cast<size_t>(hi)][static_cast<size_t>(hi)] += 2.0;
        } else {
            a[static_cast<size_t>(hi)][static_cast<size_t>(ti)] += 1.0;
            a[static_cast<size_t>(ti)][static_cast<size_t>(hi)] += 1.0;
        }
    }

    std::vector<double> k(n, 0.0);
    double m2 = 0.0;
    for (size_t u = 0; u < n; ++u) {
        for (size_t v = 0; v < n; ++v) k[u] += a[u][v];
        m2 += k[u];
    }
    if (m2 <= 0.0) throw std::runtime_error("modularity_dense: no edges");

    double q = 0.0;
    for (size_t u = 0; u < n; ++u) {
        const int cu = assignment[static_cast<size_t>(lcc[u])];
        for (size_t v = 0; v < n; ++v) {
            const int cv = assignment[static_cast<size_t>(lcc[v])];
            if (cu == cv) q += a[u][v] - k[u] * k[v] / m2;
        }
    }
    return q / m2;
}

double best_partition_bruteforce(const KnowledgeGraph& g, const std::vector<int>& lcc,
                                 std::vector<int>* best_assignment) {
    const size_t n = lcc.size();
    if (n == 0) throw std::invalid_argument("best_partition_bruteforce: empty component");
    if (n > 12) throw std::invalid_argument("best_partition_bruteforce: component too large");

    std::vector<int> rgs(n, 0);  // restricted growth string: rgs[i] <= 1 + max(rgs[0..i-1])
    std::vector<int> assignment(static_cast<size_t>(g.entities.size()), -1);
    double best_q = -2.0;
    std::vector<int> best_rgs;

    // Enumerate set partitions in restricted-growth-string order.
    while (true) {
        for (size_t i = 0; i < n; ++i) assignment[static_cast<size_t>(lcc[i])] = rgs[i];
        const double q = modularity_dense(g, lcc, assignment);
        if (q > best_q) {
            best_q = q;
            best_rgs = rgs;
        }

        // Next string: increment from the right where allowed.
        size_t i = n;
        while (i-- > 1) {
            int max_prefix = 0;
            for (size_t j = 0; j < i; ++j) max_prefix = std::max(max_prefix, rgs[j]);
            if (rgs[i] <= max_prefix) {
                ++rgs[i];
                for (size_t j = i + 1; j < n; ++j) rgs[j] = 0;
                break;
            }
            if (i == 1) {
                i = 0;
                break;
            }
        }
        if (i == 0) break;  // wrapped: all strings seen
    }

    if (best_assignment) {
        best_assignment->assign(static_cast<size_t>(g.entities.size()), -1);
        for (size_t i = 0; i < n; ++i)
            (*best_assignment)[static_cast<size_t>(lcc[i])] = best_rgs[i];
    }
    return best_q;
}

int rank_by_sorting(const std::vector<double>& scores, size_t true_index) {
    std::vector<size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return a < b;
    });
    for (size_t pos = 0; pos < order.size(); ++pos)
        if (order[pos] == true_index) return static_cast<int>(pos) + 1;
    throw std::logic_error("rank_by_sorting: true index not found");
}

std::vector<FdFailure> check_gradient(const std::function<double()>& f, double* x,
                                      size_t n, const double* analytic,
                                      const std::string& label, double step, double tol) {
    std::vector<FdFailure> failures;
    for (size_t i = 0; i < n; ++i) {
        const double saved = x[i];
        x[i] = saved + step;
        const double fp = f();
        x[i] = saved - step;
        const double fm = f();
        x[i] = saved;
        const double numeric = (fp - fm) / (2.0 * step);
        const double bound = tol * std::max({std::abs(analytic[i]), std::abs(numeric), 1e-6});
        if (std::abs(analytic[i] - numeric) > bound)
            failures.push_back({label, i, analytic[i], numeric});
    }
    return failures;
}

void transe_reference_gradient(const Matrix& table, const Vec& relation,
                               const std::vector<Pair>& positives,
                               const std::vector<std::vector<int>>& negative_tails,
                               double gamma, Matrix& d_table) {
    const int d = table.cols;
    size_t pairs = 0;
    for (const auto& negs : negative_tails) pairs += negs.size();
    if (pairs == 0) return;
    const double w = 1.0 / static_cast<double>(pairs);

    auto dist = [&](int h, int t) {
        double s = 0.0;
        for (int i = 0; i < d; ++i) {
            const double u = table.at(h, i) + relation[static_cast<size_t>(i)] - table.at(t, i);
            s += u * u;
        }
        return std::sqrt(s);
    };
    auto unit = [&](int h, int t) {
        Vec u(static_cast<size_t>(d));
        double norm = 0.0;
        for (int i = 0; i < d; ++i) {
            u[static_cast<size_t>(i)] =
                table.at(h, i) + relation[static_cast<size_t>(i)] - table.at(t, i);
            norm += u[static_cast<size_t>(i)] * u[static_cast<size_t>(i)];
        }
        norm = std::sqrt(norm);
        if (norm < 1e-12) return Vec(static_cast<size_t>(d), 0.0);
        for (double& c : u) c /= norm;
        return u;
    };

    for (size_t p = 0; p < positives.size(); ++p) {
        const int h = positives[p].head;
        const int t = positives[p].tail;
        const double dp = dist(h, t);
        for (int neg : negative_tails[p]) {
            if (gamma + dp - dist(h, neg) <= 0.0) continue;
            const Vec up = unit(h, t);
            const Vec un = unit(h, neg);
            for (int i = 0; i < d; ++i) {
                // pull the positive pair together
                d_table.at(h, i) += w * up[static_cast<size_t>(i)];
                d_table.at(t, i) -= w * up[static_cast<size_t>(i)];
                // push the negative pair apart
                d_table.at(h, i) -= w * un[static_cast<size_t>(i)];
                d_table.at(neg, i) += w * un[static_cast<size_t>(i)];
            }
        }
    }
}

void adam_reference_step(Vec& p, const Vec& g, Vec& m, Vec& v, int64_t t, double lr,
                         double beta1, double beta2, double eps) {
    for (size_t i = 0; i < p.size(); ++i) {
        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
        const double mhat = m[i] / (1.0 - std::pow(beta1, static_cast<double>(t)));
        const double vhat = v[i] / (1.0 - std::pow(beta2, static_cast<double>(t)));
        p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
}

}  // namespace oracle
