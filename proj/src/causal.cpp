#include "whatif/causal.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

namespace whatif {

namespace {

// Ridge solution of y on the columns `preds` of z (standardized), returning
// coefficients and mean squared residual.
std::pair<Eigen::VectorXd, double> ridge(const Eigen::MatrixXd& z, const std::vector<std::size_t>& preds,
                                         std::size_t target, double lambda) {
    const auto n = static_cast<double>(z.rows());
    const Eigen::VectorXd y = z.col(static_cast<Eigen::Index>(target));
    if (preds.empty()) return {Eigen::VectorXd(), y.squaredNorm() / n};
    Eigen::MatrixXd x(z.rows(), static_cast<Eigen::Index>(preds.size()));
    for (std::size_t i = 0; i < preds.size(); ++i) x.col(static_cast<Eigen::Index>(i)) = z.col(static_cast<Eigen::Index>(preds[i]));
    Eigen::MatrixXd gram = x.transpose() * x / n;
    gram.diagonal().array() += lambda;
    const Eigen::VectorXd beta = gram.ldlt().solve(x.transpose() * y / n);
    const double resid = (y - x * beta).squaredNorm() / n;
    return {beta, resid};
}

double total_residual(const Eigen::MatrixXd& z, const std::vector<std::size_t>& order, std::size_t n_features,
                      double lambda) {
    double acc = 0.0;
    std::vector<std::size_t> preds;
    for (auto node : order) {
        if (node < n_features) {
            acc += ridge(z, preds, node, lambda).second;
            preds.push_back(node);
        }
    }
    return acc;
}

}  // namespace

bool CausalGraph::is_acyclic() const {
    std::map<std::string, int> indeg;
    std::map<std::string, std::vector<std::string>> out;
    for (const auto& n : nodes) indeg[n] = 0;
    for (const auto& e : edges) {
        ++indeg[e.child];
        out[e.parent].push_back(e.child);
    }
    std::vector<std::string> ready;
    for (const auto& [n, d] : indeg)
        if (d == 0) ready.push_back(n);
    std::size_t seen = 0;
    while (!ready.empty()) {
        const auto n = ready.back();
        ready.pop_back();
        ++seen;
        for (const auto& c : out[n])
            if (--indeg[c] == 0) ready.push_back(c);
    }
    return seen == indeg.size();
}

std::optional<double> CausalGraph::weight(std::string_view parent, std::string_view child) const {
    for (const auto& e : edges)
        if (e.parent == parent && e.child == child) return e.weight;
    return std::nullopt;
}

Json CausalGraph::to_json() const {
    Json es = Json::array();
    for (const auto& e : edges)
        es.push_back({{"parent", e.parent}, {"child", e.child}, {"weight", e.weight}, {"raw_weight", e.raw_weight}});
    return {{"nodes", nodes}, {"order", order}, {"edges", es}};
}

std::string CausalGraph::to_dot() const {
    std::ostringstream os;
    os << "digraph causal {\n";
    for (const auto& n : nodes) os << "  \"" << n << "\";\n";
    for (const auto& e : edges)
        os << "  \"" << e.parent << "\" -> \"" << e.child << "\" [label=\"" << format_short(e.weight, 3)
           << "\", weight=" << format_number(std::abs(e.weight)) << "];\n";
    os << "}\n";
    return os.str();
}

CausalGraph learn_dag(const Eigen::MatrixXd& data, const std::vector<std::string>& names, std::size_t n_features,
                      const CausalConfig& cfg) {
    const auto d = static_cast<std::size_t>(data.cols());
    if (names.size() != d) throw ConfigError("learn_dag: names and columns disagree");
    if (n_features > d) throw ConfigError("learn_dag: more features than columns");
    const std::size_t need = std::max<std::size_t>(30, 3 * d);
    if (static_cast<std::size_t>(data.rows()) < need)
        throw DataError("learn_dag needs at least " + std::to_string(need) + " samples, got " +
                        std::to_string(data.rows()));

    Eigen::MatrixXd z = data;
    Vec sd(d);
    for (std::size_t c = 0; c < d; ++c) {
        auto col = z.col(static_cast<Eigen::Index>(c));
        const double mean = col.mean();
        const double s = std::sqrt((col.array() - mean).square().mean());
        sd[c] = s;
        if (s > 0.0) col = (col.array() - mean) / s;
        else col.setZero();
    }

    // Greedy forward selection on the first target; the causal order is the
    // reverse, so the strongest explainer sits right before the target.
    std::vector<std::size_t> order;
    std::vector<std::size_t> picked;
    if (n_features < d) {
        std::vector<bool> used(n_features, false);
        while (picked.size() < n_features) {
            std::size_t best = n_features;
            double best_resid = std::numeric_limits<double>::infinity();
            for (std::size_t f = 0; f < n_features; ++f) {
                if (used[f]) continue;
                auto trial = picked;
                trial.push_back(f);
                const double r = ridge(z, trial, n_features, cfg.ridge).second;
                if (r < best_resid - 1e-15) {
                    best_resid = r;
                    best = f;
                }
            }
            used[best] = true;
            picked.push_back(best);
        }
        order.assign(picked.rbegin(), picked.rend());
    } else {
        order.resize(n_features);
        std::iota(order.begin(), order.end(), 0);
    }

    if (cfg.order_search && n_features > 1) {
        double current = total_residual(z, order, n_features, cfg.ridge);
        for (bool improved = true; improved;) {
            improved = false;
            for (std::size_t i = 0; i + 1 < n_features; ++i) {
                std::swap(order[i], order[i + 1]);
                const double trial = total_residual(z, order, n_features, cfg.ridge);
                if (trial < current - 1e-12) {
                    current = trial;
                    improved = true;
                } else {
                    std::swap(order[i], order[i + 1]);
                }
            }
        }
    }
    for (std::size_t t = n_features; t < d; ++t) order.push_back(t);

    CausalGraph g;
    g.nodes = names;
    for (auto o : order) g.order.push_back(names[o]);
    std::vector<std::size_t> preds;
    for (auto node : order) {
        // Targets regress on features only, so they stay sinks.
        const auto& parents = preds;
        if (!parents.empty() && sd[node] > 0.0) {
            const Eigen::VectorXd beta = ridge(z, parents, node, cfg.ridge).first;
            for (std::size_t i = 0; i < parents.size(); ++i) {
                const double w = beta[static_cast<Eigen::Index>(i)];
                if (std::abs(w) < cfg.prune_threshold) continue;
                const auto p = parents[i];
                g.edges.push_back({names[p], names[node], w, sd[p] > 0.0 ? w * sd[node] / sd[p] : 0.0});
            }
        }
        if (node < n_features) preds.push_back(node);
    }
    return g;
}

Json ConsistencyReport::to_json() const {
    Json es = Json::array();
    for (const auto& e : edges) es.push_back({{"parent", e.parent}, {"child", e.child}, {"real", e.real}, {"synth", e.synth}});
    return {{"score", score}, {"edges", es}, {"only_real", only_real}, {"only_synth", only_synth}};
}

ConsistencyReport consistency_score(const CausalGraph& real, const CausalGraph& synth) {
    const std::set<std::string> a(real.nodes.begin(), real.nodes.end());
    const std::set<std::string> b(synth.nodes.begin(), synth.nodes.end());
    if (a != b) throw ConfigError("consistency_score: graphs have different node sets");

    std::map<std::pair<std::string, std::string>, std::pair<double, double>> merged;
    for (const auto& e : real.edges) merged[{e.parent, e.child}].first = e.weight;
    for (const auto& e : synth.edges) merged[{e.parent, e.child}].second = e.weight;

    ConsistencyReport r;
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (const auto& [key, w] : merged) {
        r.edges.push_back({key.first, key.second, w.first, w.second});
        dot += w.first * w.second;
        na += w.first * w.first;
        nb += w.second * w.second;
        const std::string label = key.first + "->" + key.second;
        if (!synth.weight(key.first, key.second)) r.only_real.push_back(label);
        if (!real.weight(key.first, key.second)) r.only_synth.push_back(label);
    }
    const bool identical = std::all_of(merged.begin(), merged.end(),
                                       [](const auto& kv) { return kv.second.first == kv.second.second; });
    if (na == 0.0 || nb == 0.0) r.score = 0.0;
    else if (identical) r.score = 1.0;
    else r.score = std::clamp(dot / std::sqrt(na * nb), 0.0, 1.0);
    return r;
}

std::vector<std::pair<std::string, double>> influence_summary(const CausalGraph& g, std::string_view target) {
    if (std::find(g.nodes.begin(), g.nodes.end(), target) == g.nodes.end())
        throw ConfigError("unknown target '" + std::string(target) + "'");
    std::vector<std::pair<std::string, double>> out;
    for (const auto& e : g.edges)
        if (e.child == target) out.emplace_back(e.parent, e.weight);
    std::sort(out.begin(), out.end(), [](const auto& x, const auto& y) {
        if (std::abs(x.second) != std::abs(y.second)) return std::abs(x.second) > std::abs(y.second);
        return x.first < y.first;
    });
    return out;
}

}  // namespace whatif
