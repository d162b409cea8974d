#include "whatif/models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace whatif {

namespace {

struct SplitChoice {
    int feature = -1;
    double threshold = 0.0;
    double gain = 0.0;
};

class TreeBuilder {
public:
    TreeBuilder(const Eigen::MatrixXd& x, std::span<const double> y, const TreeParams& p, std::mt19937_64* rng)
        : x_(x), y_(y), p_(p), rng_(rng) {}

    std::vector<TreeNode> build(std::vector<std::size_t> rows) {
        grow(std::move(rows), 0);
        return std::move(nodes_);
    }

private:
    int grow(std::vector<std::size_t> rows, int depth) {
        double sum = 0.0;
        for (auto r : rows) sum += y_[r];
        const int id = static_cast<int>(nodes_.size());
        nodes_.push_back({});
        nodes_[static_cast<std::size_t>(id)].value = sum / static_cast<double>(rows.size());

        const std::size_t min_leaf = std::max<std::size_t>(1, p_.min_samples_leaf);
        if (depth >= p_.max_depth || rows.size() < 2 * min_leaf) return id;
        const SplitChoice best = find_split(rows, sum, min_leaf);
        if (best.feature < 0) return id;

        std::vector<std::size_t> left, right;
        for (auto r : rows) {
            if (x_(static_cast<Eigen::Index>(r), best.feature) <= best.threshold) left.push_back(r);
            else right.push_back(r);
        }
        rows.clear();
        rows.shrink_to_fit();
        const int l = grow(std::move(left), depth + 1);
        const int r = grow(std::move(right), depth + 1);
        auto& node = nodes_[static_cast<std::size_t>(id)];
        node.feature = best.feature;
        node.threshold = best.threshold;
        node.left = l;
        node.right = r;
        return id;
    }

    std::vector<int> candidate_features() {
        const int d = static_cast<int>(x_.cols());
        std::vector<int> feats(static_cast<std::size_t>(d));
        std::iota(feats.begin(), feats.end(), 0);
        if (p_.max_features == 0 || p_.max_features >= feats.size() || rng_ == nullptr) return feats;
        for (std::size_t i = 0; i < p_.max_features; ++i) {
            const std::size_t j = i + static_cast<std::size_t>((*rng_)() % (feats.size() - i));
            std::swap(feats[i], feats[j]);
        }
        feats.resize(p_.max_features);
        std::sort(feats.begin(), feats.end());
        return feats;
    }

    SplitChoice find_split(const std::vector<std::size_t>& rows, double total, std::size_t min_leaf) {
        const std::size_t m = rows.size();
        double total_sq = 0.0;
        for (auto r : rows) total_sq += y_[r] * y_[r];
        const double parent = total * total / static_cast<double>(m);
        const double eps = 1e-12 * std::max(1.0, total_sq);

        SplitChoice best;
        best.gain = eps;
        std::vector<std::pair<double, double>> pts(m);
        for (int f : candidate_features()) {
            for (std::size_t i = 0; i < m; ++i)
                pts[i] = {x_(static_cast<Eigen::Index>(rows[i]), f), y_[rows[i]]};
            std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
            double left_sum = 0.0;
            for (std::size_t i = 0; i + 1 < m; ++i) {
                left_sum += pts[i].second;
                const std::size_t nl = i + 1, nr = m - nl;
                if (nl < min_leaf) continue;
                if (nr < min_leaf) break;
                if (!(pts[i].first < pts[i + 1].first)) continue;
                const double right_sum = total - left_sum;
                const double gain = left_sum * left_sum / static_cast<double>(nl) +
                                    right_sum * right_sum / static_cast<double>(nr) - parent;
                if (gain > best.gain) {
                    double thr = 0.5 * (pts[i].first + pts[i + 1].first);
                    if (!(thr < pts[i + 1].first)) thr = pts[i].first;
                    best = {f, thr, gain};
                }
            }
        }
        return best;
    }

    const Eigen::MatrixXd& x_;
    std::span<const double> y_;
    const TreeParams& p_;
    std::mt19937_64* rng_;
    std::vector<TreeNode> nodes_;
};

std::vector<std::string> names_of(const std::vector<ColumnSchema>& cols) {
    std::vector<std::string> out;
    for (const auto& c : cols) out.push_back(c.name);
    return out;
}

std::string schema_hash_of(const PreprocessedDataset& ds) {
    auto cols = ds.features;
    cols.insert(cols.end(), ds.targets.begin(), ds.targets.end());
    return sha256_hex(schema_to_json(cols).dump());
}

Vec row_of(const Eigen::MatrixXd& x, Eigen::Index r) {
    Vec v(static_cast<std::size_t>(x.cols()));
    for (Eigen::Index c = 0; c < x.cols(); ++c) v[static_cast<std::size_t>(c)] = x(r, c);
    return v;
}

}  // namespace

RegressionTree::RegressionTree(std::vector<TreeNode> nodes, int max_depth)
    : nodes_(std::move(nodes)), max_depth_(max_depth) {
    if (nodes_.empty()) throw ConfigError("regression tree needs at least one node");
    for (const auto& n : nodes_) {
        if (n.is_leaf()) continue;
        const auto sz = static_cast<int>(nodes_.size());
        if (n.left <= 0 || n.right <= 0 || n.left >= sz || n.right >= sz)
            throw ConfigError("regression tree has a dangling child index");
    }
}

RegressionTree RegressionTree::leaf(double value) {
    TreeNode n;
    n.value = value;
    return RegressionTree({n}, 0);
}

RegressionTree RegressionTree::fit(const Eigen::MatrixXd& x, std::span<const double> y,
                                   std::span<const std::size_t> rows, const TreeParams& params,
                                   std::mt19937_64* rng) {
    if (rows.empty()) throw ConfigError("cannot fit a tree on zero rows");
    if (params.max_depth < 0) throw ConfigError("max_depth must be non-negative");
    TreeBuilder b(x, y, params, rng);
    RegressionTree t;
    t.nodes_ = b.build(std::vector<std::size_t>(rows.begin(), rows.end()));
    t.max_depth_ = params.max_depth;
    return t;
}

double RegressionTree::predict(std::span<const double> x) const {
    std::size_t i = 0;
    while (!nodes_[i].is_leaf()) {
        const auto& n = nodes_[i];
        i = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
    }
    return nodes_[i].value;
}

int RegressionTree::depth() const {
    std::vector<std::pair<std::size_t, int>> stack{{0, 0}};
    int deepest = 0;
    while (!stack.empty()) {
        auto [i, d] = stack.back();
        stack.pop_back();
        deepest = std::max(deepest, d);
        if (!nodes_[i].is_leaf()) {
            stack.emplace_back(static_cast<std::size_t>(nodes_[i].left), d + 1);
            stack.emplace_back(static_cast<std::size_t>(nodes_[i].right), d + 1);
        }
    }
    return deepest;
}

Json RegressionTree::to_json() const {
    Json nodes = Json::array();
    for (const auto& n : nodes_) {
        if (n.is_leaf()) nodes.push_back(Json::array({n.value}));
        else nodes.push_back(Json::array({n.feature, n.threshold, n.left, n.right, n.value}));
    }
    return {{"max_depth", max_depth_}, {"nodes", nodes}};
}

RegressionTree RegressionTree::from_json(const Json& j) {
    std::vector<TreeNode> nodes;
    for (const auto& n : j.at("nodes")) {
        TreeNode t;
        if (n.size() == 1) {
            t.value = n[0].get<double>();
        } else {
            t.feature = n[0].get<int>();
            t.threshold = n[1].get<double>();
            t.left = n[2].get<int>();
            t.right = n[3].get<int>();
            t.value = n[4].get<double>();
        }
        nodes.push_back(t);
    }
    return RegressionTree(std::move(nodes), j.at("max_depth").get<int>());
}

BoostedPredictor::BoostedPredictor(std::vector<std::string> features, std::vector<std::string> targets,
                                   BoostParams params, Vec base_score,
                                   std::vector<std::vector<RegressionTree>> trees, std::vector<Vec> train_mse,
                                   std::string schema_hash)
    : features_(std::move(features)),
      targets_(std::move(targets)),
      params_(params),
      base_score_(std::move(base_score)),
      trees_(std::move(trees)),
      train_mse_(std::move(train_mse)),
      schema_hash_(std::move(schema_hash)) {
    if (base_score_.size() != targets_.size() || trees_.size() != targets_.size())
        throw ConfigError("predictor target dimensions disagree");
    hash_ = sha256_hex(to_json().dump());
}

double BoostedPredictor::predict_target(std::size_t t, std::span<const double> x) const {
    if (x.size() != features_.size())
        throw ConfigError("predict: expected " + std::to_string(features_.size()) + " features, got " +
                          std::to_string(x.size()));
    double acc = 0.0;
    for (const auto& tree : trees_[t]) acc += tree.predict(x);
    return base_score_[t] + params_.learning_rate * acc;
}

Vec BoostedPredictor::predict(std::span<const double> x) const {
    Vec out(targets_.size());
    for (std::size_t t = 0; t < targets_.size(); ++t) out[t] = predict_target(t, x);
    return out;
}

Json BoostedPredictor::to_json() const {
    Json trees = Json::array();
    for (const auto& per_target : trees_) {
        Json arr = Json::array();
        for (const auto& t : per_target) arr.push_back(t.to_json());
        trees.push_back(std::move(arr));
    }
    return {{"format", "whatif-boosted-predictor"},
            {"version", 1},
            {"features", features_},
            {"targets", targets_},
            {"schema_hash", schema_hash_},
            {"params",
             {{"n_rounds", params_.n_rounds},
              {"max_depth", params_.max_depth},
              {"learning_rate", params_.learning_rate},
              {"seed", params_.seed}}},
            {"base_score", base_score_},
            {"train_mse", train_mse_},
            {"trees", trees}};
}

BoostedPredictor BoostedPredictor::from_json(const Json& j) {
    if (j.value("format", "") != "whatif-boosted-predictor" || j.value("version", 0) != 1)
        throw ConfigError("unsupported predictor document");
    BoostParams p;
    const auto& pj = j.at("params");
    p.n_rounds = pj.at("n_rounds").get<int>();
    p.max_depth = pj.at("max_depth").get<int>();
    p.learning_rate = pj.at("learning_rate").get<double>();
    p.seed = pj.at("seed").get<std::uint64_t>();
    std::vector<std::vector<RegressionTree>> trees;
    for (const auto& per_target : j.at("trees")) {
        std::vector<RegressionTree> ts;
        for (const auto& t : per_target) ts.push_back(RegressionTree::from_json(t));
        trees.push_back(std::move(ts));
    }
    return BoostedPredictor(j.at("features").get<std::vector<std::string>>(),
                            j.at("targets").get<std::vector<std::string>>(), p,
                            j.at("base_score").get<Vec>(), std::move(trees),
                            j.at("train_mse").get<std::vector<Vec>>(), j.at("schema_hash").get<std::string>());
}

BoostedPredictor fit_boosted(const PreprocessedDataset& train, const BoostParams& params) {
    if (params.n_rounds < 1) throw ConfigError("n_rounds must be >= 1", "n_rounds");
    if (params.max_depth < 1) throw ConfigError("max_depth must be >= 1", "max_depth");
    if (!(params.learning_rate > 0.0 && params.learning_rate <= 1.0))
        throw ConfigError("learning_rate must be in (0, 1]", "learning_rate");
    const auto n = static_cast<std::size_t>(train.rows());
    if (n == 0) throw DataError("cannot fit on an empty training set");
    for (const auto& t : train.targets)
        if (t.kind != ColumnKind::Numeric) throw DataError("target '" + t.name + "' is not numeric");

    std::vector<std::size_t> rows(n);
    std::iota(rows.begin(), rows.end(), 0);
    const TreeParams tp{params.max_depth, 1, 0};
    std::vector<Vec> xrows;
    for (std::size_t i = 0; i < n; ++i) xrows.push_back(row_of(train.x, static_cast<Eigen::Index>(i)));

    Vec base;
    std::vector<std::vector<RegressionTree>> all_trees;
    std::vector<Vec> mse_history;
    for (Eigen::Index t = 0; t < train.y.cols(); ++t) {
        const Eigen::VectorXd y = train.y.col(t);
        const double mean = y.mean();
        base.push_back(mean);
        Vec pred(n, mean), resid(n);
        auto mse = [&] {
            double s = 0.0;
            for (std::size_t i = 0; i < n; ++i) s += (y[static_cast<Eigen::Index>(i)] - pred[i]) * (y[static_cast<Eigen::Index>(i)] - pred[i]);
            return s / static_cast<double>(n);
        };
        Vec history{mse()};
        std::vector<RegressionTree> trees;
        for (int round = 0; round < params.n_rounds; ++round) {
            for (std::size_t i = 0; i < n; ++i) resid[i] = y[static_cast<Eigen::Index>(i)] - pred[i];
            auto tree = RegressionTree::fit(train.x, resid, rows, tp);
            for (std::size_t i = 0; i < n; ++i)
                pred[i] += params.learning_rate * tree.predict(xrows[i]);
            trees.push_back(std::move(tree));
            history.push_back(mse());
        }
        all_trees.push_back(std::move(trees));
        mse_history.push_back(std::move(history));
    }
    return BoostedPredictor(names_of(train.features), names_of(train.targets), params, std::move(base),
                            std::move(all_trees), std::move(mse_history), schema_hash_of(train));
}

UncertaintyForest::UncertaintyForest(std::vector<std::vector<RegressionTree>> trees) : trees_(std::move(trees)) {
    for (const auto& t : trees_)
        if (t.size() != trees_.front().size()) throw ConfigError("forest targets hold different tree counts");
}

Vec UncertaintyForest::tree_predictions(std::size_t target, std::span<const double> x) const {
    Vec out;
    out.reserve(trees_.at(target).size());
    for (const auto& t : trees_[target]) out.push_back(t.predict(x));
    return out;
}

std::vector<UqEstimate> UncertaintyForest::predict_with_uncertainty(std::span<const double> x) const {
    if (n_trees() < 2) throw ConfigError("uncertainty needs at least 2 trees");
    std::vector<UqEstimate> out;
    for (std::size_t t = 0; t < trees_.size(); ++t) {
        const Vec p = tree_predictions(t, x);
        const double k = static_cast<double>(p.size());
        const double mean = std::accumulate(p.begin(), p.end(), 0.0) / k;
        double ss = 0.0;
        for (double v : p) ss += (v - mean) * (v - mean);
        const double sd = std::sqrt(ss / (k - 1.0));
        out.push_back({mean, sd, mean - kIntervalZ * sd, mean + kIntervalZ * sd});
    }
    return out;
}

Json UncertaintyForest::to_json() const {
    Json trees = Json::array();
    for (const auto& per_target : trees_) {
        Json arr = Json::array();
        for (const auto& t : per_target) arr.push_back(t.to_json());
        trees.push_back(std::move(arr));
    }
    return {{"format", "whatif-uncertainty-forest"}, {"version", 1}, {"trees", trees}};
}

std::string UncertaintyForest::hash() const { return sha256_hex(to_json().dump()); }

UncertaintyForest fit_forest(const PreprocessedDataset& train, const ForestParams& params) {
    if (params.n_trees < 1) throw ConfigError("n_trees must be >= 1", "n_trees");
    const auto n = static_cast<std::size_t>(train.rows());
    if (n == 0) throw DataError("cannot fit on an empty training set");
    const TreeParams tp{params.max_depth, params.min_samples_leaf, params.max_features};
    std::vector<std::vector<RegressionTree>> all;
    for (Eigen::Index t = 0; t < train.y.cols(); ++t) {
        const Eigen::VectorXd yv = train.y.col(t);
        const Vec y(yv.data(), yv.data() + yv.size());
        std::vector<RegressionTree> trees;
        for (int i = 0; i < params.n_trees; ++i) {
            std::mt19937_64 rng(mix_seed(params.seed, static_cast<std::uint64_t>(t) * 1'000'003ULL +
                                                          static_cast<std::uint64_t>(i)));
            std::vector<std::size_t> boot(n);
            for (auto& r : boot) r = static_cast<std::size_t>(rng() % n);
            trees.push_back(RegressionTree::fit(train.x, y, boot, tp, &rng));
        }
        all.push_back(std::move(trees));
    }
    return UncertaintyForest(std::move(all));
}

}  // namespace whatif
