#include "whatif/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

namespace whatif {

double average_path_length(double m) {
    if (m <= 1.0) return 0.0;
    const double h = std::log(m - 1.0) + kEulerGamma;
    return 2.0 * h - 2.0 * (m - 1.0) / m;
}

double IsolationTree::path_length(std::span<const double> x) const {
    std::size_t i = 0;
    double depth = 0.0;
    while (nodes_[i].feature >= 0) {
        const auto& n = nodes_[i];
        i = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] < n.split ? n.left : n.right);
        depth += 1.0;
    }
    return depth + average_path_length(static_cast<double>(nodes_[i].size));
}

IsolationForest::IsolationForest(std::vector<IsolationTree> trees, std::size_t psi, std::size_t dims)
    : trees_(std::move(trees)), psi_(psi), dims_(dims) {
    if (trees_.empty()) throw ConfigError("isolation forest needs at least one tree");
}

int IsolationForest::height_limit() const {
    return static_cast<int>(std::ceil(std::log2(static_cast<double>(std::max<std::size_t>(psi_, 2)))));
}

double IsolationForest::mean_path_length(std::span<const double> x) const {
    if (x.size() != dims_) throw ConfigError("anomaly score: dimension mismatch");
    double acc = 0.0;
    for (const auto& t : trees_) acc += t.path_length(x);
    return acc / static_cast<double>(trees_.size());
}

double IsolationForest::anomaly_score(std::span<const double> x) const {
    const double c = average_path_length(static_cast<double>(psi_));
    const double h = mean_path_length(x);
    if (c <= 0.0) return 0.5;
    return std::pow(2.0, -h / c);
}

namespace {

class IsolationBuilder {
public:
    IsolationBuilder(const Eigen::MatrixXd& x, int limit, std::mt19937_64& rng) : x_(x), limit_(limit), rng_(rng) {}

    std::vector<IsolationNode> build(std::vector<std::size_t> rows) {
        grow(std::move(rows), 0);
        return std::move(nodes_);
    }

private:
    int grow(std::vector<std::size_t> rows, int depth) {
        const int id = static_cast<int>(nodes_.size());
        nodes_.push_back({});
        nodes_.back().size = rows.size();
        if (depth >= limit_ || rows.size() <= 1) return id;

        std::vector<int> splittable;
        Vec lo(static_cast<std::size_t>(x_.cols())), hi(static_cast<std::size_t>(x_.cols()));
        for (Eigen::Index f = 0; f < x_.cols(); ++f) {
            double mn = std::numeric_limits<double>::infinity(), mx = -mn;
            for (auto r : rows) {
                mn = std::min(mn, x_(static_cast<Eigen::Index>(r), f));
                mx = std::max(mx, x_(static_cast<Eigen::Index>(r), f));
            }
            lo[static_cast<std::size_t>(f)] = mn;
            hi[static_cast<std::size_t>(f)] = mx;
            if (mx > mn) splittable.push_back(static_cast<int>(f));
        }
        if (splittable.empty()) return id;
        const int f = splittable[rng_() % splittable.size()];
        const double mn = lo[static_cast<std::size_t>(f)], mx = hi[static_cast<std::size_t>(f)];
        std::uniform_real_distribution<double> u(0.0, 1.0);
        double split = mn + u(rng_) * (mx - mn);
        if (!(split > mn && split < mx)) split = mn + 0.5 * (mx - mn);
        if (!(split > mn && split < mx)) split = mx;  // adjacent doubles: everything below mx goes left

        std::vector<std::size_t> left, right;
        for (auto r : rows) (x_(static_cast<Eigen::Index>(r), f) < split ? left : right).push_back(r);
        const int l = grow(std::move(left), depth + 1);
        const int rr = grow(std::move(right), depth + 1);
        auto& n = nodes_[static_cast<std::size_t>(id)];
        n.feature = f;
        n.split = split;
        n.left = l;
        n.right = rr;
        return id;
    }

    const Eigen::MatrixXd& x_;
    int limit_;
    std::mt19937_64& rng_;
    std::vector<IsolationNode> nodes_;
};

}  // namespace

IsolationForest fit_iforest(const Eigen::MatrixXd& train, const IForestParams& params) {
    if (train.rows() == 0) throw DataError("isolation forest needs training data");
    if (params.n_trees < 1) throw ConfigError("n_trees must be >= 1");
    const auto n = static_cast<std::size_t>(train.rows());
    const std::size_t psi = std::min(std::max<std::size_t>(params.subsample, 1), n);
    const int limit = static_cast<int>(std::ceil(std::log2(static_cast<double>(std::max<std::size_t>(psi, 2)))));
    std::vector<IsolationTree> trees;
    for (int t = 0; t < params.n_trees; ++t) {
        std::mt19937_64 rng(mix_seed(params.seed, static_cast<std::uint64_t>(t)));
        std::vector<std::size_t> idx(n);
        std::iota(idx.begin(), idx.end(), 0);
        for (std::size_t i = 0; i < psi; ++i) {
            const std::size_t j = i + static_cast<std::size_t>(rng() % (n - i));
            std::swap(idx[i], idx[j]);
        }
        idx.resize(psi);
        IsolationBuilder b(train, limit, rng);
        trees.emplace_back(b.build(std::move(idx)));
    }
    return IsolationForest(std::move(trees), psi, static_cast<std::size_t>(train.cols()));
}

Json PlausibilityReport::to_json() const {
    Json cs = Json::array();
    for (const auto& c : candidates) {
        Json uq = Json::array();
        for (const auto& u : c.uq) uq.push_back({{"mean", u.mean}, {"std", u.std}, {"lower", u.lower}, {"upper", u.upper}});
        cs.push_back({{"anomaly_score", c.anomaly_score},
                      {"is_outlier", c.is_outlier},
                      {"uq", uq},
                      {"relative_interval_width", c.relative_interval_width},
                      {"relative_deviation", c.relative_deviation}});
    }
    return {{"threshold", threshold}, {"outlier_fraction", outlier_fraction}, {"candidates", cs}};
}

PlausibilityReport plausibility(const CandidateSet& set, const IsolationForest& forest,
                                const UncertaintyForest& uq_forest, double s_threshold) {
    if (set.candidates.empty()) throw ConfigError("plausibility of an empty candidate set");
    PlausibilityReport r;
    r.threshold = s_threshold;
    std::size_t outliers = 0;
    for (const auto& c : set.candidates) {
        CandidatePlausibility p;
        p.anomaly_score = forest.anomaly_score(c.x);
        p.is_outlier = p.anomaly_score > s_threshold;
        outliers += p.is_outlier ? 1 : 0;
        p.uq = uq_forest.predict_with_uncertainty(c.x);
        for (std::size_t t = 0; t < p.uq.size(); ++t) {
            const auto& u = p.uq[t];
            p.relative_interval_width.push_back((u.upper - u.lower) / std::max(std::abs(u.mean), 1e-9));
            const double f = t < c.prediction.size() ? c.prediction[t] : u.mean;
            p.relative_deviation.push_back(std::abs(u.mean - f) / std::max(std::abs(f), 1e-9));
        }
        r.candidates.push_back(std::move(p));
    }
    r.outlier_fraction = static_cast<double>(outliers) / static_cast<double>(set.candidates.size());
    return r;
}

Projection Projection::fit(const Eigen::MatrixXd& train) {
    Projection p;
    p.mean = train.colwise().mean();
    const Eigen::MatrixXd centered = train.rowwise() - p.mean;
    const Eigen::MatrixXd cov = centered.transpose() * centered / std::max<double>(1.0, static_cast<double>(train.rows() - 1));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    const auto d = train.cols();
    p.components = Eigen::MatrixXd::Zero(d, 2);
    for (Eigen::Index k = 0; k < std::min<Eigen::Index>(2, d); ++k) {
        Eigen::VectorXd v = es.eigenvectors().col(d - 1 - k);
        Eigen::Index arg = 0;
        v.cwiseAbs().maxCoeff(&arg);
        if (v[arg] < 0) v = -v;
        p.components.col(k) = v;
    }
    p.train = p.project(train);
    return p;
}

Eigen::MatrixXd Projection::project(const Eigen::MatrixXd& x) const {
    return (x.rowwise() - mean) * components;
}

std::string Projection::to_csv(const std::vector<bool>& outliers) const {
    std::ostringstream os;
    os << "set,index,pc1,pc2,outlier\n";
    for (Eigen::Index i = 0; i < train.rows(); ++i)
        os << "train," << i << ',' << format_number(train(i, 0)) << ',' << format_number(train(i, 1)) << ",0\n";
    for (Eigen::Index i = 0; i < candidates.rows(); ++i) {
        const bool o = static_cast<std::size_t>(i) < outliers.size() && outliers[static_cast<std::size_t>(i)];
        os << "candidate," << i << ',' << format_number(candidates(i, 0)) << ',' << format_number(candidates(i, 1))
           << ',' << (o ? 1 : 0) << '\n';
    }
    return os.str();
}

}  // namespace whatif
