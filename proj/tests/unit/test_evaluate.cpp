#include "whatif/evaluate.hpp"

#include <doctest.h>

#include <random>

using namespace whatif;

namespace {

Eigen::MatrixXd cluster(std::size_t n, std::uint64_t seed, double sd = 0.1) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, sd);
    Eigen::MatrixXd m(static_cast<Eigen::Index>(n), 2);
    for (Eigen::Index r = 0; r < m.rows(); ++r) m.row(r) << g(rng), g(rng);
    return m;
}

Vec row(const Eigen::MatrixXd& m, Eigen::Index r) { return {m(r, 0), m(r, 1)}; }

CandidateSet candidates(const std::vector<Vec>& xs) {
    CandidateSet s;
    for (const auto& x : xs) {
        Candidate c;
        c.x = x;
        c.prediction = {1.0};
        s.candidates.push_back(c);
    }
    return s;
}

UncertaintyForest flat_forest() {
    return UncertaintyForest({{RegressionTree::leaf(1.0), RegressionTree::leaf(1.2), RegressionTree::leaf(0.8)}});
}

}  // namespace

TEST_CASE("average path length oracles") {
    CHECK(average_path_length(1) == 0.0);
    CHECK(average_path_length(2) == doctest::Approx(2.0 * 0.5772156649 - 1.0).epsilon(1e-12));
    CHECK(std::abs(average_path_length(2) - 0.15443) < 1e-4);
    for (int m = 2; m < 500; ++m) CHECK(average_path_length(m + 1) > average_path_length(m));
}

TEST_CASE("subsample clamps to n and forests are reproducible") {
    const auto x = cluster(10, 1);
    const auto f = fit_iforest(x, {20, 256, 5});
    CHECK(f.psi() == 10);
    CHECK(f.height_limit() == 4);
    const auto g = fit_iforest(x, {20, 256, 5});
    for (std::size_t t = 0; t < f.trees().size(); ++t) {
        const auto& a = f.trees()[t].nodes();
        const auto& b = g.trees()[t].nodes();
        REQUIRE(a.size() == b.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            CHECK(a[i].feature == b[i].feature);
            CHECK(a[i].split == b[i].split);
        }
    }
    CHECK_THROWS_AS(fit_iforest(Eigen::MatrixXd(0, 2)), DataError);
}

TEST_CASE("split values lie strictly inside the node range") {
    const auto x = cluster(300, 2);
    const auto f = fit_iforest(x, {30, 128, 1});
    for (const auto& t : f.trees())
        for (const auto& n : t.nodes())
            if (n.feature >= 0) {
                const auto col = x.col(n.feature);
                CHECK(n.split > col.minCoeff());
                CHECK(n.split < col.maxCoeff());
            }
}

TEST_CASE("constant data scores every point identically") {
    Eigen::MatrixXd x = Eigen::MatrixXd::Constant(50, 2, 3.0);
    const auto f = fit_iforest(x, {10, 32, 0});
    const double s0 = f.anomaly_score(Vec{3.0, 3.0});
    CHECK(s0 == doctest::Approx(0.5));
    CHECK(f.anomaly_score(Vec{-100.0, 7.0}) == s0);
}

TEST_CASE("planted outlier scores above the medoid") {
    const auto x = cluster(500, 3);
    const auto f = fit_iforest(x, {100, 256, 3});
    CHECK(f.anomaly_score(Vec{3.0, 3.0}) > f.anomaly_score(Vec{0.0, 0.0}));
    for (double s : {f.anomaly_score(Vec{3.0, 3.0}), f.anomaly_score(Vec{0.0, 0.0})}) {
        CHECK(s > 0.0);
        CHECK(s < 1.0);
    }
    CHECK_THROWS_AS(f.anomaly_score(Vec{1.0}), ConfigError);
}

TEST_CASE("scores are stable under permutation of training rows") {
    const auto x = cluster(400, 4);
    std::vector<Eigen::Index> perm(400);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), std::mt19937_64(9));
    Eigen::MatrixXd y(400, 2);
    for (Eigen::Index i = 0; i < 400; ++i) y.row(i) = x.row(perm[static_cast<std::size_t>(i)]);
    const Vec probes[] = {{0.0, 0.0}, {0.15, -0.1}, {0.5, 0.5}, {-0.3, 0.05}};
    double total = 0.0;
    int count = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto a = fit_iforest(x, {100, 256, seed});
        const auto b = fit_iforest(y, {100, 256, seed});
        for (const auto& p : probes) {
            total += std::abs(a.anomaly_score(p) - b.anomaly_score(p));
            ++count;
        }
    }
    CHECK(total / count < 0.02);
}

TEST_CASE("plausibility on in-cluster and far-away candidates") {
    const auto x = cluster(800, 5);
    const auto f = fit_iforest(x, {100, 256, 1});
    std::vector<Vec> inside;
    for (Eigen::Index r = 0; r < 20; ++r) inside.push_back(row(x, r * 7));
    const auto near = plausibility(candidates(inside), f, flat_forest(), 0.6);
    CHECK(near.outlier_fraction == 0.0);

    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> far(5.0, 10.0);
    std::vector<Vec> outside;
    for (int i = 0; i < 20; ++i) outside.push_back({far(rng), -far(rng)});
    const auto away = plausibility(candidates(outside), f, flat_forest(), 0.6);
    CHECK(away.outlier_fraction >= 0.9);

    const auto single = plausibility(candidates({Vec{0.0, 0.0}}), f, flat_forest(), 0.6);
    CHECK((single.outlier_fraction == 0.0 || single.outlier_fraction == 1.0));
    CHECK_THROWS_AS(plausibility(CandidateSet{}, f, flat_forest(), 0.6), ConfigError);
}

TEST_CASE("outlier fraction is monotone in the threshold") {
    const auto x = cluster(300, 6);
    const auto f = fit_iforest(x, {60, 128, 2});
    std::vector<Vec> mixed;
    for (int i = 0; i < 30; ++i) mixed.push_back({0.05 * i, -0.02 * i});
    const auto set = candidates(mixed);
    double prev = 1.0;
    for (double t = 0.3; t <= 0.9; t += 0.05) {
        const auto r = plausibility(set, f, flat_forest(), t);
        CHECK(r.outlier_fraction <= prev);
        prev = r.outlier_fraction;
        for (const auto& c : r.candidates) CHECK(c.is_outlier == (c.anomaly_score > t));
    }
}

TEST_CASE("relative interval width and deviation") {
    const auto f = fit_iforest(cluster(50, 7), {10, 32, 0});
    const auto r = plausibility(candidates({Vec{0.0, 0.0}}), f, flat_forest(), 0.6);
    const auto& u = r.candidates[0].uq[0];
    CHECK(u.mean == doctest::Approx(1.0));
    CHECK(r.candidates[0].relative_interval_width[0] == doctest::Approx((u.upper - u.lower) / 1.0));
    CHECK(r.candidates[0].relative_deviation[0] == doctest::Approx(0.0).epsilon(1e-12));
    const auto j = r.to_json();
    CHECK(j["candidates"].size() == 1);
}

TEST_CASE("projection uses the top principal components") {
    Eigen::MatrixXd x(4, 3);
    x << -2, 0, 0, 2, 0, 0, 0, -1, 0, 0, 1, 0;
    const auto p = Projection::fit(x);
    CHECK(std::abs(p.components(0, 0)) == doctest::Approx(1.0));
    CHECK(std::abs(p.components(1, 1)) == doctest::Approx(1.0));
    CHECK(p.train(1, 0) == doctest::Approx(2.0));
    const std::string csv = p.to_csv({});
    CHECK(csv.rfind("set,index,pc1,pc2,outlier\n", 0) == 0);
}
