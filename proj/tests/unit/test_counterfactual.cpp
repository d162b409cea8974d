#include "support.hpp"

#include "whatif/counterfactual.hpp"

#include <doctest.h>

using namespace whatif;

namespace {

struct Fixture {
    PreprocessedDataset pp;
    BoostedPredictor f;
    FeatureSpace space;

    Fixture() : pp(build()), f(fit_boosted(pp, {80, 3, 0.2, 0})), space(FeatureSpace::from(pp)) {}

    static PreprocessedDataset build() {
        std::mt19937_64 rng(11);
        std::uniform_real_distribution<double> u(0.0, 10.0);
        std::uniform_int_distribution<int> k(1, 16);
        Eigen::MatrixXd m(400, 4);
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
            m(r, 0) = u(rng);
            m(r, 1) = u(rng);
            m(r, 2) = k(rng);
            m(r, 3) = 10.0 * m(r, 0) + 2.0 * m(r, 1) + m(r, 2);
        }
        Dataset ds = test::matrix_dataset(m, {"a", "b", "tasks"}, {"y"});
        ds.columns[2].integral = true;
        return preprocess(ds).first;
    }

    GenerateRequest request(const TargetSpec& spec, std::size_t n = 8) const {
        GenerateRequest req;
        req.predictor = &f;
        req.space = space;
        req.baseline = pp.scale(Vec{5.0, 5.0, 8.0});
        req.spec = spec.resolved(f.predict(req.baseline));
        req.n = n;
        req.ga.generations = 60;
        return req;
    }
};

const Fixture& fixture() {
    static const Fixture fx;
    return fx;
}

}  // namespace

TEST_CASE("validity loss oracles") {
    TargetSpec point{{TargetGoal::point(0, 10.0)}};
    CHECK(validity_loss({Vec{10.0}}, point) == 0.0);
    CHECK(validity_loss({Vec{12.0}}, point) == 4.0);
    TargetSpec range{{TargetGoal::range(0, 0.0, 100.0)}};
    CHECK(validity_loss({Vec{50.0}}, range) == 0.0);
    CHECK(validity_loss({Vec{103.0}}, range) == 9.0);
    CHECK(validity_loss({Vec{-2.0}, Vec{50.0}}, range) == 2.0);
    CHECK_THROWS_AS(validity_loss({Vec{1.0}}, TargetSpec{}), ConfigError);
}

TEST_CASE("proximity loss oracles") {
    CHECK(proximity_loss(Vec{1, 2}, Vec{1, 2}, Vec{1, 1}) == 0.0);
    CHECK(proximity_loss(Vec{1, 2}, Vec{2, 2}, Vec{1, 1}) == 1.0);
    CHECK(proximity_loss(Vec{0, 0}, Vec{3, 4}, Vec{1, 2}) == 5.0);
    CHECK_THROWS_AS(proximity_loss(Vec{0, 0}, Vec{3}, Vec{1, 2}), ConfigError);
}

TEST_CASE("diversity oracles") {
    CHECK(diversity_score({Vec{0.3, 0.1}}) == 1.0);
    CHECK(diversity_score({Vec{1, 1}, Vec{1, 1}}) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(diversity_score({Vec{0, 0}, Vec{1, 0}}) == doctest::Approx(0.75).epsilon(1e-12));
    const auto k = similarity_matrix({Vec{0, 0}, Vec{3, 4}, Vec{1, 1}});
    for (Eigen::Index i = 0; i < 3; ++i) CHECK(k(i, i) == 1.0);
    CHECK(k.isApprox(k.transpose()));
    CHECK(k(0, 1) == doctest::Approx(1.0 / 6.0));
}

TEST_CASE("total loss oracles") {
    TargetSpec spec{{TargetGoal::range(0, 0.0, 10.0)}};
    CandidateSet set;
    Candidate c;
    c.x = Vec{0.0, 0.0, 0.0};
    c.prediction = Vec{5.0};
    set.candidates.push_back(c);
    const Vec x = c.x, mads{1, 1, 1};
    CHECK(total_loss(set, x, spec, mads, 0.0, 0.0) == 0.0);
    CHECK(total_loss(set, x, spec, mads, 0.5, 1.0) == -1.0);
    CHECK_THROWS_AS(total_loss(set, x, spec, mads, -1.0, 0.0), ConfigError);
}

TEST_CASE("percent change resolves against the baseline prediction") {
    TargetSpec spec{{TargetGoal::percent_change(0, 0.2)}};
    CHECK(spec.needs_baseline());
    const auto r = spec.resolved(Vec{500.0});
    REQUIRE(r.goals[0].kind == TargetGoal::Kind::Point);
    CHECK(r.goals[0].value == doctest::Approx(400.0));
}

TEST_CASE("generate respects fixed and box constraints") {
    const auto& fx = fixture();
    auto req = fx.request(TargetSpec{{TargetGoal::range(0, 40.0, 60.0)}});
    req.constraints.by_name["tasks"].fixed = 12.0;
    req.constraints.by_name["b"].min = 2.0;
    req.constraints.by_name["b"].max = 4.0;
    const auto set = generate(req, 3);
    REQUIRE(!set.candidates.empty());
    CHECK(set.candidates.size() <= req.n);
    for (const auto& c : set.candidates) {
        CHECK(fx.space.to_raw(2, c.x[2]) == 12.0);
        const double b = fx.space.to_raw(1, c.x[1]);
        CHECK(b >= 2.0 - 1e-9);
        CHECK(b <= 4.0 + 1e-9);
        CHECK(c.prediction == fx.f.predict(c.x));
    }
}

TEST_CASE("integral features stay integral in raw units") {
    const auto& fx = fixture();
    const auto set = generate(fx.request(TargetSpec{{TargetGoal::range(0, 70.0, 90.0)}}), 4);
    for (const auto& c : set.candidates) {
        const double t = fx.space.to_raw(2, c.x[2]);
        CHECK(std::abs(t - std::round(t)) < 1e-9);
    }
}

TEST_CASE("generated candidates meet a reachable range and are sorted") {
    const auto& fx = fixture();
    const TargetSpec spec{{TargetGoal::range(0, 70.0, 90.0)}};
    const auto set = generate(fx.request(spec), 5);
    CHECK_FALSE(set.infeasible);
    std::size_t inside = 0;
    for (const auto& c : set.candidates) inside += spec.satisfied(c.prediction) ? 1 : 0;
    CHECK(inside * 10 >= set.candidates.size() * 9);
    for (std::size_t i = 1; i < set.candidates.size(); ++i) {
        const auto& a = set.candidates[i - 1];
        const auto& b = set.candidates[i];
        CHECK((a.validity < b.validity || (a.validity == b.validity && a.proximity <= b.proximity)));
    }
    // No exact duplicates.
    for (std::size_t i = 0; i < set.candidates.size(); ++i)
        for (std::size_t j = i + 1; j < set.candidates.size(); ++j) CHECK(set.candidates[i].x != set.candidates[j].x);
}

TEST_CASE("stored losses are recomputable") {
    const auto& fx = fixture();
    auto req = fx.request(TargetSpec{{TargetGoal::range(0, 30.0, 50.0)}});
    const auto set = generate(req, 6);
    std::vector<Vec> xs;
    for (const auto& c : set.candidates) {
        CHECK(c.validity == doctest::Approx(req.spec.loss(c.prediction)).epsilon(1e-12));
        CHECK(c.proximity == doctest::Approx(proximity_loss(req.baseline, c.x, fx.space.mads())).epsilon(1e-12));
        xs.push_back(c.x);
    }
    CHECK(set.diversity == doctest::Approx(diversity_score(xs)).epsilon(1e-9));
    const double recomputed = total_loss(set, req.baseline, req.spec, fx.space.mads(), req.lambda1, req.lambda2);
    CHECK(std::abs(recomputed - set.total_loss) < 1e-9);
}

TEST_CASE("unreachable target yields a flagged best-effort set") {
    const auto& fx = fixture();
    const auto set = generate(fx.request(TargetSpec{{TargetGoal::range(0, 1e6, 2e6)}}), 1);
    CHECK(set.infeasible);
    CHECK_FALSE(set.candidates.empty());
}

TEST_CASE("infeasible constraints are errors") {
    const auto& fx = fixture();
    auto req = fx.request(TargetSpec{{TargetGoal::range(0, 40.0, 60.0)}});
    req.constraints.by_name["a"] = {5.0, 6.0, 7.0};
    CHECK_THROWS_AS(generate(req, 1), ConfigError);
    req.constraints.by_name.clear();
    req.constraints.by_name["a"] = {std::nullopt, 9.0, 1.0};
    CHECK_THROWS_AS(generate(req, 1), ConfigError);
    req.constraints.by_name.clear();
    req.constraints.by_name["nope"].fixed = 1.0;
    CHECK_THROWS_AS(generate(req, 1), ConfigError);
}

TEST_CASE("box outside the training range warns") {
    const auto& fx = fixture();
    auto req = fx.request(TargetSpec{{TargetGoal::range(0, 40.0, 60.0)}});
    req.constraints.by_name["a"] = {std::nullopt, 50.0, 60.0};
    const auto b = resolve_bounds(req);
    CHECK_FALSE(b.warnings.empty());
}

TEST_CASE("ensemble with one seed equals generate") {
    const auto& fx = fixture();
    const auto req = fx.request(TargetSpec{{TargetGoal::range(0, 50.0, 70.0)}});
    const auto a = generate(req, 21);
    const std::vector<std::uint64_t> seeds{21};
    const auto b = ensemble_generate(req, seeds, 1);
    REQUIRE(a.candidates.size() == b.candidates.size());
    for (std::size_t i = 0; i < a.candidates.size(); ++i) CHECK(a.candidates[i].x == b.candidates[i].x);
}

TEST_CASE("ensemble is invariant to the worker count") {
    const auto& fx = fixture();
    const auto req = fx.request(TargetSpec{{TargetGoal::range(0, 50.0, 70.0)}});
    const std::vector<std::uint64_t> seeds{1, 2, 3, 4};
    const auto one = ensemble_generate(req, seeds, 1);
    const std::vector<std::string> targets{"y"};
    const std::string csv = candidates_csv(one, fx.space, targets);
    for (std::size_t w : {2u, 3u, 4u, 8u}) CHECK(candidates_csv(ensemble_generate(req, seeds, w), fx.space, targets) == csv);
    CHECK(one.candidates.size() <= 4 * req.n);
    for (const auto& c : one.candidates) CHECK(std::find(seeds.begin(), seeds.end(), c.provenance.seed) != seeds.end());
    CHECK_THROWS_AS(ensemble_generate(req, std::span<const std::uint64_t>{}, 1), ConfigError);
}

TEST_CASE("candidate csv column order") {
    const auto& fx = fixture();
    const auto set = generate(fx.request(TargetSpec{{TargetGoal::range(0, 50.0, 70.0)}}, 3), 2);
    const std::string csv = candidates_csv(set, fx.space, {"y"});
    CHECK(csv.substr(0, csv.find('\n')) == "a,b,tasks,y,validity,proximity,seed,worker,iteration");
}

TEST_CASE("predictor is unchanged by generation") {
    const auto& fx = fixture();
    const std::string before = fx.f.to_json().dump();
    (void)generate(fx.request(TargetSpec{{TargetGoal::range(0, 50.0, 70.0)}}), 9);
    CHECK(sha256_hex(fx.f.to_json().dump()) == sha256_hex(before));
}
