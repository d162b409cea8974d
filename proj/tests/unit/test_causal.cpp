#include "whatif/causal.hpp"

#include <doctest.h>

#include <random>

using namespace whatif;

namespace {

Eigen::MatrixXd chain(std::size_t n, std::uint64_t seed, double scale_x1 = 1.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0), e(0.0, 0.1);
    Eigen::MatrixXd m(static_cast<Eigen::Index>(n), 3);
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        const double x1 = g(rng);
        const double x2 = 2.0 * x1 + e(rng);
        m(r, 0) = scale_x1 * x1;
        m(r, 1) = x2;
        m(r, 2) = 3.0 * x2 + e(rng);
    }
    return m;
}

CausalGraph graph(std::vector<std::string> nodes, std::vector<CausalEdge> edges) {
    CausalGraph g;
    g.nodes = std::move(nodes);
    g.edges = std::move(edges);
    g.order = g.nodes;
    return g;
}

}  // namespace

TEST_CASE("chain structure and weights are recovered") {
    const auto g = learn_dag(chain(5000, 1), {"x1", "x2", "y"}, 2);
    CHECK(g.is_acyclic());
    REQUIRE(g.edges.size() == 2);
    REQUIRE(g.weight("x1", "x2").has_value());
    REQUIRE(g.weight("x2", "y").has_value());
    for (const auto& e : g.edges) {
        if (e.parent == "x1") CHECK(std::abs(e.raw_weight - 2.0) <= 0.1);
        if (e.parent == "x2") CHECK(std::abs(e.raw_weight - 3.0) <= 0.1);
        CHECK(std::abs(e.weight) >= 0.05);
    }
}

TEST_CASE("single feature copy gives one unit edge") {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> g(0.0, 1.0);
    Eigen::MatrixXd m(200, 2);
    for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, 0) = m(r, 1) = g(rng);
    const auto dag = learn_dag(m, {"x", "y"}, 1);
    REQUIRE(dag.edges.size() == 1);
    CHECK(dag.edges[0].weight == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("pure noise yields at most one spurious edge over ten seeds") {
    std::size_t spurious = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> g(0.0, 1.0);
        Eigen::MatrixXd m(5000, 3);
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            for (Eigen::Index c = 0; c < 3; ++c) m(r, c) = g(rng);
        spurious += learn_dag(m, {"a", "b", "y"}, 2).edges.size();
    }
    CHECK(spurious <= 1);
}

TEST_CASE("targets are sinks") {
    const auto g = learn_dag(chain(500, 3), {"x1", "x2", "y"}, 2);
    for (const auto& e : g.edges) CHECK(e.parent != "y");
    CHECK(g.order.back() == "y");
}

TEST_CASE("standardized weights ignore rescaling of inputs") {
    const auto a = learn_dag(chain(2000, 4), {"x1", "x2", "y"}, 2);
    const auto b = learn_dag(chain(2000, 4, 2.0), {"x1", "x2", "y"}, 2);
    REQUIRE(a.weight("x1", "x2").has_value());
    CHECK(*b.weight("x1", "x2") == doctest::Approx(*a.weight("x1", "x2")).epsilon(1e-9));
    // Raw coefficient halves when the parent doubles.
    double ra = 0, rb = 0;
    for (const auto& e : a.edges) if (e.parent == "x1") ra = e.raw_weight;
    for (const auto& e : b.edges) if (e.parent == "x1") rb = e.raw_weight;
    CHECK(rb == doctest::Approx(ra / 2.0).epsilon(1e-9));
}

TEST_CASE("learning is deterministic and the order search keeps it acyclic") {
    const auto m = chain(1000, 5);
    const auto a = learn_dag(m, {"x1", "x2", "y"}, 2);
    const auto b = learn_dag(m, {"x1", "x2", "y"}, 2);
    CHECK(a.to_json() == b.to_json());
    CausalConfig cfg;
    cfg.order_search = true;
    CHECK(learn_dag(m, {"x1", "x2", "y"}, 2, cfg).is_acyclic());
}

TEST_CASE("too few samples is an error") {
    CHECK_THROWS_AS(learn_dag(chain(20, 6), {"x1", "x2", "y"}, 2), DataError);
}

TEST_CASE("consistency oracles") {
    const auto real = graph({"A", "B", "C"}, {{"A", "B", 1.0, 1.0}});
    const auto synth = graph({"A", "B", "C"}, {{"A", "B", 1.0, 1.0}, {"B", "C", 1.0, 1.0}});
    const auto r = consistency_score(real, synth);
    CHECK(r.score == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
    CHECK(r.only_synth == std::vector<std::string>{"B->C"});
    CHECK(consistency_score(synth, real).score == r.score);
    CHECK(consistency_score(real, real).score == 1.0);
    const auto empty = graph({"A", "B", "C"}, {});
    CHECK(consistency_score(real, empty).score == 0.0);
    const auto opposite = graph({"A", "B", "C"}, {{"A", "B", -1.0, -1.0}});
    CHECK(consistency_score(real, opposite).score == 0.0);
    CHECK_THROWS_AS(consistency_score(real, graph({"A", "B"}, {})), ConfigError);
}

TEST_CASE("learned graph is exactly self-consistent") {
    const auto g = learn_dag(chain(3000, 7), {"x1", "x2", "y"}, 2);
    CHECK(consistency_score(g, g).score == 1.0);
}

TEST_CASE("influence summary orders by magnitude then name") {
    const auto g = graph({"a", "b", "c", "t"},
                         {{"b", "t", -0.2, 0}, {"a", "t", 0.9, 0}, {"c", "t", 0.2, 0}});
    const auto s = influence_summary(g, "t");
    REQUIRE(s.size() == 3);
    CHECK(s[0].first == "a");
    CHECK(s[1].first == "b");
    CHECK(s[2].first == "c");
    CHECK(influence_summary(graph({"a", "t"}, {}), "t").empty());
    CHECK_THROWS_AS(influence_summary(g, "zzz"), ConfigError);
}

TEST_CASE("graph serializations") {
    const auto g = graph({"a", "t"}, {{"a", "t", 0.5, 1.5}});
    const auto j = g.to_json();
    CHECK(j["edges"].size() == 1);
    const std::string dot = g.to_dot();
    CHECK(dot.rfind("digraph", 0) == 0);
    CHECK(dot.find("\"a\" -> \"t\"") != std::string::npos);
    CHECK(dot.back() == '\n');
}
