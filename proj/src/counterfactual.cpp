#include "whatif/counterfactual.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

namespace whatif {

TargetGoal TargetGoal::range(std::size_t t, double lo, double hi) {
    if (lo > hi) throw ConfigError("target range has lower > upper");
    TargetGoal g;
    g.target = t;
    g.kind = Kind::Range;
    g.lower = lo;
    g.upper = hi;
    return g;
}

TargetGoal TargetGoal::point(std::size_t t, double y) {
    TargetGoal g;
    g.target = t;
    g.kind = Kind::Point;
    g.value = y;
    return g;
}

TargetGoal TargetGoal::percent_change(std::size_t t, double fraction) {
    TargetGoal g;
    g.target = t;
    g.kind = Kind::PercentChange;
    g.value = fraction;
    return g;
}

bool TargetSpec::needs_baseline() const {
    return std::any_of(goals.begin(), goals.end(),
                       [](const TargetGoal& g) { return g.kind == TargetGoal::Kind::PercentChange; });
}

TargetSpec TargetSpec::resolved(std::span<const double> base) const {
    TargetSpec out = *this;
    for (auto& g : out.goals) {
        if (g.kind != TargetGoal::Kind::PercentChange) continue;
        if (g.target >= base.size()) throw ConfigError("percent-change target needs a baseline prediction");
        g = TargetGoal::point(g.target, (1.0 - g.value) * base[g.target]);
    }
    return out;
}

double TargetSpec::loss(std::span<const double> pred) const {
    if (goals.empty()) throw ConfigError("target spec is empty");
    double acc = 0.0;
    for (const auto& g : goals) {
        const double y = pred[g.target];
        double d = 0.0;
        switch (g.kind) {
            case TargetGoal::Kind::Range:
                d = y < g.lower ? g.lower - y : (y > g.upper ? y - g.upper : 0.0);
                break;
            case TargetGoal::Kind::Point:
                d = y - g.value;
                break;
            case TargetGoal::Kind::PercentChange:
                throw ConfigError("percent-change target used before resolution");
        }
        acc += d * d;
    }
    return acc / static_cast<double>(goals.size());
}

bool TargetSpec::satisfied(std::span<const double> pred) const {
    for (const auto& g : goals) {
        const double y = pred[g.target];
        switch (g.kind) {
            case TargetGoal::Kind::Range:
                if (y < g.lower || y > g.upper) return false;
                break;
            case TargetGoal::Kind::Point:
                if (std::abs(y - g.value) > point_tolerance * std::max(std::abs(g.value), 1e-12)) return false;
                break;
            case TargetGoal::Kind::PercentChange:
                throw ConfigError("percent-change target used before resolution");
        }
    }
    return true;
}

double validity_loss(const std::vector<Vec>& preds, const TargetSpec& spec) {
    if (spec.empty()) throw ConfigError("target spec is empty");
    if (preds.empty()) throw ConfigError("validity loss needs at least one prediction");
    double acc = 0.0;
    for (const auto& p : preds) acc += spec.loss(p);
    return acc / static_cast<double>(preds.size());
}

double proximity_loss(std::span<const double> x, std::span<const double> xp, std::span<const double> mads) {
    if (x.size() != xp.size() || x.size() != mads.size())
        throw ConfigError("proximity loss: dimension mismatch");
    double acc = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) acc += std::abs(x[k] - xp[k]) / mads[k];
    return acc;
}

namespace {

double euclid(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
    return std::sqrt(s);
}

double linf(std::span<const double> a, std::span<const double> b) {
    double m = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a[k] - b[k]));
    return m;
}

double kernel(std::span<const double> a, std::span<const double> b) { return 1.0 / (1.0 + euclid(a, b)); }

}  // namespace

Eigen::MatrixXd similarity_matrix(const std::vector<Vec>& cs) {
    const auto m = static_cast<Eigen::Index>(cs.size());
    Eigen::MatrixXd k(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
        k(i, i) = 1.0;
        for (Eigen::Index j = i + 1; j < m; ++j)
            k(i, j) = k(j, i) = kernel(cs[static_cast<std::size_t>(i)], cs[static_cast<std::size_t>(j)]);
    }
    return k;
}

double diversity_score(const std::vector<Vec>& cs) {
    if (cs.empty()) throw ConfigError("diversity needs at least one candidate");
    if (cs.size() == 1) return 1.0;
    const double det = similarity_matrix(cs).partialPivLu().determinant();
    return std::clamp(det, 0.0, 1.0);
}

double total_loss(const CandidateSet& set, std::span<const double> x, const TargetSpec& spec,
                  std::span<const double> mads, double lambda1, double lambda2) {
    if (lambda1 < 0.0 || lambda2 < 0.0) throw ConfigError("loss weights must be non-negative");
    if (set.candidates.empty()) throw ConfigError("total loss of an empty set");
    double valid = 0.0, prox = 0.0;
    std::vector<Vec> xs;
    for (const auto& c : set.candidates) {
        valid += spec.loss(c.prediction);
        prox += proximity_loss(x, c.x, mads);
        xs.push_back(c.x);
    }
    return valid + lambda1 * prox - lambda2 * diversity_score(xs);
}

FeatureSpace FeatureSpace::from(const PreprocessedDataset& ds) {
    FeatureSpace s;
    for (std::size_t k = 0; k < ds.num_features(); ++k) {
        const auto& c = ds.features[k];
        Feature f;
        f.name = c.name;
        f.categorical = c.kind == ColumnKind::Categorical;
        f.levels = c.levels.size();
        f.level_names = c.levels;
        f.integral = c.integral;
        f.fixed_role = c.role == ColumnRole::Fixed;
        f.mean = ds.feature_mean[k];
        f.std = ds.feature_std[k];
        f.lo = ds.scaled_min[k];
        f.hi = ds.scaled_max[k];
        f.mad = ds.mad[k];
        s.features.push_back(std::move(f));
    }
    return s;
}

Vec FeatureSpace::mads() const {
    Vec out;
    for (const auto& f : features) out.push_back(f.mad);
    return out;
}

ResolvedBounds resolve_bounds(const GenerateRequest& req) {
    const auto& space = req.space;
    const std::size_t d = space.size();
    if (req.baseline.size() != d) throw ConfigError("baseline has wrong dimension", "Baseline");
    ResolvedBounds b;
    b.lo.resize(d);
    b.hi.resize(d);
    b.fixed.assign(d, false);
    b.anchor = req.baseline;
    for (const auto& [name, _] : req.constraints.by_name) {
        if (std::none_of(space.features.begin(), space.features.end(),
                         [&](const auto& f) { return f.name == name; }))
            throw ConfigError("constraint names unknown feature '" + name + "'", "Constraints." + name);
    }
    for (std::size_t k = 0; k < d; ++k) {
        const auto& f = space.features[k];
        b.lo[k] = f.lo;
        b.hi[k] = f.hi;
        if (f.fixed_role) b.fixed[k] = true;
        auto it = req.constraints.by_name.find(f.name);
        if (it == req.constraints.by_name.end()) continue;
        const auto& c = it->second;
        const std::string field = "Constraints." + f.name;
        if (c.min && c.max && *c.min > *c.max) throw ConfigError("constraint min > max", field);
        if (c.fixed) {
            if ((c.min && *c.fixed < *c.min) || (c.max && *c.fixed > *c.max))
                throw ConfigError("fixed value lies outside its box constraint", field);
            if (f.categorical) {
                const double code = *c.fixed;
                if (code < 0 || code >= static_cast<double>(f.levels) || code != std::floor(code))
                    throw ConfigError("fixed categorical value is not a level", field);
                b.anchor[k] = code;
            } else {
                b.anchor[k] = space.to_scaled(k, *c.fixed);
            }
            b.fixed[k] = true;
            continue;
        }
        if (f.categorical) {
            if (c.min) b.lo[k] = std::max(0.0, std::ceil(*c.min));
            if (c.max) b.hi[k] = std::min(static_cast<double>(f.levels) - 1.0, std::floor(*c.max));
        } else {
            if (c.min) b.lo[k] = space.to_scaled(k, *c.min);
            if (c.max) b.hi[k] = space.to_scaled(k, *c.max);
            if (b.hi[k] < f.lo || b.lo[k] > f.hi)
                b.warnings.push_back("box for '" + f.name + "' does not intersect the training range");
        }
        if (b.lo[k] > b.hi[k]) throw ConfigError("constraint leaves no feasible value", field);
    }
    return b;
}

namespace {

struct Individual {
    Vec x;
    Vec pred;
    double validity = 0.0;
    double proximity = 0.0;
    double base = 0.0;     // validity + lambda1 * proximity
    double fitness = 0.0;  // base - lambda2 * diversity pressure
    int born = 0;
};

struct Selection {
    std::vector<std::size_t> members;
    double total = 0.0;
};

class GeneticSearch {
public:
    GeneticSearch(const GenerateRequest& req, std::uint64_t seed)
        : req_(req), bounds_(resolve_bounds(req)), mads_(req.space.mads()), rng_(seed), seed_(seed) {
        if (req.predictor == nullptr) throw ConfigError("generate needs a predictor");
        if (req.predictor->num_features() != req.space.size())
            throw ConfigError("predictor and feature space disagree on dimension");
        if (req.n < 1) throw ConfigError("N must be >= 1", "N");
        if (req.lambda1 < 0.0 || req.lambda2 < 0.0) throw ConfigError("loss weights must be non-negative");
        if (req.spec.empty()) throw ConfigError("target spec is empty", "Targets");
        if (req.spec.needs_baseline()) throw ConfigError("percent-change target used before resolution");
        for (std::size_t k = 0; k < bounds_.fixed.size(); ++k)
            if (!bounds_.fixed[k]) free_.push_back(k);
    }

    CandidateSet run() {
        const std::size_t pop_size = std::max<std::size_t>(req_.ga.population_factor * req_.n, 2);
        std::vector<Individual> pop;
        pop.reserve(pop_size);
        pop.push_back(make(bounds_.anchor, 0));
        while (pop.size() < pop_size) pop.push_back(make(pop.size() % 2 == 1 ? local_sample() : uniform_sample(), 0));

        double best = std::numeric_limits<double>::infinity();
        int stale = 0;
        Selection elite = select(pop);
        for (int gen = 1; gen <= req_.ga.generations; ++gen) {
            if (elite.total < best - req_.ga.improvement_tol) {
                best = elite.total;
                stale = 0;
            } else if (++stale >= req_.ga.patience) {
                break;
            }
            assign_fitness(pop, elite);
            std::vector<Individual> next;
            next.reserve(pop_size);
            for (auto i : elite.members) next.push_back(pop[i]);
            while (next.size() < pop_size) {
                const Individual& a = pop[tournament(pop)];
                const Individual& b = pop[tournament(pop)];
                Vec child = a.x;
                if (unit_(rng_) < req_.ga.crossover_rate)
                    for (auto k : free_)
                        if (unit_(rng_) < 0.5) child[k] = b.x[k];
                mutate(child);
                next.push_back(make(std::move(child), gen));
            }
            pop = std::move(next);
            elite = select(pop);
        }
        return finish(pop, elite);
    }

private:
    Individual make(Vec x, int born) {
        repair(x);
        Individual ind;
        ind.pred = req_.predictor->predict(x);
        ind.validity = req_.spec.loss(ind.pred);
        ind.proximity = proximity_loss(req_.baseline, x, mads_);
        ind.base = ind.validity + req_.lambda1 * ind.proximity;
        ind.x = std::move(x);
        ind.born = born;
        return ind;
    }

    void repair(Vec& x) const {
        const auto& space = req_.space;
        for (std::size_t k = 0; k < x.size(); ++k) {
            if (bounds_.fixed[k]) {
                x[k] = bounds_.anchor[k];
                continue;
            }
            const auto& f = space.features[k];
            double v = std::clamp(x[k], bounds_.lo[k], bounds_.hi[k]);
            if (f.categorical) {
                v = std::round(v);
            } else if (f.integral) {
                const double raw_lo = std::ceil(space.to_raw(k, bounds_.lo[k]) - 1e-9);
                const double raw_hi = std::floor(space.to_raw(k, bounds_.hi[k]) + 1e-9);
                if (raw_lo <= raw_hi) v = space.to_scaled(k, std::clamp(std::round(space.to_raw(k, v)), raw_lo, raw_hi));
            }
            x[k] = v;
        }
    }

    Vec uniform_sample() {
        Vec x = bounds_.anchor;
        for (auto k : free_) {
            const auto& f = req_.space.features[k];
            if (f.categorical) x[k] = pick_level(k);
            else x[k] = bounds_.lo[k] + unit_(rng_) * (bounds_.hi[k] - bounds_.lo[k]);
        }
        return x;
    }

    Vec local_sample() {
        Vec x = bounds_.anchor;
        std::normal_distribution<double> step(0.0, 0.5);
        for (auto k : free_) {
            if (unit_(rng_) >= 0.5) continue;
            if (req_.space.features[k].categorical) x[k] = pick_level(k);
            else x[k] += step(rng_);
        }
        return x;
    }

    double pick_level(std::size_t k) {
        const auto lo = static_cast<long>(bounds_.lo[k]);
        const auto hi = static_cast<long>(bounds_.hi[k]);
        return static_cast<double>(lo + static_cast<long>(rng_() % static_cast<std::uint64_t>(hi - lo + 1)));
    }

    void mutate(Vec& x) {
        if (free_.empty()) return;
        const double p = 1.0 / static_cast<double>(free_.size());
        std::normal_distribution<double> step(0.0, req_.ga.mutation_sigma);
        bool touched = false;
        for (auto k : free_) {
            if (unit_(rng_) >= p) continue;
            touched = true;
            if (req_.space.features[k].categorical) x[k] = pick_level(k);
            else x[k] += step(rng_);
        }
        if (!touched) {
            const auto k = free_[rng_() % free_.size()];
            if (req_.space.features[k].categorical) x[k] = pick_level(k);
            else x[k] += step(rng_);
        }
    }

    std::size_t tournament(const std::vector<Individual>& pop) {
        std::size_t best = rng_() % pop.size();
        for (std::size_t t = 1; t < req_.ga.tournament_size; ++t) {
            const std::size_t c = rng_() % pop.size();
            if (pop[c].fitness < pop[best].fitness || (pop[c].fitness == pop[best].fitness && c < best)) best = c;
        }
        return best;
    }

    void assign_fitness(std::vector<Individual>& pop, const Selection& elite) const {
        for (std::size_t i = 0; i < pop.size(); ++i) {
            double nearest = std::numeric_limits<double>::infinity();
            for (auto e : elite.members)
                if (e != i) nearest = std::min(nearest, euclid(pop[i].x, pop[e].x));
            // Pairwise diversity det([[1,k],[k,1]]) against the closest elite member.
            const double k = std::isinf(nearest) ? 0.0 : 1.0 / (1.0 + nearest);
            pop[i].fitness = pop[i].base - req_.lambda2 * (1.0 - k * k);
        }
    }

    bool duplicates_any(const std::vector<Individual>& pop, std::size_t j, const std::vector<std::size_t>& chosen) const {
        return std::any_of(chosen.begin(), chosen.end(),
                           [&](std::size_t c) { return linf(pop[c].x, pop[j].x) < kDedupTolerance; });
    }

    // Greedy set construction minimizing the set objective. det(K) is
    // extended through the Cholesky factor: adding j scales det by
    // s_j = 1 - |L^-1 k_j|^2.
    Selection select(const std::vector<Individual>& pop) const {
        const std::size_t want = std::min(req_.n, pop.size());
        Selection sel;
        std::vector<bool> used(pop.size(), false);
        double sum_base = 0.0;
        double det = 1.0;
        Eigen::MatrixXd chol = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(want), static_cast<Eigen::Index>(want));
        while (sel.members.size() < want) {
            const auto m = static_cast<Eigen::Index>(sel.members.size());
            std::size_t pick = pop.size();
            double pick_score = std::numeric_limits<double>::infinity();
            double pick_s = 1.0;
            Eigen::VectorXd pick_z;
            for (std::size_t j = 0; j < pop.size(); ++j) {
                if (used[j] || duplicates_any(pop, j, sel.members)) continue;
                double s = 1.0;
                Eigen::VectorXd z(m);
                if (req_.lambda2 > 0.0 && m > 0) {
                    Eigen::VectorXd kj(m);
                    for (Eigen::Index i = 0; i < m; ++i)
                        kj[i] = kernel(pop[sel.members[static_cast<std::size_t>(i)]].x, pop[j].x);
                    z = chol.topLeftCorner(m, m).triangularView<Eigen::Lower>().solve(kj);
                    s = 1.0 - z.squaredNorm();
                    if (s <= 1e-12) continue;
                }
                const double score = pop[j].base - req_.lambda2 * det * s;
                if (score < pick_score) {
                    pick_score = score;
                    pick = j;
                    pick_s = s;
                    pick_z = z;
                }
            }
            if (pick == pop.size()) break;
            used[pick] = true;
            sel.members.push_back(pick);
            sum_base += pop[pick].base;
            if (req_.lambda2 > 0.0) {
                if (m > 0) chol.row(m).head(m) = pick_z.transpose();
                chol(m, m) = std::sqrt(pick_s);
                det *= pick_s;
            }
        }
        std::vector<Vec> xs;
        for (auto i : sel.members) xs.push_back(pop[i].x);
        const double dk = req_.lambda2 > 0.0 ? det : 0.0;
        sel.total = sum_base - req_.lambda2 * dk;
        return sel;
    }

    CandidateSet finish(const std::vector<Individual>& pop, const Selection& elite) const {
        CandidateSet set;
        set.lambda1 = req_.lambda1;
        set.lambda2 = req_.lambda2;
        set.requested = req_.n;
        for (auto i : elite.members) {
            const auto& ind = pop[i];
            Candidate c;
            c.x = ind.x;
            c.prediction = ind.pred;
            c.validity = ind.validity;
            c.proximity = ind.proximity;
            c.provenance = {seed_, 0, ind.born};
            set.candidates.push_back(std::move(c));
        }
        sort_candidates(set.candidates);
        return set;
    }

    const GenerateRequest& req_;
    ResolvedBounds bounds_;
    Vec mads_;
    std::vector<std::size_t> free_;
    std::mt19937_64 rng_;
    std::uniform_real_distribution<double> unit_{0.0, 1.0};
    std::uint64_t seed_;
};

void finalize_set(CandidateSet& set, const GenerateRequest& req) {
    std::vector<Vec> xs;
    for (const auto& c : set.candidates) xs.push_back(c.x);
    if (xs.empty()) {
        set.diversity = 0.0;
        set.total_loss = 0.0;
        set.infeasible = true;
        return;
    }
    set.diversity = diversity_score(xs);
    const Eigen::MatrixXd k = similarity_matrix(xs);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(k);
    const Eigen::MatrixXd inv = ldlt.solve(Eigen::MatrixXd::Identity(k.rows(), k.cols()));
    for (std::size_t i = 0; i < set.candidates.size(); ++i) {
        const double d = inv(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i));
        set.candidates[i].diversity_contribution = (d > 0.0 && std::isfinite(d)) ? std::min(1.0, 1.0 / d) : 0.0;
    }
    set.total_loss = total_loss(set, req.baseline, req.spec, req.space.mads(), req.lambda1, req.lambda2);
    set.infeasible = std::none_of(set.candidates.begin(), set.candidates.end(),
                                  [&](const Candidate& c) { return req.spec.satisfied(c.prediction); });
}

}  // namespace

void sort_candidates(std::vector<Candidate>& cs) {
    std::sort(cs.begin(), cs.end(), [](const Candidate& a, const Candidate& b) {
        if (a.validity != b.validity) return a.validity < b.validity;
        if (a.proximity != b.proximity) return a.proximity < b.proximity;
        if (a.x != b.x) return a.x < b.x;
        return a.provenance.worker < b.provenance.worker;
    });
}

CandidateSet generate(const GenerateRequest& req, std::uint64_t seed) {
    GeneticSearch search(req, seed);
    CandidateSet set = search.run();
    finalize_set(set, req);
    return set;
}

CandidateSet ensemble_generate(const GenerateRequest& req, std::span<const std::uint64_t> seeds, std::size_t workers) {
    if (seeds.empty()) throw ConfigError("seed list is empty", "seeds");
    if (workers < 1) throw ConfigError("workers must be >= 1", "workers");
    resolve_bounds(req);  // surface constraint errors before spawning workers

    std::vector<CandidateSet> runs(seeds.size());
    std::vector<std::exception_ptr> errors(workers);
    auto work = [&](std::size_t w) {
        try {
            for (std::size_t i = w; i < seeds.size(); i += workers) {
                runs[i] = generate(req, seeds[i]);
                for (auto& c : runs[i].candidates) c.provenance.worker = i;
            }
        } catch (...) {
            errors[w] = std::current_exception();
        }
    };
    if (workers == 1) {
        work(0);
    } else {
        std::vector<std::thread> threads;
        for (std::size_t w = 0; w < workers; ++w) threads.emplace_back(work, w);
        for (auto& t : threads) t.join();
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);

    CandidateSet merged;
    merged.lambda1 = req.lambda1;
    merged.lambda2 = req.lambda2;
    merged.requested = req.n * seeds.size();
    for (auto& run : runs) {
        for (auto& c : run.candidates) {
            const bool dup = std::any_of(merged.candidates.begin(), merged.candidates.end(),
                                         [&](const Candidate& m) { return linf(m.x, c.x) < kDedupTolerance; });
            if (!dup) merged.candidates.push_back(std::move(c));
        }
    }
    sort_candidates(merged.candidates);
    finalize_set(merged, req);
    return merged;
}

std::string candidates_csv(const CandidateSet& set, const FeatureSpace& space,
                           const std::vector<std::string>& target_names) {
    auto quote = [](const std::string& s) {
        if (s.find_first_of(",\"\n") == std::string::npos) return s;
        std::string out = "\"";
        for (char c : s) {
            if (c == '"') out += "\"\"";
            else out.push_back(c);
        }
        return out + "\"";
    };
    std::ostringstream os;
    for (const auto& f : space.features) os << quote(f.name) << ',';
    for (const auto& t : target_names) os << quote(t) << ',';
    os << "validity,proximity,seed,worker,iteration\n";
    for (const auto& c : set.candidates) {
        for (std::size_t k = 0; k < space.size(); ++k) {
            const auto& f = space.features[k];
            if (f.categorical) os << quote(f.level_names.at(static_cast<std::size_t>(c.x[k]))) << ',';
            else os << format_number(space.to_raw(k, c.x[k])) << ',';
        }
        for (double p : c.prediction) os << format_number(p) << ',';
        os << format_number(c.validity) << ',' << format_number(c.proximity) << ',' << c.provenance.seed << ','
           << c.provenance.worker << ',' << c.provenance.iteration << '\n';
    }
    return os.str();
}

}  // namespace whatif
