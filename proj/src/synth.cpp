#include "whatif/synth.hpp"

#include <cmath>
#include <random>
#include <sstream>

namespace whatif {

namespace {

struct Col {
    const char* name;
    const char* units;
    bool target;
    std::vector<std::string> levels;
};

class Writer {
public:
    explicit Writer(std::vector<Col> cols) : cols_(std::move(cols)) {
        for (std::size_t i = 0; i < cols_.size(); ++i) os_ << (i ? "," : "") << cols_[i].name;
        os_ << '\n';
    }

    void row(const Vec& values) {
        for (std::size_t i = 0; i < values.size(); ++i) {
            os_ << (i ? "," : "");
            if (!cols_[i].levels.empty()) os_ << cols_[i].levels[static_cast<std::size_t>(values[i])];
            else os_ << format_short(values[i], 10);
        }
        os_ << '\n';
    }

    SynthData finish() const {
        Json cols = Json::array();
        for (const auto& c : cols_) {
            Json j = {{"name", c.name},
                      {"kind", c.levels.empty() ? "numeric" : "categorical"},
                      {"role", c.target ? "target" : "feature"},
                      {"units", c.units}};
            if (!c.levels.empty()) j["levels"] = c.levels;
            cols.push_back(j);
        }
        return {os_.str(), {{"columns", cols}}};
    }

private:
    std::vector<Col> cols_;
    std::ostringstream os_;
};

double round_to(double v, double step) { return std::round(v / step) * step; }

SynthData pm100(std::size_t n, std::mt19937_64& rng) {
    Writer w({{"num_nodes", "", false, {}},
              {"cores_per_node", "", false, {}},
              {"cpu_util", "", false, {}},
              {"mem_gb", "GB", false, {}},
              {"cpu_power", "W", false, {}},
              {"mem_power", "W", false, {}},
              {"partition", "", false, {"batch", "debug"}},
              {"node_power", "W", true, {}}});
    std::uniform_int_distribution<int> nodes(1, 32), cores(0, 3);
    std::uniform_real_distribution<double> util(0.2, 1.0), mem(16.0, 256.0), u(0.0, 1.0);
    std::normal_distribution<double> noise(0.0, 1.0);
    const double core_options[] = {8, 16, 32, 48};
    for (std::size_t i = 0; i < n; ++i) {
        const double nn = nodes(rng);
        const double cpn = core_options[cores(rng)];
        const double cu = round_to(util(rng), 1e-3);
        const double mg = round_to(mem(rng), 0.1);
        const double part = u(rng) < 0.8 ? 0 : 1;
        const double cpu = round_to(80.0 + 4.0 * cpn * cu + 5.0 * noise(rng), 0.01);
        const double memp = round_to(10.0 + 0.15 * mg + 6.0 * noise(rng), 0.01);
        const double node = round_to(cpu + memp + kPm100NoiseSigma * noise(rng), 0.01);
        w.row({nn, cpn, cu, mg, cpu, memp, part, node});
    }
    return w.finish();
}

SynthData fugaku(std::size_t n, std::mt19937_64& rng) {
    Writer w({{"idle_time", "s", false, {}},
              {"mszl", "", false, {}},
              {"num_nodes", "", false, {}},
              {"freq", "MHz", false, {}},
              {"state", "", false, {"completed", "failed", "timeout"}},
              {"duration", "s", true, {}}});
    std::uniform_real_distribution<double> idle(0.0, 300.0), u(0.0, 1.0);
    std::uniform_int_distribution<int> mszl(1, 64), nodes(1, 128);
    std::normal_distribution<double> noise(0.0, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double it = round_to(idle(rng), 0.1);
        const double ms = mszl(rng);
        const double nn = nodes(rng);
        const double fr = u(rng) < 0.5 ? 2000.0 : 2200.0;
        const double r = u(rng);
        const double st = r < 0.7 ? 0 : r < 0.9 ? 1 : 2;
        const double dur = 100.0 + 3.0 * it + 1.0 * nn + 1.5 * ms - 0.05 * (fr - 2000.0) +
                           (st == 2 ? 50.0 : st == 1 ? -40.0 : 0.0) + 30.0 * noise(rng);
        w.row({it, ms, nn, fr, st, round_to(std::max(dur, 1.0), 0.1)});
    }
    return w.finish();
}

SynthData sc19(std::size_t n, std::mt19937_64& rng) {
    Writer w({{"task_count", "", false, {}},
              {"num_nodes", "", false, {}},
              {"problem_size", "", false, {}},
              {"cpu_freq", "GHz", false, {}},
              {"run_time", "s", true, {}}});
    std::uniform_int_distribution<int> tasks(16, 512), nodes(1, 16);
    std::uniform_real_distribution<double> size(1.0, 10.0), freq(1.8, 3.0);
    std::normal_distribution<double> noise(0.0, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double tc = tasks(rng);
        const double nn = nodes(rng);
        const double ps = round_to(size(rng), 0.01);
        const double cf = round_to(freq(rng), 0.01);
        const double rt = 20.0 + 0.8 * tc + 3.0 * ps - 5.0 * cf + 2.0 * nn + 10.0 * noise(rng);
        w.row({tc, nn, ps, cf, round_to(rt, 0.01)});
    }
    return w.finish();
}

}  // namespace

std::vector<std::string> synth_names() { return {"pm100-like", "fugaku-like", "sc19-like"}; }

SynthData synthesize(const std::string& name, std::size_t n, std::uint64_t seed) {
    if (n < 10) throw ConfigError("n must be at least 10", "n");
    std::mt19937_64 rng(seed);
    if (name == "pm100-like") return pm100(n, rng);
    if (name == "fugaku-like") return fugaku(n, rng);
    if (name == "sc19-like") return sc19(n, rng);
    throw ConfigError("unknown synthetic dataset '" + name + "' (pm100-like, fugaku-like, sc19-like)", "name");
}

}  // namespace whatif
