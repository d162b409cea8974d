#include "whatif/cli.hpp"

#include "whatif/synth.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace whatif {

namespace fs = std::filesystem;

namespace {

std::string resolve(const fs::path& base, const std::string& p) {
    if (p.empty()) return p;
    fs::path path(p);
    return path.is_relative() ? (base / path).lexically_normal().string() : path.string();
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
    std::vector<std::uint64_t> out;
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        std::size_t used = 0;
        unsigned long long v = 0;
        try {
            v = std::stoull(tok, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != tok.size()) throw ConfigError("bad seed '" + tok + "'", "seeds");
        out.push_back(v);
    }
    if (out.empty()) throw ConfigError("empty seed list", "seeds");
    return out;
}

std::string json_scalar(const Json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number()) return format_short(v.get<double>());
    return v.dump();
}

}  // namespace

CliConfig CliConfig::load(const std::string& path) {
    Json j;
    try {
        j = Json::parse(read_file(path));
    } catch (const Json::exception& e) {
        throw ConfigError(path + " is not valid JSON: " + e.what());
    }
    if (!j.is_object()) throw ConfigError(path + " must hold a JSON object");
    const fs::path base = fs::path(path).parent_path();
    CliConfig c;
    c.query_dir = base.string();
    try {
        for (const auto& [key, v] : j.items()) {
            if (key == "dataset") c.dataset = resolve(base, v.get<std::string>());
            else if (key == "schema") c.schema = resolve(base, v.get<std::string>());
            else if (key == "query") {
                if (v.is_string()) {
                    const std::string qpath = resolve(base, v.get<std::string>());
                    c.query = Json::parse(read_file(qpath));
                    c.query_dir = fs::path(qpath).parent_path().string();
                } else {
                    c.query = v;
                }
            } else if (key == "out") c.out = resolve(base, v.get<std::string>());
            else if (key == "seeds") c.seeds = v.get<std::vector<std::uint64_t>>();
            else if (key == "workers") c.workers = v.get<std::size_t>();
            else if (key == "provider") {
                for (const auto& [pk, pv] : v.items()) {
                    if (pk == "endpoint") c.provider.endpoint = pv.get<std::string>();
                    else if (pk == "model") c.provider.model = pv.get<std::string>();
                    else if (pk == "api_key") c.provider.api_key = pv.get<std::string>();
                    else if (pk == "timeout_seconds") c.provider.timeout_seconds = pv.get<double>();
                    else throw ConfigError("unknown field '" + pk + "'", "provider." + pk);
                }
            } else
                throw ConfigError("unknown field '" + key + "'", key);
        }
    } catch (const Json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
    if (c.query.is_null()) throw ConfigError("config needs a query", "query");
    if (c.schema.empty()) throw ConfigError("config needs a schema path", "schema");
    return c;
}

void print_summary(const Json& report, std::ostream& out) {
    const auto& q = report.at("query");
    const auto& gen = report.at("generation");
    out << q.value("type", "?") << " query on " << report.at("dataset").value("id", "?") << ": "
        << gen.value("candidates", 0) << " candidates, " << gen.value("survivors", 0) << " passed rule compliance\n";
    const auto& rules = report.at("rules");
    out << "Rules: " << rules.at("rules").size() << " validated (" << rules.value("provider", "?")
        << (rules.value("fallback", false) ? ", provider fallback" : "") << ")\n";
    if (report.value("infeasible", false)) {
        out << "INFEASIBLE: " << report.value("infeasible_reason", "") << '\n';
        return;
    }
    const auto& top = report.at("top_k");
    for (const auto& row : top) {
        out << "\n#" << row.at("rank").get<int>() << "  score " << std::fixed << std::setprecision(4)
            << row.at("score").get<double>() << std::defaultfloat << "  predicted";
        for (const auto& [name, v] : row.at("prediction").items()) out << ' ' << name << '=' << json_scalar(v);
        out << "\n   ";
        bool first = true;
        for (const auto& [name, v] : row.at("features").items()) {
            out << (first ? "" : ", ") << name << '=' << json_scalar(v);
            first = false;
        }
        out << "\n   " << row.value("explanation", "") << '\n';
    }
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"What-if analysis for HPC job configurations"};
    app.require_subcommand(1);

    std::string config_path, seeds_text, out_dir;
    std::size_t workers = 0;
    auto* run = app.add_subcommand("run", "Run one query from a config file");
    run->add_option("--config", config_path, "config.json path")->required();
    run->add_option("--seeds", seeds_text, "Comma-separated seed list");
    run->add_option("--workers", workers, "Generation worker threads")->check(CLI::PositiveNumber);
    run->add_option("--out", out_dir, "Output directory");

    std::string synth_name, synth_out;
    std::size_t synth_n = 1000;
    std::uint64_t synth_seed = 0;
    auto* synth = app.add_subcommand("synth", "Write a bundled synthetic dataset");
    synth->add_option("--name", synth_name, "pm100-like, fugaku-like or sc19-like")->required();
    synth->add_option("--n", synth_n, "Row count (>= 10)");
    synth->add_option("--seed", synth_seed, "Generator seed");
    synth->add_option("--out", synth_out, "Output CSV path")->required();

    std::string report_path;
    auto* report = app.add_subcommand("report", "Pretty-print a report");
    report->add_option("--path", report_path, "Output directory or report.json")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err) == 0 ? 0 : 1;
    }

    try {
        if (*synth) {
            const auto data = synthesize(synth_name, synth_n, synth_seed);
            const fs::path path(synth_out);
            if (path.has_parent_path()) fs::create_directories(path.parent_path());
            write_file(path.string(), data.csv);
            fs::path schema = path;
            schema.replace_extension(".schema.json");
            write_file(schema.string(), data.schema.dump(2) + "\n");
            out << "wrote " << path.string() << " and " << schema.string() << '\n';
            return 0;
        }
        if (*report) {
            fs::path p(report_path);
            if (fs::is_directory(p)) p /= "report.json";
            Json r;
            try {
                r = Json::parse(read_file(p.string()));
            } catch (const Json::exception& e) {
                throw DataError(p.string() + " is not valid JSON: " + e.what());
            }
            print_summary(r, out);
            return 0;
        }

        CliConfig cfg = CliConfig::load(config_path);
        if (!seeds_text.empty()) cfg.seeds = parse_seed_list(seeds_text);
        if (workers > 0) cfg.workers = workers;
        if (!out_dir.empty()) cfg.out = out_dir;

        Query q = parse_query(cfg.query, cfg.query_dir);
        if (cfg.seeds) q.params.seeds = *cfg.seeds;
        if (cfg.workers) q.params.workers = *cfg.workers;
        std::string data_path = cfg.dataset;
        if (data_path.empty()) data_path = resolve(cfg.query_dir, q.dataset);
        if (data_path.empty()) throw ConfigError("no dataset path in config or query", "dataset");

        Registry registry;
        std::shared_ptr<const DatasetEntry> entry;
        try {
            entry = registry.add_file(data_path, load_schema(cfg.schema));
        } catch (Error& e) {
            e.set_stage("load");
            throw;
        }
        const ProviderConfig pc = cfg.provider.with_env_overrides();
        std::unique_ptr<LlmClient> client;
        if (pc.enabled()) client = std::make_unique<LlmClient>(pc);

        ExecuteOptions opt;
        opt.client = client.get();
        opt.run_id = "cli";
        RunResult result = execute(q, *entry, registry, opt);

        fs::create_directories(cfg.out);
        for (const auto& [name, body] : result.artifacts) write_file((fs::path(cfg.out) / name).string(), body);
        print_summary(result.report, out);
        out << "\nreport written to " << (fs::path(cfg.out) / "report.json").string() << '\n';
        return result.infeasible ? 2 : 0;
    } catch (const ConfigError& e) {
        err << "error";
        if (!e.stage().empty()) err << " [" << e.stage() << "]";
        err << ": " << e.what();
        if (!e.field().empty()) err << " (field " << e.field() << ")";
        err << '\n';
    } catch (const Error& e) {
        err << "error";
        if (!e.stage().empty()) err << " [" << e.stage() << "]";
        err << ": " << e.what() << '\n';
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
    }
    return 1;
}

}  // namespace whatif
