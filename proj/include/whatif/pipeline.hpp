#pragma once

#include "whatif/query.hpp"

#include <functional>
#include <memory>
#include <mutex>

namespace whatif {

enum class Phase { Queued, Preprocessing, Training, Generating, Filtering, Evaluating, Ranking, Done, Failed };

std::string to_string(Phase p);

struct RunStatus {
    std::string id;
    Phase phase = Phase::Queued;
    double progress = 0.0;
    std::string error;  // set when failed
    std::string stage;  // stage that failed
    std::string field;  // offending query field, when known

    Json to_json() const;
};

struct DatasetEntry {
    std::string id;    // "ds-" + hash prefix
    std::string hash;  // SHA-256 of file bytes and schema
    Dataset data;
};

struct PreparedData {
    PreprocessedDataset full;
    Split split;
    FeatureSpace space;
};

struct TrainedModels {
    BoostedPredictor predictor;
    UncertaintyForest forest;
    IsolationForest iforest;
    std::optional<CausalGraph> real_graph;
    std::string graph_note;  // why real_graph is absent
    Json metrics;            // held-out error per target
};

/// Registered datasets plus preprocessing and model caches keyed by content
/// hash and parameter hash. Thread-safe; cached values are immutable.
class Registry {
public:
    /// Returns the entry and whether it was newly created.
    std::pair<std::shared_ptr<const DatasetEntry>, bool> add(Dataset data, const std::string& content_hash);
    std::pair<std::shared_ptr<const DatasetEntry>, bool> add_bytes(std::string_view bytes, bool jsonl,
                                                                   const std::vector<ColumnSchema>& schema,
                                                                   const std::string& source);
    std::shared_ptr<const DatasetEntry> add_file(const std::string& path, const std::vector<ColumnSchema>& schema);
    std::shared_ptr<const DatasetEntry> find(const std::string& id) const;

    std::shared_ptr<const PreparedData> prepared(const DatasetEntry& ds, const QueryParams& p);
    std::shared_ptr<const TrainedModels> models(const DatasetEntry& ds, const PreparedData& data,
                                                const QueryParams& p);

    std::size_t model_fits() const;

private:
    mutable std::mutex mu_;
    std::map<std::string, std::shared_ptr<const DatasetEntry>> datasets_;
    std::map<std::string, std::shared_ptr<const PreparedData>> prepared_;
    std::map<std::string, std::shared_ptr<const TrainedModels>> models_;
    std::size_t model_fits_ = 0;
};

struct ExecuteOptions {
    LlmClient* client = nullptr;
    std::string run_id;
    std::function<void(Phase, double)> on_progress;
};

struct RunResult {
    Json report;
    bool infeasible = false;
    std::map<std::string, std::string> artifacts;  // name -> contents; includes report.json
};

/// Runs the whole pipeline. Errors carry the failing stage name.
RunResult execute(const Query& q, const DatasetEntry& ds, Registry& registry, const ExecuteOptions& opt = {});

/// Report text as written to report.json.
std::string report_text(const Json& report);

/// Content type for an artifact name.
std::string artifact_content_type(const std::string& name);

}  // namespace whatif
