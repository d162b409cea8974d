#include "whatif/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

namespace whatif {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool is_missing_token(std::string_view s) {
    return s.empty() || s == "NA" || s == "NaN" || s == "nan" || s == "null" || s == "NULL";
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::optional<double> parse_double(std::string_view s) {
    s = trim(s);
    if (s.empty()) return std::nullopt;
    std::string tmp(s);
    char* end = nullptr;
    errno = 0;
    double v = std::strtod(tmp.c_str(), &end);
    if (end != tmp.c_str() + tmp.size() || errno == ERANGE) return std::nullopt;
    return v;
}

// RFC-4180 records: quoted fields, doubled quotes, CRLF or LF line ends.
std::vector<std::vector<std::string>> split_csv(std::string_view text) {
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> row;
    std::string field;
    bool in_quotes = false;
    bool field_started = false;
    auto end_field = [&] {
        row.push_back(std::move(field));
        field.clear();
        field_started = false;
    };
    auto end_row = [&] {
        end_field();
        if (!(row.size() == 1 && row[0].empty())) records.push_back(std::move(row));
        row.clear();
    };
    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                field.push_back(c);
            }
            continue;
        }
        if (c == '"' && !field_started) {
            in_quotes = true;
            field_started = true;
        } else if (c == ',') {
            end_field();
        } else if (c == '\n') {
            end_row();
        } else if (c == '\r') {
            // swallowed; LF terminates the record
        } else {
            field.push_back(c);
            field_started = true;
        }
    }
    if (in_quotes) throw DataError("unterminated quoted field in CSV");
    if (!field.empty() || !row.empty()) end_row();
    return records;
}

struct ColumnSink {
    ColumnSchema schema;
    std::vector<double> cells;
    std::vector<std::string> raw_levels;  // categorical cells before coding
};

void finalize_column(ColumnSink& sink, const std::string& source) {
    auto& s = sink.schema;
    if (s.kind == ColumnKind::Categorical) {
        if (s.levels.empty()) {
            std::set<std::string> seen;
            for (const auto& v : sink.raw_levels)
                if (!is_missing_token(v)) seen.insert(v);
            s.levels.assign(seen.begin(), seen.end());
        }
        sink.cells.resize(sink.raw_levels.size());
        for (std::size_t r = 0; r < sink.raw_levels.size(); ++r) {
            const auto& v = sink.raw_levels[r];
            if (is_missing_token(v)) {
                sink.cells[r] = kNaN;
                continue;
            }
            auto it = std::find(s.levels.begin(), s.levels.end(), v);
            if (it == s.levels.end())
                throw DataError(source + ": row " + std::to_string(r + 1) + ", column '" + s.name +
                                "': value '" + v + "' is not a declared level");
            sink.cells[r] = static_cast<double>(it - s.levels.begin());
        }
    } else {
        bool integral = !sink.cells.empty();
        for (double v : sink.cells)
            if (!std::isnan(v) && v != std::floor(v)) integral = false;
        s.integral = integral;
    }
}

Dataset assemble(std::vector<ColumnSink>& sinks, std::string source, std::string format) {
    Dataset ds;
    ds.source = std::move(source);
    ds.format = std::move(format);
    std::vector<ColumnSink*> kept;
    for (auto& s : sinks) {
        finalize_column(s, ds.source);
        if (s.schema.role != ColumnRole::Dropped) kept.push_back(&s);
    }
    const std::size_t n = sinks.empty() ? 0 : sinks.front().cells.size();
    ds.values.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(kept.size()));
    for (std::size_t c = 0; c < kept.size(); ++c) {
        ds.columns.push_back(kept[c]->schema);
        for (std::size_t r = 0; r < n; ++r)
            ds.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = kept[c]->cells[r];
    }
    return ds;
}

void check_schema(const std::vector<ColumnSchema>& schema) {
    if (schema.empty()) throw ConfigError("schema has no columns", "columns");
    std::set<std::string> names;
    for (const auto& c : schema) {
        if (c.name.empty()) throw ConfigError("schema column with empty name", "columns");
        if (!names.insert(c.name).second)
            throw ConfigError("duplicate schema column '" + c.name + "'", "columns");
    }
}

double column_variance(const Eigen::VectorXd& v) {
    const double m = v.mean();
    return (v.array() - m).square().mean();
}

double correlation(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    const auto ca = (a.array() - a.mean()).matrix();
    const auto cb = (b.array() - b.mean()).matrix();
    const double den = std::sqrt(ca.squaredNorm() * cb.squaredNorm());
    if (den == 0.0) return 0.0;
    return ca.dot(cb) / den;
}

Eigen::MatrixXd sample_covariance(const Eigen::MatrixXd& x) {
    if (x.rows() < 2) return Eigen::MatrixXd::Zero(x.cols(), x.cols());
    Eigen::MatrixXd centered = x.rowwise() - x.colwise().mean();
    return (centered.transpose() * centered) / static_cast<double>(x.rows() - 1);
}

}  // namespace

std::string to_string(ColumnKind k) { return k == ColumnKind::Numeric ? "numeric" : "categorical"; }

std::string to_string(ColumnRole r) {
    switch (r) {
        case ColumnRole::Feature: return "feature";
        case ColumnRole::Target: return "target";
        case ColumnRole::Dropped: return "dropped";
        case ColumnRole::Fixed: return "fixed";
    }
    return "feature";
}

std::string to_string(CovarianceRepair::Kind k) {
    switch (k) {
        case CovarianceRepair::Kind::None: return "none";
        case CovarianceRepair::Kind::Jitter: return "jitter";
        case CovarianceRepair::Kind::Pca: return "pca";
        case CovarianceRepair::Kind::L2: return "l2";
    }
    return "none";
}

std::vector<ColumnSchema> schema_from_json(const Json& j) {
    const Json& cols = j.is_array() ? j : j.at("columns");
    if (!cols.is_array()) throw ConfigError("schema 'columns' must be an array", "columns");
    std::vector<ColumnSchema> out;
    for (std::size_t i = 0; i < cols.size(); ++i) {
        const auto& c = cols[i];
        const std::string path = "columns[" + std::to_string(i) + "]";
        if (!c.is_object() || !c.contains("name"))
            throw ConfigError("schema column needs a name", path);
        ColumnSchema s;
        s.name = c.at("name").get<std::string>();
        const std::string kind = c.value("kind", "numeric");
        if (kind == "numeric") s.kind = ColumnKind::Numeric;
        else if (kind == "categorical") s.kind = ColumnKind::Categorical;
        else throw ConfigError("unknown column kind '" + kind + "'", path + ".kind");
        const std::string role = c.value("role", "feature");
        if (role == "feature") s.role = ColumnRole::Feature;
        else if (role == "target") s.role = ColumnRole::Target;
        else if (role == "dropped") s.role = ColumnRole::Dropped;
        else if (role == "fixed") s.role = ColumnRole::Fixed;
        else throw ConfigError("unknown column role '" + role + "'", path + ".role");
        s.units = c.value("units", "");
        if (c.contains("levels")) s.levels = c.at("levels").get<std::vector<std::string>>();
        if (s.kind == ColumnKind::Numeric && !s.levels.empty())
            throw ConfigError("numeric column '" + s.name + "' cannot declare levels", path + ".levels");
        out.push_back(std::move(s));
    }
    check_schema(out);
    return out;
}

Json schema_to_json(const std::vector<ColumnSchema>& cols) {
    Json arr = Json::array();
    for (const auto& c : cols) {
        Json o = {{"name", c.name}, {"kind", to_string(c.kind)}, {"role", to_string(c.role)}};
        if (!c.units.empty()) o["units"] = c.units;
        if (c.kind == ColumnKind::Categorical) o["levels"] = c.levels;
        arr.push_back(std::move(o));
    }
    return Json{{"columns", arr}};
}

std::vector<ColumnSchema> load_schema(const std::string& path) {
    const std::string text = read_file(path);
    try {
        return schema_from_json(Json::parse(text));
    } catch (const Json::exception& e) {
        throw ConfigError("schema " + path + ": " + e.what());
    }
}

std::optional<std::size_t> Dataset::index_of(std::string_view name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
        if (columns[i].name == name) return i;
    return std::nullopt;
}

std::vector<std::size_t> Dataset::feature_indices() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < columns.size(); ++i)
        if (columns[i].is_feature()) out.push_back(i);
    return out;
}

std::vector<std::size_t> Dataset::target_indices() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < columns.size(); ++i)
        if (columns[i].role == ColumnRole::Target) out.push_back(i);
    return out;
}

Dataset parse_csv(std::string_view text, const std::vector<ColumnSchema>& schema, std::string source) {
    check_schema(schema);
    auto records = split_csv(text);
    if (records.empty()) throw DataError(source + ": CSV has no header row");
    const auto& header = records.front();
    std::vector<std::size_t> file_col(schema.size());
    for (std::size_t s = 0; s < schema.size(); ++s) {
        auto it = std::find_if(header.begin(), header.end(),
                               [&](const std::string& h) { return trim(h) == schema[s].name; });
        if (it == header.end())
            throw DataError(source + ": column '" + schema[s].name + "' not found in file");
        file_col[s] = static_cast<std::size_t>(it - header.begin());
    }
    std::vector<ColumnSink> sinks(schema.size());
    for (std::size_t s = 0; s < schema.size(); ++s) sinks[s].schema = schema[s];
    for (std::size_t r = 1; r < records.size(); ++r) {
        const auto& rec = records[r];
        const std::size_t row = r;  // 1-based data row, for messages
        if (rec.size() != header.size())
            throw DataError(source + ": row " + std::to_string(row) + " has " + std::to_string(rec.size()) +
                            " fields, header has " + std::to_string(header.size()));
        for (std::size_t s = 0; s < schema.size(); ++s) {
            std::string_view cell = trim(rec[file_col[s]]);
            auto& sink = sinks[s];
            if (sink.schema.kind == ColumnKind::Categorical) {
                sink.raw_levels.emplace_back(cell);
            } else if (is_missing_token(cell)) {
                sink.cells.push_back(kNaN);
            } else if (auto v = parse_double(cell)) {
                sink.cells.push_back(*v);
            } else {
                throw DataError(source + ": row " + std::to_string(row) + ", column '" + sink.schema.name +
                                "': cannot parse '" + std::string(cell) + "' as a number");
            }
        }
    }
    return assemble(sinks, std::move(source), "csv");
}

Dataset parse_jsonl(std::string_view text, const std::vector<ColumnSchema>& schema, std::string source) {
    check_schema(schema);
    std::vector<ColumnSink> sinks(schema.size());
    for (std::size_t s = 0; s < schema.size(); ++s) sinks[s].schema = schema[s];
    std::size_t row = 1;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        std::string_view line = trim(text.substr(pos, nl - pos));
        pos = nl + 1;
        if (line.empty()) continue;
        Json rec;
        try {
            rec = Json::parse(line);
        } catch (const Json::exception& e) {
            throw DataError(source + ": row " + std::to_string(row) + ": invalid JSON: " + e.what());
        }
        if (!rec.is_object()) throw DataError(source + ": row " + std::to_string(row) + " is not an object");
        for (auto& sink : sinks) {
            const auto& name = sink.schema.name;
            if (!rec.contains(name))
                throw DataError(source + ": row " + std::to_string(row) + " is missing column '" + name + "'");
            const auto& v = rec.at(name);
            if (sink.schema.kind == ColumnKind::Categorical) {
                if (v.is_null()) sink.raw_levels.emplace_back();
                else if (v.is_string()) sink.raw_levels.push_back(v.get<std::string>());
                else sink.raw_levels.push_back(v.dump());
            } else if (v.is_null()) {
                sink.cells.push_back(kNaN);
            } else if (v.is_number()) {
                sink.cells.push_back(v.get<double>());
            } else if (v.is_string() && is_missing_token(v.get<std::string>())) {
                sink.cells.push_back(kNaN);
            } else if (auto d = v.is_string() ? parse_double(v.get<std::string>()) : std::nullopt) {
                sink.cells.push_back(*d);
            } else {
                throw DataError(source + ": row " + std::to_string(row) + ", column '" + name +
                                "': cannot parse " + v.dump() + " as a number");
            }
        }
        ++row;
    }
    return assemble(sinks, std::move(source), "jsonl");
}

Dataset load_dataset(const std::string& path, const std::vector<ColumnSchema>& schema) {
    const std::string text = read_file(path);
    auto ends_with = [&](std::string_view suffix) {
        return path.size() >= suffix.size() && path.compare(path.size() - suffix.size(), suffix.size(), suffix) == 0;
    };
    if (ends_with(".jsonl") || ends_with(".ndjson")) return parse_jsonl(text, schema, path);
    return parse_csv(text, schema, path);
}

bool PreprocessReport::changes_nothing() const {
    if (!dropped_zero_variance.empty() || !dropped_correlated.empty() || dropped_nan_rows != 0 ||
        dropped_outlier_rows != 0 || covariance_repair.kind != CovarianceRepair::Kind::None)
        return false;
    for (const auto& s : scaler)
        if (std::abs(s.mean) > 1e-9 || std::abs(s.std - 1.0) > 1e-9) return false;
    return true;
}

Json PreprocessReport::to_json() const {
    Json corr = Json::array();
    for (const auto& c : dropped_correlated)
        corr.push_back({{"kept", c.kept}, {"dropped", c.dropped}, {"correlation", c.correlation}});
    Json scl = Json::array();
    for (const auto& s : scaler) scl.push_back({{"column", s.column}, {"mean", s.mean}, {"std", s.std}});
    Json mads = Json::object();
    for (const auto& [name, v] : mad) mads[name] = v;
    Json repair = {{"kind", to_string(covariance_repair.kind)}};
    switch (covariance_repair.kind) {
        case CovarianceRepair::Kind::Jitter: repair["epsilon"] = covariance_repair.epsilon; break;
        case CovarianceRepair::Kind::Pca: repair["components"] = covariance_repair.components; break;
        case CovarianceRepair::Kind::L2: repair["lambda"] = covariance_repair.lambda; break;
        case CovarianceRepair::Kind::None: break;
    }
    return {{"dropped_zero_variance", dropped_zero_variance},
            {"dropped_correlated", corr},
            {"dropped_nan_rows", dropped_nan_rows},
            {"dropped_outlier_rows", dropped_outlier_rows},
            {"covariance_repair", repair},
            {"scaler", scl},
            {"mad", mads},
            {"mad_fallback", mad_fallback}};
}

std::optional<std::size_t> PreprocessedDataset::feature_index(std::string_view name) const {
    for (std::size_t i = 0; i < features.size(); ++i)
        if (features[i].name == name) return i;
    return std::nullopt;
}

std::optional<std::size_t> PreprocessedDataset::target_index(std::string_view name) const {
    for (std::size_t i = 0; i < targets.size(); ++i)
        if (targets[i].name == name) return i;
    return std::nullopt;
}

double PreprocessedDataset::scale_value(std::size_t f, double raw) const {
    return (raw - feature_mean[f]) / feature_std[f];
}

double PreprocessedDataset::unscale_value(std::size_t f, double scaled) const {
    return scaled * feature_std[f] + feature_mean[f];
}

Vec PreprocessedDataset::scale(std::span<const double> raw) const {
    if (raw.size() != features.size()) throw ConfigError("feature vector has wrong dimension");
    Vec out(raw.size());
    for (std::size_t f = 0; f < raw.size(); ++f) out[f] = scale_value(f, raw[f]);
    return out;
}

Vec PreprocessedDataset::unscale(std::span<const double> scaled) const {
    if (scaled.size() != features.size()) throw ConfigError("feature vector has wrong dimension");
    Vec out(scaled.size());
    for (std::size_t f = 0; f < scaled.size(); ++f) out[f] = unscale_value(f, scaled[f]);
    return out;
}

Dataset PreprocessedDataset::as_dataset() const {
    Dataset ds;
    ds.source = "<preprocessed>";
    ds.format = "memory";
    ds.columns = features;
    ds.columns.insert(ds.columns.end(), targets.begin(), targets.end());
    ds.values.resize(x.rows(), x.cols() + y.cols());
    ds.values << x, y;
    return ds;
}

PreprocessedDataset PreprocessedDataset::subset(std::span<const std::size_t> rows) const {
    PreprocessedDataset out = *this;
    const auto n = static_cast<Eigen::Index>(rows.size());
    out.x.resize(n, x.cols());
    out.x_raw.resize(n, x_raw.cols());
    out.y.resize(n, y.cols());
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto r = static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)]);
        if (r >= x.rows()) throw ConfigError("row index out of range in subset");
        out.x.row(i) = x.row(r);
        out.x_raw.row(i) = x_raw.row(r);
        out.y.row(i) = y.row(r);
    }
    return out;
}

bool is_positive_definite(const Eigen::MatrixXd& m) {
    if (m.rows() == 0 || m.rows() != m.cols()) return false;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) return false;
    const double lo = es.eigenvalues().minCoeff();
    const double hi = es.eigenvalues().maxCoeff();
    return lo > 1e-12 * std::max(1.0, hi);
}

std::pair<PreprocessedDataset, PreprocessReport> preprocess(const Dataset& ds, const PreprocessConfig& cfg) {
    PreprocessReport report;
    const auto n0 = ds.rows();

    // NaN rows first, then optional IQR trimming.
    std::vector<Eigen::Index> keep;
    for (Eigen::Index r = 0; r < n0; ++r)
        if (!ds.values.row(r).array().isNaN().any()) keep.push_back(r);
    report.dropped_nan_rows = static_cast<std::size_t>(n0) - keep.size();

    if (cfg.outlier_trim && !keep.empty()) {
        std::vector<std::pair<double, double>> fences(ds.columns.size(),
                                                      {-std::numeric_limits<double>::infinity(),
                                                       std::numeric_limits<double>::infinity()});
        for (std::size_t c = 0; c < ds.columns.size(); ++c) {
            if (ds.columns[c].kind != ColumnKind::Numeric) continue;
            Vec col;
            for (auto r : keep) col.push_back(ds.values(r, static_cast<Eigen::Index>(c)));
            const double q1 = quantile(col, 0.25), q3 = quantile(col, 0.75);
            const double iqr = q3 - q1;
            fences[c] = {q1 - 1.5 * iqr, q3 + 1.5 * iqr};
        }
        std::vector<Eigen::Index> inside;
        for (auto r : keep) {
            bool ok = true;
            for (std::size_t c = 0; c < ds.columns.size() && ok; ++c) {
                const double v = ds.values(r, static_cast<Eigen::Index>(c));
                ok = v >= fences[c].first && v <= fences[c].second;
            }
            if (ok) inside.push_back(r);
        }
        report.dropped_outlier_rows = keep.size() - inside.size();
        keep = std::move(inside);
    }
    if (keep.size() < 2) throw DataError("fewer than 2 rows remain after preprocessing");
    const auto n = static_cast<Eigen::Index>(keep.size());

    auto column = [&](std::size_t c) {
        Eigen::VectorXd v(n);
        for (Eigen::Index i = 0; i < n; ++i) v[i] = ds.values(keep[static_cast<std::size_t>(i)], static_cast<Eigen::Index>(c));
        return v;
    };

    // Zero-variance features.
    std::vector<std::size_t> feats;
    for (auto c : ds.feature_indices()) {
        if (column_variance(column(c)) == 0.0) report.dropped_zero_variance.push_back(ds.columns[c].name);
        else feats.push_back(c);
    }

    // Correlated numeric feature pairs, visited in lexicographic name order.
    std::vector<std::size_t> by_name = feats;
    std::sort(by_name.begin(), by_name.end(),
              [&](auto a, auto b) { return ds.columns[a].name < ds.columns[b].name; });
    std::set<std::size_t> dropped;
    for (std::size_t i = 0; i < by_name.size(); ++i) {
        const auto a = by_name[i];
        if (dropped.count(a) || ds.columns[a].kind != ColumnKind::Numeric) continue;
        const auto va = column(a);
        for (std::size_t j = i + 1; j < by_name.size(); ++j) {
            const auto b = by_name[j];
            if (dropped.count(b) || ds.columns[b].kind != ColumnKind::Numeric) continue;
            const double r = correlation(va, column(b));
            if (std::abs(r) > cfg.corr_threshold) {
                dropped.insert(b);
                report.dropped_correlated.push_back({ds.columns[a].name, ds.columns[b].name, r});
            }
        }
    }
    std::erase_if(feats, [&](auto c) { return dropped.count(c) > 0; });
    if (feats.empty()) throw DataError("all feature columns were dropped during preprocessing");
    const auto targets = ds.target_indices();
    if (targets.empty()) throw DataError("dataset has no target column");

    PreprocessedDataset out;
    const auto d = static_cast<Eigen::Index>(feats.size());
    out.x.resize(n, d);
    out.x_raw.resize(n, d);
    out.y.resize(n, static_cast<Eigen::Index>(targets.size()));
    for (Eigen::Index f = 0; f < d; ++f) {
        const auto c = feats[static_cast<std::size_t>(f)];
        const auto& schema = ds.columns[c];
        out.features.push_back(schema);
        const Eigen::VectorXd v = column(c);
        out.x_raw.col(f) = v;
        double mean = 0.0, sd = 1.0;
        if (schema.kind == ColumnKind::Numeric) {
            mean = v.mean();
            sd = std::sqrt(column_variance(v));
            report.scaler.push_back({schema.name, mean, sd});
        }
        out.feature_mean.push_back(mean);
        out.feature_std.push_back(sd);
        out.x.col(f) = ((v.array() - mean) / sd).matrix();
    }
    for (std::size_t t = 0; t < targets.size(); ++t) {
        out.targets.push_back(ds.columns[targets[t]]);
        out.y.col(static_cast<Eigen::Index>(t)) = column(targets[t]);
    }

    for (Eigen::Index f = 0; f < d; ++f) {
        const auto col = out.x.col(f);
        out.scaled_min.push_back(col.minCoeff());
        out.scaled_max.push_back(col.maxCoeff());
        double m = mad(std::span<const double>(col.data(), static_cast<std::size_t>(n)));
        if (m == 0.0) {
            m = std::sqrt(column_variance(col));
            report.mad_fallback.push_back(out.features[static_cast<std::size_t>(f)].name);
        }
        out.mad.push_back(m);
        report.mad.emplace_back(out.features[static_cast<std::size_t>(f)].name, m);
    }

    // Covariance repair, cheapest first: jitter, PCA, L2 ridge.
    Eigen::MatrixXd cov = sample_covariance(out.x);
    if (!is_positive_definite(cov)) {
        Eigen::MatrixXd jittered = cov + 1e-6 * Eigen::MatrixXd::Identity(d, d);
        if (is_positive_definite(jittered)) {
            cov = jittered;
            report.covariance_repair = {CovarianceRepair::Kind::Jitter, 1e-6, 0, 0.0};
        } else {
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
            const Eigen::VectorXd ev = es.eigenvalues().reverse();
            const double total = ev.cwiseMax(0.0).sum();
            int k = 0;
            double acc = 0.0;
            while (k < d && (total <= 0.0 || acc < 0.99 * total)) acc += std::max(0.0, ev[k++]);
            Eigen::MatrixXd reduced = ev.head(k).asDiagonal();
            if (is_positive_definite(reduced)) {
                cov = reduced;
                report.covariance_repair = {CovarianceRepair::Kind::Pca, 0.0, k, 0.0};
            } else {
                cov = cov + 1e-3 * Eigen::MatrixXd::Identity(d, d);
                report.covariance_repair = {CovarianceRepair::Kind::L2, 0.0, 0, 1e-3};
            }
        }
    }
    out.covariance = std::move(cov);
    out.report = report;
    return {std::move(out), std::move(report)};
}

Split train_test_split(const PreprocessedDataset& ds, double ratio, std::uint64_t seed) {
    if (!(ratio > 0.0 && ratio < 1.0)) throw ConfigError("split ratio must be in (0, 1)", "split_ratio");
    const auto n = static_cast<std::size_t>(ds.rows());
    const auto n_train = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n)));
    if (n_train == 0 || n_train >= n)
        throw DataError("train/test split leaves an empty partition (n=" + std::to_string(n) + ")");
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::mt19937_64 rng(seed);
    // Fisher-Yates with explicit draws; std::shuffle is not portable across libraries.
    for (std::size_t i = n - 1; i > 0; --i) {
        const std::size_t j = static_cast<std::size_t>(rng() % (i + 1));
        std::swap(idx[i], idx[j]);
    }
    Split s;
    s.train_rows.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
    s.test_rows.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
    s.train = ds.subset(s.train_rows);
    s.test = ds.subset(s.test_rows);
    return s;
}

double median(Vec values) {
    if (values.empty()) throw DataError("median of an empty vector");
    const std::size_t n = values.size();
    const std::size_t mid = n / 2;
    std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
    const double hi = values[mid];
    if (n % 2 == 1) return hi;
    const double lo = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lo + hi);
}

double mad(std::span<const double> values) {
    if (values.empty()) throw DataError("MAD of an empty vector");
    const double m = median(Vec(values.begin(), values.end()));
    Vec dev(values.size());
    std::transform(values.begin(), values.end(), dev.begin(), [m](double v) { return std::abs(v - m); });
    return median(std::move(dev));
}

double quantile(Vec values, double q) {
    if (values.empty()) throw DataError("quantile of an empty vector");
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
}

std::size_t medoid_row(const Eigen::MatrixXd& x) {
    if (x.rows() == 0) throw DataError("medoid of an empty matrix");
    std::size_t best = 0;
    double best_sum = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        double sum = 0.0;
        for (Eigen::Index j = 0; j < x.rows() && sum < best_sum; ++j) sum += (x.row(i) - x.row(j)).norm();
        if (sum < best_sum) {
            best_sum = sum;
            best = static_cast<std::size_t>(i);
        }
    }
    return best;
}

}  // namespace whatif
