#ifndef INSURTREND_PIPELINE_HPP
#define INSURTREND_PIPELINE_HPP

#include "insurtrend/cluster.hpp"
#include "insurtrend/common.hpp"
#include "insurtrend/dtw.hpp"
#include "insurtrend/eval.hpp"
#include "insurtrend/ingest.hpp"
#include "insurtrend/latent.hpp"
#include "insurtrend/lstm.hpp"
#include "insurtrend/ratios.hpp"
#include "insurtrend/report.hpp"
#include "insurtrend/rng.hpp"
#include "insurtrend/table.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace insurtrend {

namespace fs = std::filesystem;

// --- configuration ------------------------------------------------------------

/// Raised for invalid configuration; reported before anything is written.
class ConfigError : public Error {
  public:
    using Error::Error;
};

/// Flat "section.key" -> value view of the configuration with defaults.
inline std::map<std::string, std::string> default_config_entries() {
    std::map<std::string, std::string> e{
        {"general.seed", "42"},
        {"general.workspace", "workspace"},
        {"general.format", "csv"},
        {"ingest.input", ""},
        {"ingest.delimiter", ","},
        {"ingest.company_column", "company"},
        {"ingest.year_column", "year"},
        {"ingest.quarter_column", "quarter"},
        {"ingest.period_column", ""},
        {"ratios.scaling", "within_company"},
        {"fuse.hidden", "64"},
        {"fuse.epochs", "12"},
        {"fuse.batch_size", "16"},
        {"fuse.learning_rate", "0.001"},
        {"fuse.beta1", "0.9"},
        {"fuse.beta2", "0.999"},
        {"fuse.epsilon", "1e-8"},
        {"distances.normalize", "true"},
        {"distances.threads", "0"},
        {"cluster.methods", "kmeans_dtw,hierarchical_complete"},
        {"cluster.m", "4"},
        {"cluster.max_iter", "50"},
        {"cluster.barycenter_iters", "10"},
        {"evaluate.m_min", "2"},
        {"evaluate.m_max", "12"},
        {"evaluate.elbow_fraction", "0.1"},
        {"evaluate.silhouette_fraction", "0.9"},
    };
    for (auto f : kRawFieldNames) e["ingest.column." + std::string(f)] = std::string(f);
    return e;
}

struct PipelineConfig {
    std::map<std::string, std::string> entries;  // resolved, used for manifests
    std::uint64_t seed = 42;
    fs::path workspace;
    TableFormat format = TableFormat::csv;
    fs::path input;
    PanelSchema schema;
    ScalingMode scaling = ScalingMode::within_company;
    lstm::TrainConfig lstm;
    bool dtw_normalize = true;
    unsigned threads = 0;
    std::vector<ClusterMethod> methods;
    std::size_t m = 4;
    std::size_t max_iter = 50;
    std::size_t barycenter_iters = 10;
    std::size_t m_min = 2;
    std::size_t m_max = 12;
    SelectionRule selection;

    std::uint64_t stage_seed(std::string_view stage) const { return stream_seed(seed, stage); }
};

namespace detail {

inline unsigned long long to_count(const std::string& key, const std::string& v, unsigned long long lo = 0) {
    long long x = 0;
    if (!parse_int(v, x) || x < 0 || static_cast<unsigned long long>(x) < lo) {
        throw ConfigError("config '" + key + "': expected an integer >= " + std::to_string(lo) + ", got '" + v + "'");
    }
    return static_cast<unsigned long long>(x);
}

inline double to_real(const std::string& key, const std::string& v) {
    double x = 0.0;
    if (!parse_double(v, x)) throw ConfigError("config '" + key + "': expected a number, got '" + v + "'");
    return x;
}

inline bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError("config '" + key + "': expected true/false, got '" + v + "'");
}

}  // namespace detail

/// Reads an INI file into "section.key" entries. Relative `ingest.input` and
/// `general.workspace` are resolved against the file's directory.
inline std::map<std::string, std::string> read_config_file(const fs::path& path) {
    boost::property_tree::ptree tree;
    try {
        boost::property_tree::ini_parser::read_ini(path.string(), tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ConfigError(std::string("cannot read config: ") + e.what());
    }
    std::map<std::string, std::string> out;
    for (const auto& [section, body] : tree) {
        if (body.empty()) throw ConfigError("config key '" + section + "' must live in a [section]");
        for (const auto& [key, value] : body) out[section + "." + key] = value.get_value<std::string>();
    }
    const auto base = path.has_parent_path() ? path.parent_path() : fs::path(".");
    for (const char* k : {"ingest.input", "general.workspace"}) {
        const auto it = out.find(k);
        if (it != out.end() && !it->second.empty() && fs::path(it->second).is_relative()) {
            it->second = (base / it->second).lexically_normal().string();
        }
    }
    return out;
}

/// Validates and types the merged entries. Unknown keys are rejected.
inline PipelineConfig build_config(const std::map<std::string, std::string>& overrides) {
    PipelineConfig c;
    c.entries = default_config_entries();
    for (const auto& [k, v] : overrides) {
        if (!c.entries.contains(k)) throw ConfigError("unknown config key '" + k + "'");
        c.entries[k] = v;
    }
    const auto& e = c.entries;
    auto get = [&](const std::string& k) -> const std::string& { return e.at(k); };

    c.seed = detail::to_count("general.seed", get("general.seed"));
    c.workspace = get("general.workspace");
    if (c.workspace.empty()) throw ConfigError("config 'general.workspace' must not be empty");
    try {
        c.format = parse_table_format(get("general.format"));
    } catch (const Error& err) {
        throw ConfigError(err.what());
    }
    c.input = get("ingest.input");
    const auto& delim = get("ingest.delimiter");
    if (delim == "\\t" || delim == "tab") c.schema.delimiter = '\t';
    else if (delim.size() == 1) c.schema.delimiter = delim[0];
    else throw ConfigError("config 'ingest.delimiter' must be a single character");
    c.schema.company = get("ingest.company_column");
    c.schema.year = get("ingest.year_column");
    c.schema.quarter = get("ingest.quarter_column");
    c.schema.period = get("ingest.period_column");
    for (std::size_t f = 0; f < kRawFieldCount; ++f) c.schema.fields[f] = get("ingest.column." + std::string(kRawFieldNames[f]));

    try {
        c.scaling = parse_scaling_mode(get("ratios.scaling"));
        c.lstm.hidden = detail::to_count("fuse.hidden", get("fuse.hidden"), 1);
        c.lstm.epochs = detail::to_count("fuse.epochs", get("fuse.epochs"), 1);
        c.lstm.batch_size = detail::to_count("fuse.batch_size", get("fuse.batch_size"), 1);
        c.lstm.learning_rate = detail::to_real("fuse.learning_rate", get("fuse.learning_rate"));
        c.lstm.beta1 = detail::to_real("fuse.beta1", get("fuse.beta1"));
        c.lstm.beta2 = detail::to_real("fuse.beta2", get("fuse.beta2"));
        c.lstm.epsilon = detail::to_real("fuse.epsilon", get("fuse.epsilon"));
        c.lstm.seed = c.stage_seed("fuse");
        c.lstm.validate();
        c.dtw_normalize = detail::to_bool("distances.normalize", get("distances.normalize"));
        c.threads = static_cast<unsigned>(detail::to_count("distances.threads", get("distances.threads")));

        std::string list = get("cluster.methods");
        std::stringstream ss(list);
        for (std::string item; std::getline(ss, item, ',');) {
            item.erase(0, item.find_first_not_of(' '));
            item.erase(item.find_last_not_of(' ') + 1);
            if (!item.empty()) c.methods.push_back(parse_cluster_method(item));
        }
        if (c.methods.empty()) throw ConfigError("config 'cluster.methods' lists no method");
        c.m = detail::to_count("cluster.m", get("cluster.m"), 2);
        c.max_iter = detail::to_count("cluster.max_iter", get("cluster.max_iter"), 1);
        c.barycenter_iters = detail::to_count("cluster.barycenter_iters", get("cluster.barycenter_iters"), 1);
        c.m_min = detail::to_count("evaluate.m_min", get("evaluate.m_min"), 2);
        c.m_max = detail::to_count("evaluate.m_max", get("evaluate.m_max"), 2);
        if (c.m_max < c.m_min) throw ConfigError("config 'evaluate.m_max' is below 'evaluate.m_min'");
        c.selection.elbow_fraction = detail::to_real("evaluate.elbow_fraction", get("evaluate.elbow_fraction"));
        c.selection.silhouette_fraction = detail::to_real("evaluate.silhouette_fraction", get("evaluate.silhouette_fraction"));
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& err) {
        throw ConfigError(err.what());
    }
    return c;
}

// --- hashing and manifests ----------------------------------------------------

inline std::string sha256_hex(std::string_view data) {
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md.data(), &len, EVP_sha256(), nullptr) != 1) {
        throw Error("sha256 digest failed");
    }
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int k = 0; k < len; ++k) {
        out += hex[md[k] >> 4];
        out += hex[md[k] & 0xf];
    }
    return out;
}

inline std::string sha256_file(const fs::path& p) { return sha256_hex(read_text_file(p)); }

inline constexpr std::array<std::string_view, 7> kStages{"ingest", "ratios", "fuse", "distances",
                                                          "cluster", "evaluate", "report"};

/// Upstream stages each stage reads, in pipeline order.
inline std::vector<std::string_view> stage_dependencies(std::string_view stage) {
    if (stage == "ingest") return {};
    if (stage == "ratios") return {"ingest"};
    if (stage == "fuse") return {"ratios"};
    if (stage == "distances") return {"fuse"};
    if (stage == "cluster" || stage == "evaluate") return {"fuse", "distances"};
    if (stage == "report") return {"ingest", "ratios", "fuse", "distances", "cluster", "evaluate"};
    throw Error("unknown stage '" + std::string(stage) + "'");
}

struct ManifestEntry {
    std::string name;
    std::string path;  // relative to the workspace, or absolute for external inputs
    std::string sha256;
};

struct Manifest {
    std::string stage;
    std::vector<ManifestEntry> inputs;
    std::vector<ManifestEntry> outputs;

    const ManifestEntry& output(std::string_view name) const {
        for (const auto& o : outputs)
            if (o.name == name) return o;
        throw Error("stage '" + stage + "' manifest has no output '" + std::string(name) + "'");
    }
};

inline fs::path manifest_path(const fs::path& ws, std::string_view stage) {
    return ws / std::string(stage) / "manifest.json";
}

inline Manifest read_manifest(const fs::path& ws, std::string_view stage) {
    const auto j = nlohmann::json::parse(read_text_file(manifest_path(ws, stage)));
    Manifest m;
    m.stage = j.at("stage").get<std::string>();
    for (const char* side : {"inputs", "outputs"}) {
        auto& dst = std::string_view(side) == "inputs" ? m.inputs : m.outputs;
        for (const auto& e : j.at(side))
            dst.push_back({e.at("name").get<std::string>(), e.at("path").get<std::string>(), e.at("sha256").get<std::string>()});
    }
    return m;
}

inline fs::path resolve(const fs::path& ws, const std::string& p) {
    const fs::path path(p);
    return path.is_absolute() ? path : ws / path;
}

// --- stage plumbing -----------------------------------------------------------

class Stage {
  public:
    Stage(const PipelineConfig& cfg, std::string_view name) : cfg_(cfg), name_(name) {
        // Every upstream stage must have completed, and its outputs must still
        // match what its manifest recorded.
        for (const auto dep : stage_dependencies(name)) {
            if (!fs::exists(manifest_path(cfg.workspace, dep))) {
                throw Error("stage '" + name_ + "' needs the output of stage '" + std::string(dep) + "'; run `" +
                            std::string(dep) + "` first");
            }
            upstream_.emplace(std::string(dep), read_manifest(cfg.workspace, dep));
        }
    }

    /// Path of an upstream artifact, after checking it against its manifest.
    fs::path consume(std::string_view stage, std::string_view artifact) {
        const auto& entry = upstream_.at(std::string(stage)).output(artifact);
        const auto path = resolve(cfg_.workspace, entry.path);
        if (!fs::exists(path)) {
            throw Error("artifact '" + entry.path + "' is missing; run `" + std::string(stage) + "` first");
        }
        if (sha256_file(path) != entry.sha256) {
            throw Error("artifact '" + entry.path + "' does not match its manifest; rerun `" + std::string(stage) + "`");
        }
        inputs_.push_back({std::string(stage) + "/" + std::string(artifact), entry.path, entry.sha256});
        return path;
    }

    Table read(std::string_view stage, std::string_view artifact) { return read_table(consume(stage, artifact)); }

    void add_external_input(const std::string& name, const fs::path& path) {
        inputs_.push_back({name, fs::absolute(path).lexically_normal().string(), sha256_file(path)});
    }

    /// Writes a table artifact, stamping seed and provenance into its header.
    void write(std::string_view artifact, Table t) {
        t.meta["artifact"] = std::string(artifact);
        t.meta["seed"] = std::to_string(cfg_.seed);
        t.meta["tool"] = std::string("insurtrend ") + kToolVersion;
        const auto rel = fs::path(name_) / (std::string(artifact) + extension(cfg_.format));
        write_text_file(cfg_.workspace / rel, cfg_.format == TableFormat::csv ? to_csv(t) : to_json(t));
        record(artifact, rel);
    }

    void write_text(std::string_view artifact, const std::string& filename, const std::string& text) {
        const auto rel = fs::path(name_) / filename;
        write_text_file(cfg_.workspace / rel, text);
        record(artifact, rel);
    }

    void finish() {
        nlohmann::ordered_json j;
        j["stage"] = name_;
        j["tool_version"] = kToolVersion;
        j["seed"] = cfg_.seed;
        j["config"] = cfg_.entries;
        auto entries = [](const std::vector<ManifestEntry>& v) {
            nlohmann::ordered_json a = nlohmann::ordered_json::array();
            for (const auto& e : v) a.push_back({{"name", e.name}, {"path", e.path}, {"sha256", e.sha256}});
            return a;
        };
        j["inputs"] = entries(inputs_);
        j["outputs"] = entries(outputs_);
        const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
        char stamp[32];
        std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
        j["created_utc"] = stamp;
        write_text_file(manifest_path(cfg_.workspace, name_), j.dump(2) + "\n");
    }

    const PipelineConfig& config() const { return cfg_; }

  private:
    void record(std::string_view artifact, const fs::path& rel) {
        outputs_.push_back({std::string(artifact), rel.generic_string(), sha256_file(cfg_.workspace / rel)});
    }

    const PipelineConfig& cfg_;
    std::string name_;
    std::map<std::string, Manifest> upstream_;
    std::vector<ManifestEntry> inputs_, outputs_;
};

// --- stages -------------------------------------------------------------------

inline void run_ingest(const PipelineConfig& cfg) {
    if (cfg.input.empty()) throw ConfigError("config 'ingest.input' is not set");
    if (!fs::exists(cfg.input)) throw ConfigError("input panel '" + cfg.input.string() + "' does not exist");
    Stage st(cfg, "ingest");
    const CompanyPanel panel = load_panel(cfg.input, cfg.schema);
    st.add_external_input("source", cfg.input);

    const auto summary = panel_summary(panel);
    Table s({"company", "observed_quarters", "total_quarters"}, {false, true, true});
    s.meta["first_period"] = summary.first.to_string();
    s.meta["last_period"] = summary.last.to_string();
    for (std::size_t i = 0; i < summary.companies.size(); ++i)
        s.rows.push_back({summary.companies[i], std::to_string(summary.observed_quarters[i]),
                          std::to_string(panel.num_periods())});
    st.write("panel", panel_to_table(panel));
    st.write("panel_summary", std::move(s));
    st.finish();
}

inline void run_ratios(const PipelineConfig& cfg) {
    Stage st(cfg, "ratios");
    const CompanyPanel panel = panel_from_table(st.read("ingest", "panel"));
    const RatioTensor raw = compute_ratios(panel);
    const ScalingSpec spec = fit_scaling(raw, cfg.scaling);
    Table raw_t = ratios_to_table(raw);
    raw_t.meta["units"] = "percent";
    Table scaled_t = ratios_to_table(apply_scaling(raw, spec));
    scaled_t.meta["units"] = "standardized";
    scaled_t.meta["scaling_mode"] = std::string(to_string(cfg.scaling));
    st.write("ratios", std::move(raw_t));
    st.write("ratios_scaled", std::move(scaled_t));
    st.write("scaling", scaling_to_table(spec));
    st.finish();
}

inline void run_fuse(const PipelineConfig& cfg) {
    Stage st(cfg, "fuse");
    const RatioTensor scaled = ratios_from_table(st.read("ratios", "ratios_scaled"));
    const auto result = lstm::train(scaled, cfg.lstm);
    Table hist({"epoch", "loss"}, {true, true});
    for (std::size_t e = 0; e < result.loss_history.size(); ++e)
        hist.rows.push_back({std::to_string(e + 1), format_double(result.loss_history[e])});
    st.write("latent", latent_to_table(lstm::encode(result.params, scaled)));
    st.write("loss_history", std::move(hist));
    st.write_text("checkpoint", "checkpoint.txt", lstm::checkpoint_to_string(result.params, cfg.lstm));
    st.finish();
}

inline void run_distances(const PipelineConfig& cfg) {
    Stage st(cfg, "distances");
    const LatentSeries latent = latent_from_table(st.read("fuse", "latent"));
    const DistanceMatrix d = pairwise_matrix(latent, cfg.dtw_normalize, cfg.threads);
    const auto order = hierarchical_complete(d).leaf_order;
    st.write("distances", distance_matrix_to_table(d));
    st.write("distances_ordered", distance_matrix_to_table(reorder(d, order)));
    st.write("leaf_order", leaf_order_to_table(d.labels, order));
    st.finish();
}

inline void run_cluster(const PipelineConfig& cfg) {
    Stage st(cfg, "cluster");
    const LatentSeries latent = latent_from_table(st.read("fuse", "latent"));
    const DistanceMatrix d = distance_matrix_from_table(st.read("distances", "distances"));
    if (cfg.m > latent.num_companies()) {
        throw ConfigError("config 'cluster.m' = " + std::to_string(cfg.m) + " exceeds the " +
                          std::to_string(latent.num_companies()) + " companies");
    }
    std::vector<ClusterAssignment> assignments;
    for (const auto method : cfg.methods) {
        if (method == ClusterMethod::kmeans_dtw) {
            const auto km = kmeans_dtw(latent, {cfg.m, cfg.stage_seed("cluster"), cfg.max_iter, cfg.barycenter_iters});
            Table inertia({"iteration", "inertia"}, {true, true});
            for (std::size_t k = 0; k < km.assignment.inertia_history.size(); ++k)
                inertia.rows.push_back({std::to_string(k + 1), format_double(km.assignment.inertia_history[k])});
            st.write("centers", centers_to_table(km.centers, latent.periods));
            st.write("inertia", std::move(inertia));
            assignments.push_back(km.assignment);
        } else {
            const auto dend = hierarchical_complete(d);
            st.write("dendrogram", dendrogram_to_table(dend));
            auto cut = cut_dendrogram(dend, cfg.m);
            st.write("centers_hierarchical",
                     centers_to_table(assignment_centers(latent, cut.labels, cfg.m, cfg.barycenter_iters), latent.periods));
            assignments.push_back(std::move(cut));
        }
    }
    st.write("assignments", assignments_to_table(latent.companies, assignments));
    st.finish();
}

inline std::vector<std::size_t> sweep_range(const PipelineConfig& cfg, std::size_t n) {
    std::vector<std::size_t> ms;
    for (std::size_t m = cfg.m_min; m <= std::min(cfg.m_max, n); ++m) ms.push_back(m);
    if (ms.empty()) throw ConfigError("evaluation range is empty for " + std::to_string(n) + " companies");
    return ms;
}

inline void run_evaluate(const PipelineConfig& cfg) {
    Stage st(cfg, "evaluate");
    const LatentSeries latent = latent_from_table(st.read("fuse", "latent"));
    const DistanceMatrix d = distance_matrix_from_table(st.read("distances", "distances"));
    const auto ms = sweep_range(cfg, latent.num_companies());
    std::vector<ValidationCurve> curves;
    nlohmann::ordered_json sel = nlohmann::ordered_json::object();
    for (const auto method : cfg.methods) {
        curves.push_back(validation_sweep(latent, d, ms, method,
                                          {cfg.stage_seed("cluster"), cfg.max_iter, cfg.barycenter_iters}));
        const auto s = select_m(curves.back(), cfg.selection);
        sel[std::string(to_string(method))] = {
            {"chosen_m", s.chosen},
            {"elbow_m", s.elbow},
            {"best_silhouette_m", s.best_silhouette},
            {"best_silhouette", s.best_silhouette_value},
            {"candidates", s.candidates},
            {"rule", {{"elbow_fraction", cfg.selection.elbow_fraction},
                      {"silhouette_fraction", cfg.selection.silhouette_fraction}}},
        };
    }
    st.write("validation", validation_to_table(curves));
    nlohmann::ordered_json doc{{"seed", cfg.seed}, {"tool", std::string("insurtrend ") + kToolVersion}, {"selection", sel}};
    st.write_text("selection", "selection.json", render_json(doc));
    st.finish();
}

/// Silhouette reported for the original medical-insurer study at four clusters.
inline constexpr double kReferenceSilhouetteAt4 = 0.26;

inline void run_report(const PipelineConfig& cfg) {
    Stage st(cfg, "report");
    const CompanyPanel panel = panel_from_table(st.read("ingest", "panel"));
    const RatioTensor raw = ratios_from_table(st.read("ratios", "ratios"));
    const LatentSeries latent = latent_from_table(st.read("fuse", "latent"));
    const DistanceMatrix d = distance_matrix_from_table(st.read("distances", "distances"));
    const Table assign_t = st.read("cluster", "assignments");
    Table validation = st.read("evaluate", "validation");
    const auto selection = nlohmann::json::parse(read_text_file(st.consume("evaluate", "selection")));

    // Re-assemble per-method assignments from the long table.
    const auto cc = assign_t.column("company"), mc = assign_t.column("method"), lc = assign_t.column("label");
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < latent.companies.size(); ++i) index[latent.companies[i]] = i;
    std::vector<ClusterAssignment> assignments;
    for (std::size_t r = 0; r < assign_t.rows.size(); ++r) {
        const auto method = parse_cluster_method(assign_t.rows[r][mc]);
        auto it = std::find_if(assignments.begin(), assignments.end(), [&](const auto& a) { return a.method == method; });
        if (it == assignments.end()) {
            assignments.push_back({});
            it = std::prev(assignments.end());
            it->method = method;
            it->labels.assign(latent.num_companies(), 0);
        }
        const auto l = static_cast<std::size_t>(assign_t.number(r, lc));
        it->labels.at(index.at(assign_t.rows[r][cc])) = l;
        it->m = std::max(it->m, l + 1);
    }

    nlohmann::ordered_json summary;
    summary["seed"] = cfg.seed;
    summary["tool"] = std::string("insurtrend ") + kToolVersion;
    summary["companies"] = latent.num_companies();
    summary["periods"] = latent.num_periods();
    summary["features"] = raw.features;
    summary["dtw_normalized"] = d.normalized;
    summary["scaling"] = std::string(to_string(cfg.scaling));
    for (const auto& a : assignments) {
        nlohmann::ordered_json entry;
        entry["m"] = a.m;
        std::vector<std::size_t> sizes(a.m, 0);
        for (const auto l : a.labels) ++sizes[l];
        entry["cluster_sizes"] = sizes;
        entry["silhouette"] = silhouette_mean(d, a.labels);
        summary["methods"][std::string(to_string(a.method))] = entry;
    }
    const auto vm = validation.column("method"), vk = validation.column("m"), vs = validation.column("silhouette");
    for (std::size_t r = 0; r < validation.rows.size(); ++r) {
        if (validation.number(r, vk) == 4.0) {
            summary["silhouette_at_4"][validation.rows[r][vm]] = validation.number(r, vs);
        }
    }
    summary["reference_silhouette_at_4"] = kReferenceSilhouetteAt4;
    summary["selection"] = selection.at("selection");

    st.write("cluster_table", cluster_table(latent.companies, assignments));
    st.write("heatmaps", export_heatmap_tables(panel, raw, latent));
    validation.meta.clear();
    st.write("validation", std::move(validation));
    st.write_text("summary", "summary.json", render_json(summary));
    st.finish();
}

/// Runs one named stage. Throws ConfigError / Error on failure.
inline void run_subcommand(std::string_view name, const PipelineConfig& cfg) {
    if (name == "ingest") run_ingest(cfg);
    else if (name == "ratios") run_ratios(cfg);
    else if (name == "fuse") run_fuse(cfg);
    else if (name == "distances") run_distances(cfg);
    else if (name == "cluster") run_cluster(cfg);
    else if (name == "evaluate") run_evaluate(cfg);
    else if (name == "report") run_report(cfg);
    else throw Error("unknown subcommand '" + std::string(name) + "'");
}

inline void run_all(const PipelineConfig& cfg) {
    for (const auto s : kStages) run_subcommand(s, cfg);
}

/// Re-hashes every file listed in every manifest. Returns one line per problem.
inline std::vector<std::string> verify_workspace(const fs::path& ws) {
    std::vector<std::string> problems;
    for (const auto stage : kStages) {
        if (!fs::exists(manifest_path(ws, stage))) continue;
        const Manifest m = read_manifest(ws, stage);
        for (const auto* side : {&m.inputs, &m.outputs}) {
            for (const auto& e : *side) {
                const auto p = resolve(ws, e.path);
                if (!fs::exists(p)) problems.push_back(std::string(stage) + ": missing " + e.path);
                else if (sha256_file(p) != e.sha256) problems.push_back(std::string(stage) + ": hash mismatch " + e.path);
            }
        }
    }
    return problems;
}

}  // namespace insurtrend

#endif
