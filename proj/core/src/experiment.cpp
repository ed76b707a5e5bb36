#include "tabgns/experiment.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "json.hpp"

#include "tabgns/checkpoint.hpp"
#include "tabgns/errors.hpp"
#include "tabgns/parallel.hpp"

namespace fs = std::filesystem;

namespace tabgns {

namespace {

using json = nlohmann::ordered_json;

// ---- config <-> json ------------------------------------------------------

std::uint64_t as_u64(const json& v, const std::string& key) {
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return v.get<std::uint64_t>();
    if (v.is_string()) {
        try {
            std::size_t used = 0;
            const std::string s = v.get<std::string>();
            const std::uint64_t out = std::stoull(s, &used);
            if (used == s.size()) return out;
        } catch (...) {
        }
    }
    throw ConfigError("config key '" + key + "' needs a non-negative integer");
}

double as_f64(const json& v, const std::string& key) {
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) {
        try {
            std::size_t used = 0;
            const std::string s = v.get<std::string>();
            const double out = std::stod(s, &used);
            if (used == s.size()) return out;
        } catch (...) {
        }
    }
    throw ConfigError("config key '" + key + "' needs a number");
}

bool as_bool(const json& v, const std::string& key) {
    if (v.is_boolean()) return v.get<bool>();
    if (v.is_string()) {
        const std::string s = v.get<std::string>();
        if (s == "true" || s == "1") return true;
        if (s == "false" || s == "0") return false;
    }
    if (v.is_number_integer()) return v.get<std::int64_t>() != 0;
    throw ConfigError("config key '" + key + "' needs true or false");
}

std::string as_str(const json& v, const std::string& key) {
    if (v.is_string()) return v.get<std::string>();
    throw ConfigError("config key '" + key + "' needs a string");
}

std::vector<std::string> split_commas(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!cur.empty() || !out.empty()) out.push_back(cur);
    return out;
}

std::vector<std::string> as_str_list(const json& v, const std::string& key) {
    if (v.is_array()) {
        std::vector<std::string> out;
        for (const auto& e : v) out.push_back(as_str(e, key));
        return out;
    }
    if (v.is_string()) {
        const std::string s = v.get<std::string>();
        return s.empty() ? std::vector<std::string>{} : split_commas(s);
    }
    throw ConfigError("config key '" + key + "' needs a list of strings");
}

std::vector<std::size_t> as_size_list(const json& v, const std::string& key) {
    std::vector<std::size_t> out;
    if (v.is_array()) {
        for (const auto& e : v) out.push_back(as_u64(e, key));
        return out;
    }
    if (v.is_string()) {
        for (const std::string& part : split_commas(v.get<std::string>())) {
            out.push_back(as_u64(json(part), key));
        }
        return out;
    }
    throw ConfigError("config key '" + key + "' needs a list of integers");
}

std::array<double, 3> as_frac3(const json& v, const std::string& key) {
    std::vector<double> parts;
    if (v.is_array()) {
        for (const auto& e : v) parts.push_back(as_f64(e, key));
    } else if (v.is_string()) {
        for (const std::string& p : split_commas(v.get<std::string>())) {
            parts.push_back(as_f64(json(p), key));
        }
    }
    if (parts.size() != 3) throw ConfigError("config key '" + key + "' needs three fractions");
    return {parts[0], parts[1], parts[2]};
}

void apply(ExperimentConfig& c, const std::string& section, const std::string& key,
           const json& v) {
    const std::string dotted = section.empty() ? key : section + "." + key;
    if (section.empty()) {
        if (key == "method") {
            c.method = as_str(v, dotted);
        } else if (key == "out") {
            c.out = as_str(v, dotted);
        } else if (key == "checkpoint") {
            c.checkpoint = as_str(v, dotted);
        } else if (key == "trials") {
            c.trials = as_u64(v, dotted);
        } else if (key == "seed") {
            c.search.seed = as_u64(v, dotted);
        } else {
            throw ConfigError("unknown config key '" + dotted + "'");
        }
    } else if (section == "data") {
        if (key == "csv") {
            c.data.csv = as_str(v, dotted);
        } else if (key == "targets") {
            c.data.targets = as_str_list(v, dotted);
        } else if (key == "categoricals") {
            c.data.categoricals = as_str_list(v, dotted);
        } else if (key == "impute_mean") {
            c.data.impute_mean = as_bool(v, dotted);
        } else if (key == "task") {
            c.data.task = task_from_string(as_str(v, dotted));
        } else if (key == "input_dim") {
            c.data.input_dim = as_u64(v, dotted);
        } else if (key == "teacher_widths") {
            c.data.teacher_widths = as_size_list(v, dotted);
        } else if (key == "rows") {
            c.data.rows = as_u64(v, dotted);
        } else if (key == "noise_std") {
            c.data.noise_std = as_f64(v, dotted);
        } else if (key == "output_dim") {
            c.data.output_dim = as_u64(v, dotted);
        } else if (key == "fractions") {
            c.data.fractions = as_frac3(v, dotted);
        } else if (key == "seed") {
            c.data.seed = as_u64(v, dotted);
            c.data.seed_set = true;
        } else {
            throw ConfigError("unknown config key '" + dotted + "'");
        }
    } else if (section == "space") {
        if (key == "input_dim") {
            c.space.input_dim = as_u64(v, dotted);
        } else if (key == "output_dim") {
            c.space.output_dim = as_u64(v, dotted);
        } else if (key == "hidden_layers") {
            c.space.hidden_layers = as_u64(v, dotted);
        } else if (key == "max_width") {
            c.space.max_width = as_u64(v, dotted);
        } else {
            throw ConfigError("unknown config key '" + dotted + "'");
        }
    } else if (section == "search") {
        if (key == "lr_weights") {
            c.search.lr_weights = as_f64(v, dotted);
        } else if (key == "lr_gates") {
            c.search.lr_gates = as_f64(v, dotted);
        } else if (key == "tau") {
            c.search.tau = as_f64(v, dotted);
        } else if (key == "gate_init") {
            c.search.gate_init = as_f64(v, dotted);
        } else if (key == "max_epochs") {
            c.search.max_epochs = as_u64(v, dotted);
        } else if (key == "patience") {
            c.search.patience = as_u64(v, dotted);
        } else if (key == "batch_size") {
            c.search.batch_size = as_u64(v, dotted);
        } else if (key == "finetune_epochs") {
            c.search.finetune_epochs = as_u64(v, dotted);
        } else if (key == "seed") {
            c.search.seed = as_u64(v, dotted);
        } else if (key == "optimizer") {
            c.search.optimizer = optimizer_kind_from_string(as_str(v, dotted));
        } else if (key == "grad_clip") {
            c.search.grad_clip = as_f64(v, dotted);
        } else if (key == "noise_per_sample") {
            c.search.noise_per_sample = as_bool(v, dotted);
        } else {
            throw ConfigError("unknown config key '" + dotted + "'");
        }
    } else {
        throw ConfigError("unknown config section '" + section + "'");
    }
}

json config_json(const ExperimentConfig& c) {
    json j;
    j["method"] = c.method;
    j["out"] = c.out;
    j["checkpoint"] = c.checkpoint;
    j["trials"] = c.trials;
    json d;
    d["csv"] = c.data.csv;
    d["targets"] = c.data.targets;
    d["categoricals"] = c.data.categoricals;
    d["impute_mean"] = c.data.impute_mean;
    d["task"] = to_string(c.data.task);
    d["input_dim"] = c.data.input_dim;
    d["teacher_widths"] = c.data.teacher_widths;
    d["rows"] = c.data.rows;
    d["noise_std"] = c.data.noise_std;
    d["output_dim"] = c.data.output_dim;
    d["fractions"] = c.data.fractions;
    // an unset split seed means "follow the run seed"; emitting it would
    // freeze that choice on the next parse
    if (c.data.seed_set) d["seed"] = c.data.seed;
    j["data"] = std::move(d);
    json s;
    s["input_dim"] = c.space.input_dim;
    s["output_dim"] = c.space.output_dim;
    s["hidden_layers"] = c.space.hidden_layers;
    s["max_width"] = c.space.max_width;
    j["space"] = std::move(s);
    json r;
    r["lr_weights"] = c.search.lr_weights;
    r["lr_gates"] = c.search.lr_gates;
    r["tau"] = c.search.tau;
    r["gate_init"] = c.search.gate_init;
    r["max_epochs"] = c.search.max_epochs;
    r["patience"] = c.search.patience;
    r["batch_size"] = c.search.batch_size;
    r["finetune_epochs"] = c.search.finetune_epochs;
    r["seed"] = c.search.seed;
    r["optimizer"] = to_string(c.search.optimizer);
    r["grad_clip"] = c.search.grad_clip;
    r["noise_per_sample"] = c.search.noise_per_sample;
    j["search"] = std::move(r);
    return j;
}

// Reports must not depend on where a run was written: two runs of the same
// config+seed into different directories stay byte-identical.
json portable_config_json(ExperimentConfig c) {
    c.out.clear();
    c.checkpoint.clear();
    return config_json(c);
}

// ---- artifact helpers -----------------------------------------------------

double reported(double seconds) { return determinism_path() ? 0.0 : seconds; }

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc | std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << text;
    if (!out) throw DataError("failed writing " + path.string());
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::string history_csv(const std::vector<EpochRecord>& history) {
    std::string out = "epoch,train_loss,valid_loss,expected_size,wall_seconds\n";
    for (const EpochRecord& rec : history) {
        out += std::to_string(rec.epoch);
        out += ',';
        out += format_double(rec.train_loss);
        out += ',';
        out += format_double(rec.valid_loss);
        out += ',';
        out += format_double(rec.expected_size);
        out += ',';
        out += format_double(reported(rec.wall_seconds));
        out += '\n';
    }
    return out;
}

std::uint64_t fnv_bytes(std::uint64_t h, const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

std::uint64_t fnv_matrix(std::uint64_t h, const Matrix& m) {
    const std::uint64_t shape[2] = {m.rows(), m.cols()};
    h = fnv_bytes(h, shape, sizeof shape);
    return fnv_bytes(h, m.values().data(), m.values().size() * sizeof(double));
}

std::string dataset_hash(const TabularDataset& d) {
    std::uint64_t h = 14695981039346656037ull;
    h = fnv_matrix(h, d.features);
    h = fnv_matrix(h, d.targets);
    for (const std::string& n : d.feature_names) h = fnv_bytes(h, n.data(), n.size() + 1);
    for (const std::string& n : d.target_names) h = fnv_bytes(h, n.data(), n.size() + 1);
    const std::string task = to_string(d.task);
    h = fnv_bytes(h, task.data(), task.size());
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

json metrics_json(const EvalMetrics& m, Task task) {
    json j;
    j["loss"] = m.loss;
    if (task == Task::classification) j["accuracy"] = m.accuracy;
    j["params_paper"] = m.params_paper;
    j["params_full"] = m.params_full;
    j["inference_seconds_per_1k"] = reported(m.inference_seconds_per_1k);
    return j;
}

json dataset_json(const ExperimentConfig& c, const PreparedData& data) {
    json j;
    j["source"] = c.data.csv.empty() ? std::string("synthetic") : c.data.csv;
    j["hash"] = data.hash;
    j["rows"] = data.dataset.rows();
    j["features"] = data.dataset.n_features();
    j["outputs"] = data.dataset.n_outputs();
    j["task"] = to_string(data.dataset.task);
    return j;
}

json seeds_json(std::uint64_t seed) {
    const DerivedSeeds ds = derived_seeds(seed);
    json j;
    j["supernet_init"] = ds.supernet_init;
    j["train_shuffle"] = ds.train_shuffle;
    j["valid_shuffle"] = ds.valid_shuffle;
    j["gate_noise"] = ds.gate_noise;
    j["fixed_init"] = ds.fixed_init;
    j["fixed_shuffle"] = ds.fixed_shuffle;
    j["finetune_shuffle"] = ds.finetune_shuffle;
    return j;
}

json space_json(const SearchSpace& s) {
    json j;
    j["input_dim"] = s.input_dim;
    j["output_dim"] = s.output_dim;
    j["hidden_layers"] = s.hidden_layers;
    j["max_width"] = s.max_width;
    return j;
}

json series_json(const std::vector<EpochRecord>& history) {
    json sizes = json::array();
    json opens = json::array();
    for (const EpochRecord& rec : history) {
        sizes.push_back(rec.expected_size);
        opens.push_back(rec.open_count);
    }
    json j;
    j["expected_size"] = std::move(sizes);
    j["open_count"] = std::move(opens);
    return j;
}

void write_dataset_meta(const fs::path& dir, const ExperimentConfig& c,
                        const PreparedData& data) {
    const Splits& s = data.splits;
    json j;
    j["source"] = c.data.csv.empty() ? std::string("synthetic") : c.data.csv;
    j["hash"] = data.hash;
    j["task"] = to_string(data.dataset.task);
    j["rows"] = json{{"total", data.dataset.rows()},
                     {"train", s.train.rows()},
                     {"valid", s.valid.rows()},
                     {"test", s.test.rows()}};
    j["fractions"] = s.fractions;
    j["split_seed"] = s.split_seed;
    j["feature_names"] = data.dataset.feature_names;
    j["target_names"] = data.dataset.target_names;
    if (data.dataset.task == Task::classification) {
        j["n_classes"] = data.dataset.n_classes;
        j["class_labels"] = data.dataset.class_labels;
    }
    if (!data.dataset.categories.empty()) {
        json cats = json::array();
        for (const CategoryMap& c2 : data.dataset.categories) {
            cats.push_back(json{{"column", c2.column}, {"values", c2.values}});
        }
        j["categories"] = std::move(cats);
    }
    if (data.dataset.teacher) {
        const TeacherSpec& t = *data.dataset.teacher;
        j["teacher"] = json{{"input_dim", t.input_dim},
                            {"widths", t.widths},
                            {"output_dim", t.output_dim},
                            {"noise_std", t.noise_std},
                            {"seed", t.seed}};
    }
    json norm;
    norm["applied"] = s.normalized;
    if (s.normalized) {
        norm["feature_mean"] = s.norm.feature_mean;
        norm["feature_std"] = s.norm.feature_std;
        norm["target_standardized"] = s.norm.target_standardized;
        if (s.norm.target_standardized) {
            norm["target_mean"] = s.norm.target_mean;
            norm["target_std"] = s.norm.target_std;
        }
    }
    j["normalization"] = std::move(norm);
    write_text(dir / "dataset.meta", j.dump(2) + "\n");
}

void write_timing(const fs::path& dir, const json& measured) {
    json j;
    j["determinism_path"] = determinism_path();
    j["measured_wall_seconds"] = measured;
    write_text(dir / "timing.json", j.dump(2) + "\n");
}

fs::path ensure_out_dir(const ExperimentConfig& c) {
    if (c.out.empty()) throw ConfigError("an output directory is required (--out DIR)");
    fs::path dir(c.out);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw DataError("cannot create output directory " + dir.string());
    return dir;
}

std::size_t output_dim_of(const TabularDataset& d) {
    return d.task == Task::classification ? d.n_classes : d.targets.cols();
}

const Normalization* norm_of(const Splits& s) { return s.normalized ? &s.norm : nullptr; }

} // namespace

bool determinism_path() { return max_threads() <= 1; }

ExperimentConfig parse_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config root must be a JSON object");

    ExperimentConfig c;
    for (const auto& [key, value] : j.items()) {
        if (value.is_object()) {
            for (const auto& [k2, v2] : value.items()) apply(c, key, k2, v2);
        } else {
            apply(c, "", key, value);
        }
    }
    return c;
}

ExperimentConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

void apply_override(ExperimentConfig& config, const std::string& dotted_key,
                    const std::string& raw_value) {
    std::string section, key;
    const std::size_t dot = dotted_key.find('.');
    if (dot == std::string::npos) {
        key = dotted_key;
    } else {
        section = dotted_key.substr(0, dot);
        key = dotted_key.substr(dot + 1);
    }
    if (key.empty()) throw ConfigError("bad override key '" + dotted_key + "'");

    json value;
    try {
        value = json::parse(raw_value);
        if (value.is_object()) value = json(raw_value); // objects make no sense here
    } catch (const json::parse_error&) {
        value = json(raw_value);
    }
    try {
        apply(config, section, key, value);
    } catch (const ConfigError&) {
        if (value.is_string()) throw;
        apply(config, section, key, json(raw_value)); // e.g. --out 123: keep it verbatim
    }
}

std::string serialize_config(const ExperimentConfig& config) {
    return config_json(config).dump(2) + "\n";
}

PreparedData prepare_data(ExperimentConfig& config) {
    if (!config.data.seed_set) {
        config.data.seed = config.search.seed;
        config.data.seed_set = true;
    }

    PreparedData out;
    if (!config.data.csv.empty()) {
        if (config.data.targets.empty()) {
            throw ConfigError("data.targets is required for CSV input");
        }
        CsvOptions opts;
        opts.target_columns = config.data.targets;
        opts.task = config.data.task;
        opts.categorical_columns = config.data.categoricals;
        opts.impute_mean = config.data.impute_mean;
        out.dataset = load_csv(config.data.csv, opts);
    } else {
        if (config.data.task != Task::regression) {
            throw ConfigError("the synthetic teacher-student generator is regression-only");
        }
        out.dataset = make_teacher_student(config.data.input_dim, config.data.teacher_widths,
                                           config.data.rows, config.data.noise_std,
                                           config.data.seed, config.data.output_dim);
    }
    out.hash = dataset_hash(out.dataset);
    out.splits = normalize(split(out.dataset, config.data.fractions, config.data.seed));

    config.space.task = out.dataset.task;
    if (config.space.input_dim == 0) config.space.input_dim = out.splits.train.n_features();
    if (config.space.output_dim == 0) config.space.output_dim = output_dim_of(out.dataset);
    return out;
}

int cmd_search(ExperimentConfig config) {
    config.method = "tabgns";
    const fs::path dir = ensure_out_dir(config);
    PreparedData data = prepare_data(config);
    write_text(dir / "config.resolved", serialize_config(config));

    SearchResult result = search(data.splits, config.space, config.search);
    TrainedModel tuned = finetune(result.architecture, data.splits, config.search);

    const Task task = data.dataset.task;
    json report;
    report["schema"] = "tabgns-run-report-v1";
    report["method"] = config.method;
    report["seed"] = config.search.seed;
    report["dataset"] = dataset_json(config, data);
    report["space"] = space_json(config.space);
    report["derived_seeds"] = seeds_json(config.search.seed);
    report["search"] = json{{"epochs_run", result.history.size()},
                            {"best_epoch", result.best_epoch},
                            {"best_valid_loss", result.best_valid_loss},
                            {"clip_events", result.clip_events},
                            {"wall_seconds", reported(result.wall_seconds)}};
    report["finetune"] = json{{"epochs_run", tuned.history.size()},
                              {"best_epoch", tuned.best_epoch},
                              {"best_valid_loss", tuned.best_valid_loss},
                              {"clip_events", tuned.clip_events},
                              {"wall_seconds", reported(tuned.wall_seconds)}};
    report["extracted"] = json{{"hidden_widths", tuned.architecture.hidden_widths()},
                               {"params_paper", tuned.test_metrics.params_paper},
                               {"params_full", tuned.test_metrics.params_full}};
    report["series"] = series_json(result.history);
    report["search_metrics"] = metrics_json(result.test_metrics, task);
    report["final_metrics"] = metrics_json(tuned.test_metrics, task);
    report["total_wall_seconds"] = reported(result.wall_seconds + tuned.wall_seconds);
    report["config"] = portable_config_json(config);

    write_text(dir / "report.json", report.dump(2) + "\n");
    write_text(dir / "history.csv", history_csv(result.history));
    write_dataset_meta(dir, config, data);
    save_checkpoint(Checkpoint{config.search.seed, result.net, tuned.architecture},
                    (dir / "model.ckpt").string());
    write_timing(dir, json{{"search", result.wall_seconds},
                           {"finetune", tuned.wall_seconds},
                           {"total", result.wall_seconds + tuned.wall_seconds}});

    std::cout << "search: " << result.history.size() << " epochs (best " << result.best_epoch
              << "), valid loss " << format_double(result.best_valid_loss) << "\n";
    std::cout << "extracted widths:";
    for (std::size_t w : tuned.architecture.hidden_widths()) std::cout << ' ' << w;
    std::cout << " (params " << tuned.test_metrics.params_paper << " hidden-to-hidden, "
              << tuned.test_metrics.params_full << " full)\n";
    std::cout << "test " << (task == Task::classification ? "accuracy " : "loss ")
              << format_double(task == Task::classification ? tuned.test_metrics.accuracy
                                                            : tuned.test_metrics.loss)
              << "\n";
    std::cout << "wall seconds: search " << format_double(result.wall_seconds) << ", finetune "
              << format_double(tuned.wall_seconds) << "\n";
    std::cout << "wrote " << dir.string() << "\n";
    return 0;
}

int cmd_baseline(ExperimentConfig config) {
    if (config.method != "large-mlp" && config.method != "random-search") {
        throw ConfigError("baseline needs method=large-mlp or method=random-search");
    }
    const fs::path dir = ensure_out_dir(config);
    PreparedData data = prepare_data(config);
    write_text(dir / "config.resolved", serialize_config(config));

    const Task task = data.dataset.task;
    json report;
    report["schema"] = "tabgns-run-report-v1";
    report["method"] = config.method;
    report["seed"] = config.search.seed;
    report["dataset"] = dataset_json(config, data);
    report["space"] = space_json(config.space);
    report["derived_seeds"] = seeds_json(config.search.seed);

    TrainedModel model;
    double total_seconds = 0.0;
    if (config.method == "large-mlp") {
        const std::vector<std::size_t> widths(config.space.hidden_layers,
                                              config.space.max_width);
        model = train_fixed(widths, data.splits, config.search);
        total_seconds = model.wall_seconds;
    } else {
        RandomSearchResult rs =
            random_search_baseline(config.space, data.splits, config.search, config.trials);
        json trials = json::array();
        for (std::size_t t = 0; t < rs.sampled.size(); ++t) {
            trials.push_back(json{{"widths", rs.sampled[t]},
                                  {"valid_loss", rs.trial_valid_losses[t]}});
        }
        report["random_search"] = json{{"trials", rs.sampled.size()},
                                       {"best_trial", rs.best_trial},
                                       {"candidates", std::move(trials)}};
        model = std::move(rs.best);
        total_seconds = rs.wall_seconds;
    }

    report["train"] = json{{"epochs_run", model.history.size()},
                           {"best_epoch", model.best_epoch},
                           {"best_valid_loss", model.best_valid_loss},
                           {"clip_events", model.clip_events},
                           {"wall_seconds", reported(model.wall_seconds)}};
    report["extracted"] = json{{"hidden_widths", model.architecture.hidden_widths()},
                               {"params_paper", model.test_metrics.params_paper},
                               {"params_full", model.test_metrics.params_full}};
    report["series"] = series_json(model.history);
    report["final_metrics"] = metrics_json(model.test_metrics, task);
    report["total_wall_seconds"] = reported(total_seconds);
    report["config"] = portable_config_json(config);

    write_text(dir / "report.json", report.dump(2) + "\n");
    write_text(dir / "history.csv", history_csv(model.history));
    write_dataset_meta(dir, config, data);
    save_checkpoint(Checkpoint{config.search.seed, std::nullopt, model.architecture},
                    (dir / "model.ckpt").string());
    write_timing(dir, json{{"train", model.wall_seconds}, {"total", total_seconds}});

    std::cout << config.method << ": " << model.history.size() << " epochs (best "
              << model.best_epoch << "), valid loss " << format_double(model.best_valid_loss)
              << "\n";
    std::cout << "test " << (task == Task::classification ? "accuracy " : "loss ")
              << format_double(task == Task::classification ? model.test_metrics.accuracy
                                                            : model.test_metrics.loss)
              << "\n";
    std::cout << "wall seconds: " << format_double(total_seconds) << "\n";
    std::cout << "wrote " << dir.string() << "\n";
    return 0;
}

int cmd_evaluate(ExperimentConfig config) {
    if (config.checkpoint.empty()) {
        throw ConfigError("evaluate needs --checkpoint PATH");
    }
    const Checkpoint ckpt = load_checkpoint(config.checkpoint);
    PreparedData data = prepare_data(config);

    EvalMetrics metrics;
    std::string model_kind;
    if (ckpt.finetuned) {
        metrics = evaluate(*ckpt.finetuned, data.splits.test, norm_of(data.splits));
        model_kind = "finetuned-architecture";
    } else {
        metrics = evaluate(*ckpt.net, data.splits.test, norm_of(data.splits));
        model_kind = "supernet-deterministic";
    }

    json j;
    j["schema"] = "tabgns-evaluation-v1";
    j["checkpoint"] = config.checkpoint;
    j["model"] = model_kind;
    j["seed"] = ckpt.seed;
    j["dataset"] = dataset_json(config, data);
    j["metrics"] = metrics_json(metrics, data.dataset.task);
    const std::string text = j.dump(2) + "\n";
    std::cout << text;
    if (!config.out.empty()) {
        const fs::path dir = ensure_out_dir(config);
        write_text(dir / "evaluation.json", text);
    }
    return 0;
}

namespace {

const json& need(const json& j, const std::string& key, const std::string& where) {
    const auto it = j.find(key);
    if (it == j.end()) {
        throw SchemaError("report " + where + " is missing key '" + key + "'");
    }
    return *it;
}

struct ReportRow {
    std::string run;
    std::string method;
    std::uint64_t seed = 0;
    double loss = 0.0;
    double accuracy = 0.0;
    bool has_accuracy = false;
    std::uint64_t params_paper = 0;
    double wall_seconds = 0.0;
    double gate_init = 0.0;
    double final_size = 0.0;
    json series;
};

std::string pad(const std::string& s, std::size_t width) {
    return s + std::string(width > s.size() ? width - s.size() : 0, ' ');
}

} // namespace

int cmd_report(const ExperimentConfig& config, const std::vector<std::string>& run_dirs) {
    if (run_dirs.empty()) throw ConfigError("report needs at least one run directory");
    const fs::path dir = ensure_out_dir(config);

    std::vector<ReportRow> rows;
    for (const std::string& run : run_dirs) {
        const fs::path report_path = fs::path(run) / "report.json";
        if (!fs::exists(report_path)) {
            throw SchemaError("no report.json under " + run);
        }
        json j;
        try {
            j = json::parse(read_text(report_path));
        } catch (const json::parse_error& e) {
            throw SchemaError("cannot parse " + report_path.string() + ": " + e.what());
        }
        if (need(j, "schema", run) != "tabgns-run-report-v1") {
            throw SchemaError("unsupported report schema in " + run);
        }
        ReportRow row;
        row.run = fs::path(run).filename().string().empty()
                      ? run
                      : fs::path(run).filename().string();
        row.method = need(j, "method", run).get<std::string>();
        row.seed = need(j, "seed", run).get<std::uint64_t>();
        const json& metrics = need(j, "final_metrics", run);
        row.loss = need(metrics, "loss", run).get<double>();
        if (metrics.contains("accuracy")) {
            row.accuracy = metrics["accuracy"].get<double>();
            row.has_accuracy = true;
        }
        row.params_paper = need(metrics, "params_paper", run).get<std::uint64_t>();
        row.wall_seconds = need(j, "total_wall_seconds", run).get<double>();
        row.gate_init = need(need(j, "config", run), "search", run)["gate_init"].get<double>();
        const json& widths = need(need(j, "extracted", run), "hidden_widths", run);
        for (const auto& w : widths) row.final_size += w.get<double>();
        row.series = need(j, "series", run);
        rows.push_back(std::move(row));
    }

    // (a) comparison table, CSV and aligned text
    std::string csv = "run,method,seed,loss,accuracy,params_paper,wall_seconds\n";
    std::vector<std::vector<std::string>> cells;
    cells.push_back({"run", "method", "seed", "loss", "accuracy", "params", "wall_s"});
    for (const ReportRow& r : rows) {
        const std::string acc = r.has_accuracy ? format_double(r.accuracy) : "";
        csv += r.run + "," + r.method + "," + std::to_string(r.seed) + "," +
               format_double(r.loss) + "," + acc + "," + std::to_string(r.params_paper) + "," +
               format_double(r.wall_seconds) + "\n";
        cells.push_back({r.run, r.method, std::to_string(r.seed), format_double(r.loss), acc,
                         std::to_string(r.params_paper), format_double(r.wall_seconds)});
    }
    write_text(dir / "comparison.csv", csv);

    std::vector<std::size_t> widths(cells[0].size(), 0);
    for (const auto& row : cells) {
        for (std::size_t c = 0; c < row.size(); ++c) widths[c] = std::max(widths[c], row[c].size());
    }
    std::string table;
    for (const auto& row : cells) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            table += pad(row[c], widths[c] + (c + 1 < row.size() ? 2 : 0));
        }
        table += '\n';
    }
    write_text(dir / "comparison.txt", table);
    std::cout << table;

    // (b) per-run size-over-epoch series
    std::string sizes = "run,epoch,expected_size,open_count\n";
    for (const ReportRow& r : rows) {
        const json& es = need(r.series, "expected_size", r.run);
        const json& oc = need(r.series, "open_count", r.run);
        for (std::size_t e = 0; e < es.size(); ++e) {
            sizes += r.run + "," + std::to_string(e) + "," +
                     format_double(es[e].get<double>()) + "," +
                     std::to_string(e < oc.size() ? oc[e].get<std::uint64_t>() : 0) + "\n";
        }
    }
    write_text(dir / "sizes.csv", sizes);

    // (c) gate-init sweep summary
    std::vector<const ReportRow*> sweep;
    for (const ReportRow& r : rows) sweep.push_back(&r);
    std::sort(sweep.begin(), sweep.end(), [](const ReportRow* a, const ReportRow* b) {
        return a->gate_init < b->gate_init;
    });
    std::string sweep_csv = "run,gate_init,final_size,loss,accuracy\n";
    for (const ReportRow* r : sweep) {
        sweep_csv += r->run + "," + format_double(r->gate_init) + "," +
                     format_double(r->final_size) + "," + format_double(r->loss) + "," +
                     (r->has_accuracy ? format_double(r->accuracy) : "") + "\n";
    }
    write_text(dir / "gate_init_sweep.csv", sweep_csv);
    return 0;
}

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const ConfigError*>(&e)) return 2;
    if (dynamic_cast<const DataError*>(&e)) return 3; // includes ShapeError
    if (dynamic_cast<const NumericError*>(&e)) return 4;
    if (dynamic_cast<const IntegrityError*>(&e)) return 5;
    if (dynamic_cast<const SchemaError*>(&e)) return 6;
    return 1;
}

} // namespace tabgns
