#include "tabgns/data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <set>

#include "tabgns/errors.hpp"
#include "tabgns/rng.hpp"
#include "tabgns/supernet.hpp"

namespace tabgns {

namespace {

std::string lower(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

bool is_missing_token(const std::string& s) {
    const std::string t = lower(s);
    return t.empty() || t == "nan" || t == "na" || t == "null";
}

bool parse_double(const std::string& s, double& out) {
    if (s.empty()) return false;
    char* end = nullptr;
    out = std::strtod(s.c_str(), &end);
    return end == s.c_str() + s.size();
}

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && (s[b] == ' ' || s[b] == '\t')) ++b;
    while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t')) --e;
    return s.substr(b, e - b);
}

std::vector<std::string> split_csv_line(const std::string& line, std::size_t line_no) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    bool was_quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"' && cur.empty()) {
            quoted = true;
            was_quoted = true;
        } else if (c == ',') {
            fields.push_back(was_quoted ? cur : trim(cur));
            cur.clear();
            was_quoted = false;
        } else {
            cur += c;
        }
    }
    if (quoted) {
        throw DataError("unterminated quote at line " + std::to_string(line_no));
    }
    fields.push_back(was_quoted ? cur : trim(cur));
    return fields;
}

std::size_t resolve_column(const std::vector<std::string>& header, const std::string& spec) {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == spec) return i;
    }
    if (!spec.empty() && std::all_of(spec.begin(), spec.end(), [](unsigned char c) {
            return std::isdigit(c) != 0;
        })) {
        const std::size_t idx = std::stoul(spec);
        if (idx < header.size()) return idx;
    }
    throw ConfigError("unknown column '" + spec + "'");
}

std::string cell_location(std::size_t data_row, const std::string& column) {
    return "data row " + std::to_string(data_row + 1) + ", column '" + column + "'";
}

bool needs_quoting(const std::string& s) {
    return s.find(',') != std::string::npos || s.find('"') != std::string::npos;
}

std::string quoted_field(const std::string& s) {
    if (!needs_quoting(s)) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        out += c;
    }
    out += '"';
    return out;
}

TabularDataset subset(const TabularDataset& d, const std::vector<std::size_t>& rows) {
    TabularDataset out = d;
    out.features = Matrix(rows.size(), d.features.cols());
    out.targets = Matrix(rows.size(), d.targets.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const std::size_t src = rows[r];
        for (std::size_t c = 0; c < d.features.cols(); ++c) {
            out.features(r, c) = d.features(src, c);
        }
        for (std::size_t c = 0; c < d.targets.cols(); ++c) {
            out.targets(r, c) = d.targets(src, c);
        }
    }
    return out;
}

} // namespace

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void validate(const TabularDataset& d) {
    if (d.features.rows() != d.targets.rows()) {
        throw ShapeError("dataset feature/target row mismatch: " +
                         std::to_string(d.features.rows()) + " vs " +
                         std::to_string(d.targets.rows()));
    }
    if (d.feature_names.size() != d.features.cols()) {
        throw ShapeError("dataset has " + std::to_string(d.features.cols()) +
                         " feature columns but " + std::to_string(d.feature_names.size()) +
                         " names");
    }
    if (!all_finite(d.features)) throw DataError("dataset features contain non-finite values");
    if (!all_finite(d.targets)) throw DataError("dataset targets contain non-finite values");
    if (d.task == Task::classification) {
        if (d.targets.cols() != 1) throw ShapeError("classification targets must be one column");
        if (d.n_classes < 1) throw DataError("classification dataset without classes");
        for (std::size_t r = 0; r < d.targets.rows(); ++r) {
            const double v = d.targets(r, 0);
            if (v != std::floor(v) || v < 0.0 || v >= static_cast<double>(d.n_classes)) {
                throw DataError("class index " + format_double(v) + " out of [0, " +
                                std::to_string(d.n_classes) + ") at row " + std::to_string(r));
            }
        }
    }
}

TabularDataset load_csv(const std::string& path, const CsvOptions& opts) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open CSV file: " + path);

    std::vector<std::vector<std::string>> rows;
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() && in.peek() == std::char_traits<char>::eof()) break;
        auto fields = split_csv_line(line, line_no);
        if (line_no == 1) {
            header = std::move(fields);
        } else {
            if (fields.size() != header.size()) {
                throw DataError("line " + std::to_string(line_no) + " has " +
                                std::to_string(fields.size()) + " fields, expected " +
                                std::to_string(header.size()));
            }
            rows.push_back(std::move(fields));
        }
    }
    if (header.empty()) throw DataError("empty CSV file: " + path);
    if (rows.empty()) throw DataError("no data rows in " + path);
    if (opts.target_columns.empty()) throw ConfigError("no target columns given");

    std::vector<std::size_t> target_idx;
    for (const std::string& spec : opts.target_columns) {
        const std::size_t idx = resolve_column(header, spec);
        if (std::find(target_idx.begin(), target_idx.end(), idx) != target_idx.end()) {
            throw ConfigError("duplicate target column '" + spec + "'");
        }
        target_idx.push_back(idx);
    }
    std::set<std::size_t> categorical_idx;
    for (const std::string& spec : opts.categorical_columns) {
        const std::size_t idx = resolve_column(header, spec);
        if (std::find(target_idx.begin(), target_idx.end(), idx) != target_idx.end()) {
            throw ConfigError("target column '" + header[idx] +
                              "' cannot be declared categorical");
        }
        categorical_idx.insert(idx);
    }
    if (opts.task == Task::classification && target_idx.size() != 1) {
        throw ConfigError("classification needs exactly one target column");
    }

    TabularDataset d;
    d.task = opts.task;

    // Feature layout: source column order, categoricals expanded in place.
    struct Col {
        std::size_t src;
        bool categorical;
        std::vector<std::string> values; // category order = first appearance
    };
    std::vector<Col> plan;
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (std::find(target_idx.begin(), target_idx.end(), c) != target_idx.end()) continue;
        Col col{c, categorical_idx.count(c) > 0, {}};
        if (col.categorical) {
            for (std::size_t r = 0; r < rows.size(); ++r) {
                const std::string& v = rows[r][c];
                if (is_missing_token(v)) {
                    throw DataError("missing value at " + cell_location(r, header[c]));
                }
                if (std::find(col.values.begin(), col.values.end(), v) == col.values.end()) {
                    col.values.push_back(v);
                }
            }
            d.categories.push_back(CategoryMap{header[c], col.values});
        }
        plan.push_back(std::move(col));
    }

    std::size_t n_features = 0;
    for (const Col& col : plan) {
        if (col.categorical) {
            for (const std::string& v : col.values) {
                d.feature_names.push_back(header[col.src] + "=" + v);
            }
            n_features += col.values.size();
        } else {
            d.feature_names.push_back(header[col.src]);
            ++n_features;
        }
    }

    d.features = Matrix(rows.size(), n_features);
    std::vector<std::vector<std::size_t>> missing_cells(n_features);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        std::size_t out = 0;
        for (const Col& col : plan) {
            const std::string& cell = rows[r][col.src];
            if (col.categorical) {
                const auto it = std::find(col.values.begin(), col.values.end(), cell);
                d.features(r, out + static_cast<std::size_t>(it - col.values.begin())) = 1.0;
                out += col.values.size();
            } else {
                if (is_missing_token(cell)) {
                    if (!opts.impute_mean) {
                        throw DataError("missing value at " + cell_location(r, header[col.src]) +
                                        " (use mean imputation to fill)");
                    }
                    missing_cells[out].push_back(r);
                    d.features(r, out) = 0.0;
                } else {
                    double v = 0.0;
                    if (!parse_double(cell, v)) {
                        throw DataError("cannot parse '" + cell + "' as a number at " +
                                        cell_location(r, header[col.src]));
                    }
                    if (!std::isfinite(v)) {
                        throw DataError("non-finite value at " + cell_location(r, header[col.src]));
                    }
                    d.features(r, out) = v;
                }
                ++out;
            }
        }
    }
    for (std::size_t c = 0; c < n_features; ++c) {
        if (missing_cells[c].empty()) continue;
        if (missing_cells[c].size() == rows.size()) {
            throw DataError("column '" + d.feature_names[c] + "' has no observed values");
        }
        double sum = 0.0;
        for (std::size_t r = 0; r < rows.size(); ++r) sum += d.features(r, c);
        const double mean = sum / static_cast<double>(rows.size() - missing_cells[c].size());
        for (std::size_t r : missing_cells[c]) d.features(r, c) = mean;
    }

    for (std::size_t t : target_idx) d.target_names.push_back(header[t]);
    if (opts.task == Task::regression) {
        d.targets = Matrix(rows.size(), target_idx.size());
        for (std::size_t r = 0; r < rows.size(); ++r) {
            for (std::size_t k = 0; k < target_idx.size(); ++k) {
                const std::string& cell = rows[r][target_idx[k]];
                double v = 0.0;
                if (is_missing_token(cell)) {
                    throw DataError("missing target value at " +
                                    cell_location(r, header[target_idx[k]]));
                }
                if (!parse_double(cell, v) || !std::isfinite(v)) {
                    throw DataError("cannot parse target '" + cell + "' at " +
                                    cell_location(r, header[target_idx[k]]));
                }
                d.targets(r, k) = v;
            }
        }
    } else {
        const std::size_t tcol = target_idx[0];
        // Integer labels pass through; anything else is labelled by first
        // appearance.
        bool integers = true;
        double max_label = 0.0;
        for (std::size_t r = 0; r < rows.size() && integers; ++r) {
            const std::string& cell = rows[r][tcol];
            if (is_missing_token(cell)) {
                throw DataError("missing target value at " + cell_location(r, header[tcol]));
            }
            double v = 0.0;
            if (!parse_double(cell, v) || v != std::floor(v) || v < 0.0 || v > 1e9) {
                integers = false;
            } else {
                max_label = std::max(max_label, v);
            }
        }
        d.targets = Matrix(rows.size(), 1);
        if (integers) {
            d.n_classes = static_cast<std::size_t>(max_label) + 1;
            for (std::size_t r = 0; r < rows.size(); ++r) {
                double v = 0.0;
                parse_double(rows[r][tcol], v);
                d.targets(r, 0) = v;
            }
            for (std::size_t k = 0; k < d.n_classes; ++k) {
                d.class_labels.push_back(std::to_string(k));
            }
        } else {
            for (std::size_t r = 0; r < rows.size(); ++r) {
                const std::string& cell = rows[r][tcol];
                if (is_missing_token(cell)) {
                    throw DataError("missing target value at " + cell_location(r, header[tcol]));
                }
                auto it = std::find(d.class_labels.begin(), d.class_labels.end(), cell);
                if (it == d.class_labels.end()) {
                    d.class_labels.push_back(cell);
                    it = std::prev(d.class_labels.end());
                }
                d.targets(r, 0) =
                    static_cast<double>(it - d.class_labels.begin());
            }
            d.n_classes = d.class_labels.size();
        }
    }

    validate(d);
    return d;
}

void save_csv(const TabularDataset& d, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot open CSV for writing: " + path);
    std::string line;
    for (std::size_t c = 0; c < d.feature_names.size(); ++c) {
        if (c) line += ',';
        line += quoted_field(d.feature_names[c]);
    }
    for (const std::string& t : d.target_names) {
        line += ',';
        line += quoted_field(t);
    }
    out << line << '\n';
    for (std::size_t r = 0; r < d.rows(); ++r) {
        line.clear();
        for (std::size_t c = 0; c < d.features.cols(); ++c) {
            if (c) line += ',';
            line += format_double(d.features(r, c));
        }
        for (std::size_t c = 0; c < d.targets.cols(); ++c) {
            line += ',';
            if (d.task == Task::classification && !d.class_labels.empty()) {
                line += quoted_field(
                    d.class_labels[static_cast<std::size_t>(d.targets(r, c))]);
            } else {
                line += format_double(d.targets(r, c));
            }
        }
        out << line << '\n';
    }
    if (!out) throw DataError("failed writing CSV: " + path);
}

TabularDataset make_teacher_student(std::size_t input_dim,
                                    const std::vector<std::size_t>& teacher_widths,
                                    std::size_t n_rows, double noise_std, std::uint64_t seed,
                                    std::size_t output_dim) {
    if (teacher_widths.empty()) throw ConfigError("teacher needs at least one hidden layer");
    if (input_dim == 0 || output_dim == 0 || n_rows == 0) {
        throw ConfigError("teacher-student dataset needs positive dimensions");
    }
    if (noise_std < 0.0) throw ConfigError("noise_std must be >= 0");

    Rng x_rng(Rng::derive(seed, 1));
    Rng teacher_rng(Rng::derive(seed, 2));
    Rng noise_rng(Rng::derive(seed, 3));

    TabularDataset d;
    d.task = Task::regression;
    d.features = Matrix(n_rows, input_dim);
    for (double& v : d.features.values()) v = x_rng.normal();

    const std::vector<DenseLayer> teacher =
        make_mlp(input_dim, teacher_widths, output_dim, teacher_rng);
    d.targets = mlp_forward(teacher, d.features).predictions;
    if (noise_std > 0.0) {
        for (double& v : d.targets.values()) v += noise_std * noise_rng.normal();
    }

    for (std::size_t c = 0; c < input_dim; ++c) d.feature_names.push_back("x" + std::to_string(c));
    if (output_dim == 1) {
        d.target_names.push_back("y");
    } else {
        for (std::size_t c = 0; c < output_dim; ++c) d.target_names.push_back("y" + std::to_string(c));
    }
    d.teacher = TeacherSpec{input_dim, teacher_widths, output_dim, noise_std, seed};
    return d;
}

Splits split(const TabularDataset& d, const std::array<double, 3>& fractions,
             std::uint64_t seed) {
    double sum = 0.0;
    for (double f : fractions) {
        if (f <= 0.0) throw ConfigError("split fractions must be positive");
        sum += f;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
        throw ConfigError("split fractions must sum to 1 (got " + format_double(sum) + ")");
    }
    const std::size_t n = d.rows();
    if (n < 3) throw DataError("need at least 3 rows to split, got " + std::to_string(n));

    const std::size_t n_valid = static_cast<std::size_t>(static_cast<double>(n) * fractions[1]);
    const std::size_t n_test = static_cast<std::size_t>(static_cast<double>(n) * fractions[2]);
    if (n_valid == 0 || n_test == 0 || n_valid + n_test >= n) {
        throw DataError("split of " + std::to_string(n) + " rows leaves an empty part");
    }
    const std::size_t n_train = n - n_valid - n_test;

    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0u);
    Rng rng(seed);
    rng.shuffle(perm);

    Splits s;
    s.fractions = fractions;
    s.split_seed = seed;
    s.train = subset(d, {perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train)});
    s.valid = subset(d, {perm.begin() + static_cast<std::ptrdiff_t>(n_train),
                         perm.begin() + static_cast<std::ptrdiff_t>(n_train + n_valid)});
    s.test = subset(d, {perm.begin() + static_cast<std::ptrdiff_t>(n_train + n_valid), perm.end()});
    return s;
}

namespace {

void column_stats(const Matrix& m, std::vector<double>& mean, std::vector<double>& std_dev) {
    mean.assign(m.cols(), 0.0);
    std_dev.assign(m.cols(), 0.0);
    if (m.rows() == 0) return;
    for (std::size_t r = 0; r < m.rows(); ++r) {
        for (std::size_t c = 0; c < m.cols(); ++c) mean[c] += m(r, c);
    }
    for (double& v : mean) v /= static_cast<double>(m.rows());
    for (std::size_t r = 0; r < m.rows(); ++r) {
        for (std::size_t c = 0; c < m.cols(); ++c) {
            const double dv = m(r, c) - mean[c];
            std_dev[c] += dv * dv;
        }
    }
    for (double& v : std_dev) v = std::sqrt(v / static_cast<double>(m.rows()));
}

void apply_zscore(Matrix& m, const std::vector<double>& mean, const std::vector<double>& std_dev) {
    for (std::size_t r = 0; r < m.rows(); ++r) {
        for (std::size_t c = 0; c < m.cols(); ++c) {
            m(r, c) -= mean[c];
            if (std_dev[c] >= 1e-12) m(r, c) /= std_dev[c];
        }
    }
}

} // namespace

Splits normalize(Splits s) {
    if (s.train.rows() == 0) throw DataError("cannot normalize with an empty train split");
    if (s.normalized) return s;

    column_stats(s.train.features, s.norm.feature_mean, s.norm.feature_std);
    apply_zscore(s.train.features, s.norm.feature_mean, s.norm.feature_std);
    apply_zscore(s.valid.features, s.norm.feature_mean, s.norm.feature_std);
    apply_zscore(s.test.features, s.norm.feature_mean, s.norm.feature_std);

    if (s.train.task == Task::regression) {
        column_stats(s.train.targets, s.norm.target_mean, s.norm.target_std);
        apply_zscore(s.train.targets, s.norm.target_mean, s.norm.target_std);
        apply_zscore(s.valid.targets, s.norm.target_mean, s.norm.target_std);
        apply_zscore(s.test.targets, s.norm.target_mean, s.norm.target_std);
        s.norm.target_standardized = true;
    }
    s.normalized = true;
    return s;
}

Matrix destandardize_targets(const Matrix& targets, const Normalization& norm) {
    if (!norm.target_standardized) return targets;
    require_size(targets.cols(), norm.target_mean.size(), "destandardize_targets columns");
    Matrix out = targets;
    for (std::size_t r = 0; r < out.rows(); ++r) {
        for (std::size_t c = 0; c < out.cols(); ++c) {
            if (norm.target_std[c] >= 1e-12) out(r, c) *= norm.target_std[c];
            out(r, c) += norm.target_mean[c];
        }
    }
    return out;
}

std::vector<std::vector<std::size_t>> batch_indices(std::size_t n_rows, std::size_t batch_size,
                                                    std::uint64_t shuffle_seed,
                                                    std::uint64_t epoch_index) {
    if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
    std::vector<std::size_t> perm(n_rows);
    std::iota(perm.begin(), perm.end(), 0u);
    Rng rng(Rng::derive(shuffle_seed, epoch_index));
    rng.shuffle(perm);

    std::vector<std::vector<std::size_t>> out;
    for (std::size_t start = 0; start < n_rows; start += batch_size) {
        const std::size_t stop = std::min(n_rows, start + batch_size);
        out.emplace_back(perm.begin() + static_cast<std::ptrdiff_t>(start),
                         perm.begin() + static_cast<std::ptrdiff_t>(stop));
    }
    return out;
}

Batch gather(const TabularDataset& d, const std::vector<std::size_t>& rows) {
    Batch b;
    b.X = Matrix(rows.size(), d.features.cols());
    b.y = Matrix(rows.size(), d.targets.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const std::size_t src = rows[r];
        for (std::size_t c = 0; c < d.features.cols(); ++c) b.X(r, c) = d.features(src, c);
        for (std::size_t c = 0; c < d.targets.cols(); ++c) b.y(r, c) = d.targets(src, c);
    }
    return b;
}

std::vector<Batch> batches(const TabularDataset& d, std::size_t batch_size,
                           std::uint64_t shuffle_seed, std::uint64_t epoch_index) {
    std::vector<Batch> out;
    for (const auto& idx : batch_indices(d.rows(), batch_size, shuffle_seed, epoch_index)) {
        out.push_back(gather(d, idx));
    }
    return out;
}

} // namespace tabgns
