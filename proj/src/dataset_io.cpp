#include "robsel/dataset_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

namespace robsel {
namespace {

std::string trim(std::string s) {
    const auto first = s.find_first_not_of(" \t\r\"");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\"");
    return s.substr(first, last - first + 1);
}

std::vector<std::string> split(const std::string& line, char delim) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, delim)) out.push_back(trim(cell));
    if (!line.empty() && line.back() == delim) out.emplace_back();
    return out;
}

char guess_delimiter(const std::string& header) {
    for (char c : {',', '\t', ';'})
        if (header.find(c) != std::string::npos) return c;
    return ',';
}

std::optional<std::size_t> find_column(const std::vector<std::string>& header, const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) return std::nullopt;
    return static_cast<std::size_t>(it - header.begin());
}

}  // namespace

LabeledDataset read_dataset(std::istream& in, const DatasetReadOptions& options, const std::string& source) {
    std::string line;
    if (!std::getline(in, line)) throw IoError(source + ": empty file");
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    const char delim = options.delimiter ? options.delimiter : guess_delimiter(line);
    const std::vector<std::string> header = split(line, delim);
    if (header.empty() || std::all_of(header.begin(), header.end(), [](const std::string& h) { return h.empty(); })) {
        throw IoError(source + ": malformed header");
    }

    std::optional<std::size_t> label_col;
    if (options.label_column) {
        label_col = find_column(header, *options.label_column);
        if (!label_col && options.require_labels) {
            throw ValidationError(source + ": label column '" + *options.label_column + "' not found");
        }
    } else {
        label_col = find_column(header, "class");
        if (!label_col) label_col = find_column(header, "label");
    }
    if (!label_col && options.require_labels) throw ValidationError(source + ": no label column (use --label-col)");
    std::optional<std::size_t> id_col;
    if (options.id_column) {
        id_col = find_column(header, *options.id_column);
        if (!id_col) throw ValidationError(source + ": id column '" + *options.id_column + "' not found");
    }

    LabeledDataset out;
    std::vector<std::size_t> feature_cols;
    for (std::size_t j = 0; j < header.size(); ++j) {
        if (j == label_col || j == id_col) continue;
        feature_cols.push_back(j);
        out.feature_names.push_back(header[j]);
    }
    if (feature_cols.empty()) throw ValidationError(source + ": no feature columns");
    out.class_names = options.class_levels;

    std::vector<double> values;
    int row = 0;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const std::vector<std::string> cells = split(line, delim);
        if (cells.size() != header.size()) {
            throw ValidationError(source + ": line " + std::to_string(line_no) + " has " + std::to_string(cells.size()) +
                                  " cells, header has " + std::to_string(header.size()));
        }
        ++row;
        for (std::size_t k = 0; k < feature_cols.size(); ++k) {
            const std::string& cell = cells[feature_cols[k]];
            const std::string where = source + ": row " + std::to_string(row) + ", column '" + header[feature_cols[k]] + "'";
            if (cell.empty() || cell == "NA" || cell == "NaN" || cell == "nan" || cell == "null") {
                throw ValidationError(where + ": missing value");
            }
            double v = 0.0;
            const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (ec != std::errc() || ptr != cell.data() + cell.size()) {
                throw ValidationError(where + ": '" + cell + "' is not a number");
            }
            if (!std::isfinite(v)) throw ValidationError(where + ": non-finite value");
            values.push_back(v);
        }
        if (label_col) {
            const std::string& level = cells[*label_col];
            if (level.empty()) throw ValidationError(source + ": row " + std::to_string(row) + ": missing label");
            auto it = std::find(out.class_names.begin(), out.class_names.end(), level);
            if (it == out.class_names.end()) {
                if (!options.class_levels.empty()) {
                    throw ValidationError(source + ": row " + std::to_string(row) + ": unknown class '" + level + "'");
                }
                out.class_names.push_back(level);
                it = out.class_names.end() - 1;
            }
            out.labels.push_back(static_cast<int>(it - out.class_names.begin()));
        }
        out.row_ids.push_back(id_col ? cells[*id_col] : std::to_string(row));
    }
    if (row == 0) throw ValidationError(source + ": no data rows");

    const auto P = static_cast<Eigen::Index>(feature_cols.size());
    out.x = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(values.data(), row, P);
    out.n_classes = label_col ? static_cast<int>(out.class_names.size()) : 0;
    if (!label_col) out.class_names.clear();
    if (label_col && options.require_labels && out.n_classes < 2) {
        throw ValidationError(source + ": training data needs at least two classes");
    }
    return out;
}

LabeledDataset load_dataset(const std::string& path, const DatasetReadOptions& options) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    return read_dataset(in, options, path);
}

void write_dataset(std::ostream& out, const LabeledDataset& data) {
    const bool labelled = !data.labels.empty();
    for (int j = 0; j < data.cols(); ++j) {
        if (j) out << ',';
        out << (data.feature_names.empty() ? "x" + std::to_string(j + 1) : data.feature_names[static_cast<std::size_t>(j)]);
    }
    if (labelled) out << ",class";
    out << '\n';
    out << std::setprecision(std::numeric_limits<double>::max_digits10);
    for (int i = 0; i < data.rows(); ++i) {
        for (int j = 0; j < data.cols(); ++j) {
            if (j) out << ',';
            out << data.x(i, j);
        }
        if (labelled) {
            const int l = data.labels[static_cast<std::size_t>(i)];
            out << ',' << (data.class_names.empty() ? std::to_string(l + 1) : data.class_names[static_cast<std::size_t>(l)]);
        }
        out << '\n';
    }
}

void save_dataset(const std::string& path, const LabeledDataset& data) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path + "'");
    write_dataset(out, data);
    if (!out) throw IoError("write to '" + path + "' failed");
}

}  // namespace robsel
