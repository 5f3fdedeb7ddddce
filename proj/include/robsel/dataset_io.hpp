#pragma once

// Delimited-text tables: one header row, numeric feature columns, an optional
// string label column and an optional row-identifier column.

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "robsel/common.hpp"

namespace robsel {

struct DatasetReadOptions {
    /// Label column name. When unset, a column named "class" or "label" is used if present.
    std::optional<std::string> label_column;
    std::optional<std::string> id_column;
    bool require_labels = true;
    /// Fixed level order (e.g. from a training file). Unknown levels are an error.
    std::vector<std::string> class_levels;
    char delimiter = 0;  // 0: guess from the header (comma, tab or semicolon)
};

/// Levels are mapped to 0..G-1 in order of first appearance. Without labels,
/// `labels` is empty and `n_classes` is 0.
LabeledDataset read_dataset(std::istream& in, const DatasetReadOptions& options, const std::string& source = "<stream>");
LabeledDataset load_dataset(const std::string& path, const DatasetReadOptions& options = {});

/// Writes a header row (features, then "class") and one row per observation.
void write_dataset(std::ostream& out, const LabeledDataset& data);
void save_dataset(const std::string& path, const LabeledDataset& data);

}  // namespace robsel
