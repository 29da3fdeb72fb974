#pragma once

// Per-segment label files: CSV with header "segment_index,class_id", one row
// per segment, LF line endings.

#include <filesystem>
#include <string>
#include <vector>

#include "egograph/mbo_classifier.hpp"

namespace egograph::pipeline {

/// Dense labels, row i is segment i. kNoLabel entries are written as -1.
std::string encode_labels(const std::vector<int>& labels);
/// Accepts rows in any order but every index in [0, rows) exactly once.
std::vector<int> decode_labels(const std::string& text);

void write_labels(const std::vector<int>& labels, const std::filesystem::path& path);
std::vector<int> read_labels(const std::filesystem::path& path);

/// Sparse fidelity file: only labelled segments are listed.
void write_fidelity(const mbo::LabelData& labels, const std::filesystem::path& path);
mbo::LabelData read_fidelity(const std::filesystem::path& path, Eigen::Index nodes, int classes);

/// "batch,iteration,changed" rows, iterations counted from 1.
void write_diagnostics(const std::vector<mbo::MboResult>& batches, const std::filesystem::path& path);

}  // namespace egograph::pipeline
