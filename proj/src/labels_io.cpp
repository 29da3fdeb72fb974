#include "egograph/labels_io.hpp"

#include <charconv>
#include <limits>
#include <sstream>

#include "egograph/binary_io.hpp"
#include "egograph/errors.hpp"

namespace egograph::pipeline {

namespace {

constexpr std::string_view kHeader = "segment_index,class_id";

long long parse_int(std::string_view field, std::size_t line) {
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc{} || ptr != field.data() + field.size())
    throw ParseError("line " + std::to_string(line) + ": '" + std::string(field) + "' is not an integer");
  return v;
}

// (index, class) pairs of every data row.
std::vector<std::pair<long long, int>> parse_rows(const std::string& text) {
  std::vector<std::pair<long long, int>> rows;
  std::istringstream in(text);
  std::string line;
  std::size_t no = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!header) {
      if (line != kHeader) throw ParseError("expected header '" + std::string(kHeader) + "', got '" + line + "'");
      header = true;
      continue;
    }
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos || line.find(',', comma + 1) != std::string::npos)
      throw ParseError("line " + std::to_string(no) + ": expected two fields");
    const long long idx = parse_int(std::string_view(line).substr(0, comma), no);
    const long long cls = parse_int(std::string_view(line).substr(comma + 1), no);
    if (idx < 0) throw ParseError("line " + std::to_string(no) + ": negative segment index");
    if (cls < mbo::kNoLabel || cls > std::numeric_limits<int>::max())
      throw ParseError("line " + std::to_string(no) + ": class id out of range");
    rows.emplace_back(idx, static_cast<int>(cls));
  }
  if (!header) throw ParseError("empty label file");
  return rows;
}

}  // namespace

std::string encode_labels(const std::vector<int>& labels) {
  std::string out(kHeader);
  out += '\n';
  for (std::size_t i = 0; i < labels.size(); ++i) out += std::to_string(i) + ',' + std::to_string(labels[i]) + '\n';
  return out;
}

std::vector<int> decode_labels(const std::string& text) {
  const auto rows = parse_rows(text);
  std::vector<int> labels(rows.size(), 0);
  std::vector<bool> seen(rows.size(), false);
  for (const auto& [idx, cls] : rows) {
    if (idx >= static_cast<long long>(rows.size()))
      throw ParseError("segment index " + std::to_string(idx) + " beyond " + std::to_string(rows.size()) + " rows");
    if (seen[static_cast<std::size_t>(idx)]) throw ParseError("duplicate segment index " + std::to_string(idx));
    seen[static_cast<std::size_t>(idx)] = true;
    labels[static_cast<std::size_t>(idx)] = cls;
  }
  return labels;
}

void write_labels(const std::vector<int>& labels, const std::filesystem::path& path) {
  io::write_file(path, encode_labels(labels));
}

std::vector<int> read_labels(const std::filesystem::path& path) {
  const auto bytes = io::read_file(path);
  return decode_labels(std::string(bytes.begin(), bytes.end()));
}

void write_fidelity(const mbo::LabelData& labels, const std::filesystem::path& path) {
  std::string out(kHeader);
  out += '\n';
  for (Eigen::Index i = 0; i < labels.nodes(); ++i)
    if (labels.is_fidelity(i)) out += std::to_string(i) + ',' + std::to_string(labels.labels[static_cast<std::size_t>(i)]) + '\n';
  io::write_file(path, out);
}

mbo::LabelData read_fidelity(const std::filesystem::path& path, Eigen::Index nodes, int classes) {
  const auto bytes = io::read_file(path);
  std::vector<int> labels(static_cast<std::size_t>(nodes), mbo::kNoLabel);
  for (const auto& [idx, cls] : parse_rows(std::string(bytes.begin(), bytes.end()))) {
    if (idx >= nodes) throw ParseError(path.string() + ": segment index " + std::to_string(idx) + " beyond " +
                                       std::to_string(nodes) + " segments");
    labels[static_cast<std::size_t>(idx)] = cls;
  }
  return mbo::LabelData(classes, std::move(labels));
}

void write_diagnostics(const std::vector<mbo::MboResult>& batches, const std::filesystem::path& path) {
  std::string out = "batch,iteration,changed\n";
  for (std::size_t b = 0; b < batches.size(); ++b) {
    const auto& changed = batches[b].changed_per_iteration;
    for (std::size_t k = 0; k < changed.size(); ++k)
      out += std::to_string(b) + ',' + std::to_string(k + 1) + ',' + std::to_string(changed[k]) + '\n';
  }
  io::write_file(path, out);
}

}  // namespace egograph::pipeline
