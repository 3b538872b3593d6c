#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "lesionnet/core/error.hpp"

namespace lesionnet {

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

/// Non-empty, non-comment lines with their 1-based line numbers.
inline std::vector<std::pair<std::size_t, std::string>> read_lines(std::istream& in) {
  std::vector<std::pair<std::size_t, std::string>> lines;
  std::string line;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    lines.emplace_back(no, line);
  }
  return lines;
}

inline int parse_binary_label(const std::string& s, std::size_t row) {
  const std::string v = trim(s);
  if (v == "0") return 0;
  if (v == "1") return 1;
  throw DataError("row " + std::to_string(row) + ": label '" + v + "' is not 0 or 1");
}

}  // namespace detail

/// Case id -> MGMT label from "case_id,MGMT_value" text with a header row.
inline std::map<std::string, int> parse_labels(std::istream& in) {
  const auto lines = detail::read_lines(in);
  if (lines.empty()) throw FormatError("labels file is empty (header row required)");
  const auto header = detail::split_csv_line(lines[0].second);
  if (header.size() < 2) throw FormatError("labels header must have two columns (case_id,MGMT_value)");
  std::map<std::string, int> labels;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto [row, text] = lines[i];
    const auto fields = detail::split_csv_line(text);
    if (fields.size() < 2) throw FormatError("row " + std::to_string(row) + ": missing MGMT_value column");
    const std::string id = detail::trim(fields[0]);
    if (id.empty()) throw FormatError("row " + std::to_string(row) + ": empty case id");
    const int label = detail::parse_binary_label(fields[1], row);
    if (!labels.emplace(id, label).second) throw DataError("row " + std::to_string(row) + ": duplicate case id '" + id + "'");
  }
  return labels;
}

inline std::map<std::string, int> load_labels(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open labels file '" + path + "'");
  return parse_labels(in);
}

inline void save_labels(const std::map<std::string, int>& labels, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write labels file '" + path + "'");
  out << "case_id,MGMT_value\n";
  for (const auto& [id, label] : labels) out << id << ',' << label << '\n';
}

struct CaseScore {
  std::string case_id;
  double score;
  int label;  // -1 when unknown
};

/// Reads "case_id,score,label" rows; a header row is skipped when its
/// score column is not numeric.
inline std::vector<CaseScore> parse_scores(std::istream& in) {
  std::vector<CaseScore> out;
  const auto lines = detail::read_lines(in);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto [row, text] = lines[i];
    const auto fields = detail::split_csv_line(text);
    if (fields.size() < 3) throw FormatError("row " + std::to_string(row) + ": expected case_id,score,label");
    double score = 0.0;
    try {
      std::size_t used = 0;
      score = std::stod(fields[1], &used);
      if (detail::trim(fields[1].substr(used)).size() != 0) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      if (i == 0) continue;
      throw FormatError("row " + std::to_string(row) + ": score '" + fields[1] + "' is not a number");
    }
    out.push_back({detail::trim(fields[0]), score, detail::parse_binary_label(fields[2], row)});
  }
  return out;
}

inline std::vector<CaseScore> load_scores(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open scores file '" + path + "'");
  return parse_scores(in);
}

inline void save_scores(const std::vector<CaseScore>& scores, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write scores file '" + path + "'");
  out.precision(9);
  out << "case_id,score,label\n";
  for (const auto& s : scores) out << s.case_id << ',' << s.score << ',' << s.label << '\n';
}

}  // namespace lesionnet
