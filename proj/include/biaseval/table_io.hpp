#pragma once

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "biaseval/csv.hpp"
#include "biaseval/errors.hpp"
#include "biaseval/types.hpp"

namespace biaseval {

// Column mapping and binarization thresholds for a labeled table.
// Fractional labels become Positive at label_threshold; an identity tag is
// attached when its column value reaches identity_threshold.
struct TableSchema {
  std::string id_column = "id";
  std::optional<std::string> score_column;
  std::string label_column = "label";
  std::optional<std::string> text_column;
  std::vector<std::pair<std::string, std::string>> identity_columns;  // column -> subgroup id
  double label_threshold = 0.5;
  double identity_threshold = 0.5;
};

// Identity columns of the public annotated-comments release.
inline std::vector<std::pair<std::string, std::string>> default_identity_columns() {
  static const char* names[] = {
      "male", "female", "transgender", "other_gender",
      "heterosexual", "homosexual_gay_or_lesbian", "bisexual", "other_sexual_orientation",
      "christian", "jewish", "muslim", "hindu", "buddhist", "atheist", "other_religion",
      "black", "white", "latino", "other_race_or_ethnicity",
      "physical_disability", "intellectual_or_learning_disability",
      "psychiatric_or_mental_illness", "other_disability"};
  std::vector<std::pair<std::string, std::string>> out;
  for (const char* n : names) out.emplace_back(n, n);
  return out;
}

inline void validate(const TableSchema& s) {
  std::set<std::string> seen;
  auto check = [&](const std::string& name) {
    if (name.empty()) throw InvalidSpec("schema column names must be nonempty");
    if (!seen.insert(name).second) {
      throw InvalidSpec("schema column '" + name + "' appears more than once");
    }
  };
  check(s.id_column);
  check(s.label_column);
  if (s.score_column) check(*s.score_column);
  if (s.text_column) check(*s.text_column);
  for (const auto& [col, sg] : s.identity_columns) {
    check(col);
    if (sg.empty()) throw InvalidSpec("identity column '" + col + "' maps to an empty subgroup id");
  }
  if (!(s.label_threshold > 0.0 && s.label_threshold < 1.0) ||
      !(s.identity_threshold > 0.0 && s.identity_threshold < 1.0)) {
    throw InvalidSpec("thresholds must lie in the open interval (0, 1)");
  }
}

inline void to_json(nlohmann::json& j, const TableSchema& s) {
  j = nlohmann::json{{"id_column", s.id_column},
                     {"label_column", s.label_column},
                     {"label_threshold", s.label_threshold},
                     {"identity_threshold", s.identity_threshold}};
  j["score_column"] = s.score_column ? nlohmann::json(*s.score_column) : nlohmann::json();
  j["text_column"] = s.text_column ? nlohmann::json(*s.text_column) : nlohmann::json();
  nlohmann::json cols = nlohmann::json::object();
  for (const auto& [col, sg] : s.identity_columns) cols[col] = sg;
  j["identity_columns"] = cols;
}

inline void from_json(const nlohmann::json& j, TableSchema& s) {
  s.id_column = j.at("id_column").get<std::string>();
  s.label_column = j.at("label_column").get<std::string>();
  s.label_threshold = j.value("label_threshold", 0.5);
  s.identity_threshold = j.value("identity_threshold", 0.5);
  s.score_column.reset();
  if (j.contains("score_column") && !j["score_column"].is_null()) {
    s.score_column = j["score_column"].get<std::string>();
  }
  s.text_column.reset();
  if (j.contains("text_column") && !j["text_column"].is_null()) {
    s.text_column = j["text_column"].get<std::string>();
  }
  s.identity_columns.clear();
  if (j.contains("identity_columns")) {
    // std::map keeps the column order deterministic regardless of JSON order.
    const auto cols = j["identity_columns"].get<std::map<std::string, std::string>>();
    for (const auto& [col, sg] : cols) s.identity_columns.emplace_back(col, sg);
  }
  validate(s);
}

inline TableSchema load_schema(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path.string(), "cannot open schema file");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path.string(), std::string("invalid schema JSON: ") + e.what());
  }
  return j.get<TableSchema>();
}

struct ReadStats {
  std::size_t rows = 0;     // examples emitted
  std::size_t skipped = 0;  // malformed rows skipped
};

using ExampleSink = std::function<void(LabeledExample&&)>;
// (line number, reason) for each skipped row.
using SkipReporter = std::function<void(std::size_t, const std::string&)>;

// Unicode scalar count of UTF-8 text: continuation bytes do not count.
inline std::uint32_t scalar_length(std::string_view text) {
  std::uint32_t n = 0;
  for (unsigned char c : text) {
    n += (c & 0xC0) != 0x80;
  }
  return n;
}

namespace detail {

inline std::optional<double> parse_number(std::string_view field) {
  const char* begin = field.data();
  const char* end = begin + field.size();
  while (begin < end && (*begin == ' ' || *begin == '\t')) ++begin;
  while (end > begin && (end[-1] == ' ' || end[-1] == '\t')) --end;
  if (begin == end) return std::nullopt;
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) return std::nullopt;
  return value;
}

inline std::optional<double> parse_json_number(const nlohmann::json& v) {
  if (v.is_number()) return v.get<double>();
  if (v.is_boolean()) return v.get<bool>() ? 1.0 : 0.0;
  if (v.is_string()) return parse_number(std::string_view(v.get_ref<const std::string&>()));
  return std::nullopt;
}

struct RowAssembler {
  const TableSchema& schema;

  // Builds an example from field accessors; returns a skip reason on
  // malformed content, throws NonFiniteScore on NaN/inf scores.
  template <typename GetField>
  std::optional<std::string> assemble(GetField&& get, LabeledExample& ex) const {
    const auto id = get(schema.id_column);
    if (!id || id->empty()) return "empty or missing id";
    ex.id.assign(*id);

    const auto label_field = get(schema.label_column);
    if (!label_field) return "missing label";
    const auto label_value = parse_number(std::string_view(*label_field));
    if (!label_value) return "unparseable label";
    ex.label = *label_value >= schema.label_threshold ? BinaryLabel::kPositive
                                                      : BinaryLabel::kNegative;

    if (schema.score_column) {
      const auto score_field = get(*schema.score_column);
      if (!score_field) return "missing score";
      const auto score = parse_number(std::string_view(*score_field));
      if (!score) return "unparseable score";
      if (!std::isfinite(*score)) {
        throw NonFiniteScore("row with id '" + ex.id + "' carries a non-finite score");
      }
      ex.score = *score;
    }

    if (schema.text_column) {
      if (const auto text = get(*schema.text_column)) {
        ex.text.assign(*text);
        ex.char_length = scalar_length(ex.text);
      }
    }

    for (const auto& [col, subgroup] : schema.identity_columns) {
      const auto field = get(col);
      if (!field || field->empty()) continue;  // untagged
      const auto value = parse_number(std::string_view(*field));
      if (!value) return "unparseable identity value in '" + col + "'";
      if (*value >= schema.identity_threshold) ex.subgroups.push_back(subgroup);
    }
    return std::nullopt;
  }
};

}  // namespace detail

// Single-pass streaming parse of a CSV or JSON-lines table (picked by file
// extension). Malformed rows are reported and skipped; memory usage is
// independent of file size.
inline ReadStats read_table(const std::filesystem::path& path, const TableSchema& schema,
                            const ExampleSink& sink, const SkipReporter& on_skip = {}) {
  validate(schema);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string(), "cannot open input file");

  const std::string ext = path.extension().string();
  const bool jsonl = ext == ".jsonl" || ext == ".ndjson" || ext == ".json";

  ReadStats stats;
  const detail::RowAssembler assembler{schema};
  auto skip = [&](std::size_t line, const std::string& reason) {
    ++stats.skipped;
    if (on_skip) on_skip(line, reason);
  };

  if (jsonl) {
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      nlohmann::json row = nlohmann::json::parse(line, nullptr, false);
      if (row.is_discarded() || !row.is_object()) {
        skip(line_no, "invalid JSON object");
        continue;
      }
      auto get = [&row](const std::string& col) -> std::optional<std::string> {
        const auto it = row.find(col);
        if (it == row.end() || it->is_null()) return std::nullopt;
        if (it->is_string()) return it->get<std::string>();
        return it->dump();
      };
      LabeledExample ex;
      if (auto reason = assembler.assemble(get, ex)) {
        skip(line_no, *reason);
        continue;
      }
      ++stats.rows;
      sink(std::move(ex));
    }
    return stats;
  }

  CsvReader reader(in);
  std::vector<std::string> header;
  if (!reader.next(header)) throw MissingColumn(schema.id_column);
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < header.size(); ++i) index.emplace(header[i], i);

  // Column positions resolved once; the per-row loop is index-only.
  auto resolve = [&](const std::string& col) {
    const auto it = index.find(col);
    if (it == index.end()) throw MissingColumn(col);
    return it->second;
  };
  const std::size_t id_idx = resolve(schema.id_column);
  const std::size_t label_idx = resolve(schema.label_column);
  const std::size_t score_idx = schema.score_column ? resolve(*schema.score_column) : std::size_t(-1);
  const std::size_t text_idx = schema.text_column ? resolve(*schema.text_column) : std::size_t(-1);
  std::vector<std::pair<std::size_t, const std::string*>> identity_idx;
  for (const auto& [col, sg] : schema.identity_columns) {
    identity_idx.emplace_back(resolve(col), &sg);
  }

  std::vector<std::string> fields;
  while (reader.next(fields)) {
    if (fields.size() == 1 && fields[0].empty()) continue;  // blank line
    if (fields.size() != header.size()) {
      skip(reader.record_line(), "expected " + std::to_string(header.size()) + " fields, got " +
                                     std::to_string(fields.size()));
      continue;
    }
    auto get = [&](std::size_t idx) -> std::string_view { return fields[idx]; };

    LabeledExample ex;
    std::string reason;
    do {
      if (get(id_idx).empty()) { reason = "empty or missing id"; break; }
      ex.id.assign(get(id_idx));
      const auto label_value = detail::parse_number(get(label_idx));
      if (!label_value) { reason = "unparseable label"; break; }
      ex.label = *label_value >= schema.label_threshold ? BinaryLabel::kPositive
                                                        : BinaryLabel::kNegative;
      if (score_idx != std::size_t(-1)) {
        const auto score = detail::parse_number(get(score_idx));
        if (!score) { reason = "unparseable score"; break; }
        if (!std::isfinite(*score)) {
          throw NonFiniteScore("row with id '" + ex.id + "' carries a non-finite score");
        }
        ex.score = *score;
      }
      if (text_idx != std::size_t(-1)) {
        ex.text.assign(get(text_idx));
        ex.char_length = scalar_length(ex.text);
      }
      for (const auto& [idx, subgroup] : identity_idx) {
        const std::string_view field = get(idx);
        if (field.empty()) continue;  // untagged
        const auto value = detail::parse_number(field);
        if (!value) { reason = "unparseable identity value"; break; }
        if (*value >= schema.identity_threshold) ex.subgroups.push_back(*subgroup);
      }
    } while (false);

    if (!reason.empty()) {
      skip(reader.record_line(), reason);
      continue;
    }
    ++stats.rows;
    sink(std::move(ex));
  }
  return stats;
}

// Convenience loader that keeps the whole table in memory.
inline std::vector<LabeledExample> read_table_all(const std::filesystem::path& path,
                                                  const TableSchema& schema,
                                                  ReadStats* stats_out = nullptr,
                                                  const SkipReporter& on_skip = {}) {
  std::vector<LabeledExample> out;
  const ReadStats stats =
      read_table(path, schema, [&out](LabeledExample&& ex) { out.push_back(std::move(ex)); },
                 on_skip);
  if (stats_out) *stats_out = stats;
  return out;
}

inline bool slice_keeps(const LabeledExample& ex, const SliceFilter& filter) {
  if (!filter.max_chars) return true;
  if (!ex.char_length) throw MissingLength(ex.id);
  return *ex.char_length < *filter.max_chars;  // strictly shorter
}

// Length slicing only; the min_subgroup_count half of the filter is applied
// by report building, where per-subgroup counts exist.
inline std::vector<LabeledExample> apply_slice(std::vector<LabeledExample> examples,
                                               const SliceFilter& filter) {
  if (!filter.max_chars) return examples;
  std::vector<LabeledExample> out;
  out.reserve(examples.size());
  for (auto& ex : examples) {
    if (slice_keeps(ex, filter)) out.push_back(std::move(ex));
  }
  return out;
}

namespace detail {

inline std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace detail

// Writes examples as CSV and returns the schema that reads the file back
// losslessly on (id, score, label, tags). Scores use shortest round-trip
// formatting, so re-reading reproduces the exact doubles. Rows are streamed
// out one at a time.
inline TableSchema write_scored(const std::filesystem::path& path,
                                std::span<const LabeledExample> examples) {
  bool any_score = false;
  bool any_text = false;
  std::set<std::string> subgroups;
  for (const auto& ex : examples) {
    any_score |= ex.score.has_value();
    any_text |= !ex.text.empty();
    subgroups.insert(ex.subgroups.begin(), ex.subgroups.end());
  }

  TableSchema schema;
  schema.id_column = "id";
  schema.label_column = "label";
  if (any_score) schema.score_column = "score";
  if (any_text) schema.text_column = "text";
  for (const auto& sg : subgroups) schema.identity_columns.emplace_back(sg, sg);
  validate(schema);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path.string(), "cannot open output file");

  std::vector<std::string> row;
  row.push_back("id");
  if (any_score) row.push_back("score");
  row.push_back("label");
  if (any_text) row.push_back("text");
  for (const auto& sg : subgroups) row.push_back(sg);
  CsvWriter writer(out);
  writer.write_row(row);

  for (const auto& ex : examples) {
    row.clear();
    row.push_back(ex.id);
    if (any_score) row.push_back(ex.score ? detail::format_double(*ex.score) : std::string());
    row.push_back(ex.label == BinaryLabel::kPositive ? "1" : "0");
    if (any_text) row.push_back(ex.text);
    for (const auto& sg : subgroups) {
      row.push_back(ex.in_subgroup(sg) ? "1" : "0");
    }
    writer.write_row(row);
  }
  out.flush();
  if (!out) throw IoError(path.string(), "write failed");
  return schema;
}

}  // namespace biaseval
