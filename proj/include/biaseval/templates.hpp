#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "biaseval/csv.hpp"
#include "biaseval/errors.hpp"
#include "biaseval/table_io.hpp"
#include "biaseval/types.hpp"

namespace biaseval {

inline constexpr std::string_view kIdentityPlaceholder = "{identity}";

struct TemplateEntry {
  std::string pattern;  // contains {identity} exactly once
  BinaryLabel label = BinaryLabel::kNegative;
};

struct TermEntry {
  std::string term;
  std::string subgroup;
};

struct TemplateSet {
  std::vector<TemplateEntry> templates;
  std::vector<TermEntry> terms;
};

// templates CSV: header "template,label" with label in {0,1}.
// terms CSV: header "term,subgroup".
inline TemplateSet load_template_set(const std::filesystem::path& templates_csv,
                                     const std::filesystem::path& terms_csv) {
  TemplateSet set;

  std::ifstream tin(templates_csv, std::ios::binary);
  if (!tin) throw IoError(templates_csv.string(), "cannot open template file");
  CsvReader treader(tin);
  std::vector<std::string> fields;
  if (!treader.next(fields) || fields.size() < 2 || fields[0] != "template" ||
      fields[1] != "label") {
    throw MissingColumn("template/label");
  }
  while (treader.next(fields)) {
    if (fields.size() == 1 && fields[0].empty()) continue;
    if (fields.size() != 2) {
      throw IoError(templates_csv.string(),
                    "bad template row at line " + std::to_string(treader.record_line()));
    }
    const auto value = detail::parse_number(std::string_view(fields[1]));
    if (!value) {
      throw IoError(templates_csv.string(),
                    "bad label at line " + std::to_string(treader.record_line()));
    }
    set.templates.push_back(TemplateEntry{
        fields[0], *value >= 0.5 ? BinaryLabel::kPositive : BinaryLabel::kNegative});
  }

  std::ifstream rin(terms_csv, std::ios::binary);
  if (!rin) throw IoError(terms_csv.string(), "cannot open terms file");
  CsvReader rreader(rin);
  if (!rreader.next(fields) || fields.size() < 2 || fields[0] != "term" ||
      fields[1] != "subgroup") {
    throw MissingColumn("term/subgroup");
  }
  while (rreader.next(fields)) {
    if (fields.size() == 1 && fields[0].empty()) continue;
    if (fields.size() != 2 || fields[0].empty() || fields[1].empty()) {
      throw IoError(terms_csv.string(),
                    "bad term row at line " + std::to_string(rreader.record_line()));
    }
    set.terms.push_back({fields[0], fields[1]});
  }
  return set;
}

namespace detail {

inline std::size_t placeholder_count(std::string_view pattern) {
  std::size_t n = 0;
  std::size_t pos = 0;
  while ((pos = pattern.find(kIdentityPlaceholder, pos)) != std::string_view::npos) {
    ++n;
    pos += kIdentityPlaceholder.size();
  }
  return n;
}

}  // namespace detail

// Expands every (template, term) pair into a labeled, unscored example
// tagged with the term's subgroup. Per-subgroup label balance equals the
// template set's balance by construction.
inline std::vector<LabeledExample> generate_templates(const TemplateSet& set) {
  if (set.templates.empty() || set.terms.empty()) {
    throw InvalidSpec("template set needs at least one template and one term");
  }
  for (const auto& t : set.templates) {
    if (detail::placeholder_count(t.pattern) != 1) throw BadTemplate(t.pattern);
  }

  std::vector<LabeledExample> out;
  out.reserve(set.templates.size() * set.terms.size());
  for (std::size_t ti = 0; ti < set.templates.size(); ++ti) {
    const auto& tpl = set.templates[ti];
    const std::size_t at = tpl.pattern.find(kIdentityPlaceholder);
    for (std::size_t si = 0; si < set.terms.size(); ++si) {
      const auto& term = set.terms[si];
      LabeledExample ex;
      ex.id = "t" + std::to_string(ti) + "-" + std::to_string(si);
      ex.label = tpl.label;
      ex.subgroups = {term.subgroup};
      ex.text = tpl.pattern;
      ex.text.replace(at, kIdentityPlaceholder.size(), term.term);
      ex.char_length = scalar_length(ex.text);
      out.push_back(std::move(ex));
    }
  }
  return out;
}

}  // namespace biaseval
