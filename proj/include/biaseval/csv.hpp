#pragma once

#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace biaseval {

// Streaming CSV reader: RFC-style quoting (embedded commas, doubled quotes,
// quoted newlines), CRLF tolerant, lenient about stray quotes. Reads one
// record at a time through a line buffer, so memory stays bounded no matter
// how large the file is.
class CsvReader {
 public:
  explicit CsvReader(std::istream& in) : in_(in) {}

  // Fills `fields` with the next record. Returns false on end of input.
  bool next(std::vector<std::string>& fields) {
    fields.clear();
    if (!std::getline(in_, line_)) return false;
    record_line_ = ++line_no_;
    if (!line_.empty() && line_.back() == '\r') line_.pop_back();

    std::string field;
    bool in_quotes = false;
    std::size_t i = 0;
    while (true) {
      if (i >= line_.size()) {
        if (in_quotes) {
          // Quoted field spans a newline: pull the next physical line.
          if (!std::getline(in_, line_)) break;  // unterminated quote at EOF
          ++line_no_;
          if (!line_.empty() && line_.back() == '\r') line_.pop_back();
          field.push_back('\n');
          i = 0;
          continue;
        }
        break;
      }
      const char c = line_[i];
      if (in_quotes) {
        if (c == '"') {
          if (i + 1 < line_.size() && line_[i + 1] == '"') {
            field.push_back('"');
            ++i;
          } else {
            in_quotes = false;
          }
        } else {
          field.push_back(c);
        }
      } else if (c == '"' && field.empty()) {
        in_quotes = true;
      } else if (c == ',') {
        fields.push_back(std::move(field));
        field.clear();
      } else {
        field.push_back(c);
      }
      ++i;
    }
    fields.push_back(std::move(field));
    return true;
  }

  // 1-based line number where the last record started.
  std::size_t record_line() const { return record_line_; }

 private:
  std::istream& in_;
  std::string line_;
  std::size_t line_no_ = 0;
  std::size_t record_line_ = 0;
};

class CsvWriter {
 public:
  explicit CsvWriter(std::ostream& out) : out_(out) {}

  void write_row(std::span<const std::string> fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) out_ << ',';
      write_field(fields[i]);
    }
    out_ << '\n';
  }

 private:
  void write_field(std::string_view f) {
    const bool needs_quotes = f.find_first_of(",\"\n\r") != std::string_view::npos;
    if (!needs_quotes) {
      out_ << f;
      return;
    }
    out_ << '"';
    for (char c : f) {
      if (c == '"') out_ << '"';
      out_ << c;
    }
    out_ << '"';
  }

  std::ostream& out_;
};

}  // namespace biaseval
