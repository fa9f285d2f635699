#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "biaseval/table_io.hpp"
#include "biaseval/templates.hpp"
#include "test_support.hpp"

using namespace biaseval;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("biaseval-test-" + std::to_string(::getpid()) + "-" +
            std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  static int& counter() {
    static int c = 0;
    return c;
  }
  fs::path file(const std::string& name) const { return path / name; }
};

void write_file(const fs::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary);
  out << content;
}

TableSchema small_schema() {
  TableSchema s;
  s.id_column = "id";
  s.score_column = "score";
  s.label_column = "toxicity";
  s.text_column = "text";
  s.identity_columns = {{"male", "male"}, {"gay", "gay"}};
  return s;
}

}  // namespace

TEST_CASE("csv reader handles quoting, embedded separators and newlines") {
  std::istringstream in(
      "a,b,c\r\n"
      "1,\"x,y\",plain\n"
      "2,\"line\nbreak\",\"he said \"\"hi\"\"\"\n");
  CsvReader reader(in);
  std::vector<std::string> f;
  REQUIRE(reader.next(f));
  CHECK(f == std::vector<std::string>{"a", "b", "c"});
  REQUIRE(reader.next(f));
  CHECK(f == std::vector<std::string>{"1", "x,y", "plain"});
  REQUIRE(reader.next(f));
  CHECK(f == std::vector<std::string>{"2", "line\nbreak", "he said \"hi\""});
  CHECK(reader.record_line() == 3);
  CHECK_FALSE(reader.next(f));
}

TEST_CASE("read_table binarizes labels and attaches identity tags") {
  TempDir dir;
  const auto path = dir.file("data.csv");
  write_file(path,
             "id,score,toxicity,text,male,gay\n"
             "a,0.9,0.8,hello there,0.0,0.2\n"
             "b,0.2,0.3,ok,0.6,\n"
             "c,0.5,0.5,exact threshold,,1\n");
  const auto rows = read_table_all(path, small_schema());
  REQUIRE(rows.size() == 3);

  CHECK(rows[0].label == BinaryLabel::kPositive);  // 0.8 >= 0.5
  CHECK(rows[0].subgroups.empty());                // 0.0 and 0.2 below threshold
  CHECK(*rows[0].score == 0.9);
  CHECK(*rows[0].char_length == 11);

  CHECK(rows[1].label == BinaryLabel::kNegative);
  CHECK(rows[1].subgroups == std::vector<std::string>{"male"});  // 0.6 >= 0.5

  CHECK(rows[2].label == BinaryLabel::kPositive);  // threshold is inclusive
  CHECK(rows[2].subgroups == std::vector<std::string>{"gay"});
}

TEST_CASE("raising the label threshold never makes an example positive") {
  TempDir dir;
  const auto path = dir.file("data.csv");
  std::string body = "id,score,toxicity,text,male,gay\n";
  Xoshiro256pp rng(3);
  for (int i = 0; i < 50; ++i) {
    body += "r" + std::to_string(i) + ",0.5," + std::to_string(rng.uniform01()) + ",t,0,0\n";
  }
  write_file(path, body);
  TableSchema low = small_schema();
  low.label_threshold = 0.3;
  TableSchema high = small_schema();
  high.label_threshold = 0.7;
  const auto at_low = read_table_all(path, low);
  const auto at_high = read_table_all(path, high);
  REQUIRE(at_low.size() == at_high.size());
  for (std::size_t i = 0; i < at_low.size(); ++i) {
    if (at_high[i].label == BinaryLabel::kPositive) {
      REQUIRE(at_low[i].label == BinaryLabel::kPositive);
    }
  }
}

TEST_CASE("malformed rows are skipped and reported with line numbers") {
  TempDir dir;
  const auto path = dir.file("data.csv");
  write_file(path,
             "id,score,toxicity,text,male,gay\n"
             "a,0.9,0.8,fine,0,0\n"
             "b,0.9,0.8,short row\n"
             ",0.9,0.8,missing id,0,0\n"
             "d,not-a-number,0.8,bad score,0,0\n"
             "e,0.9,bad,bad label,0,0\n"
             "f,0.1,0.1,fine,oops,0\n"
             "g,0.4,0.2,fine,0,0\n");
  std::map<std::size_t, std::string> skips;
  ReadStats stats;
  const auto rows = read_table_all(path, small_schema(), &stats,
                                   [&](std::size_t line, const std::string& reason) {
                                     skips[line] = reason;
                                   });
  CHECK(stats.rows == 2);
  CHECK(stats.skipped == 5);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].id == "a");
  CHECK(rows[1].id == "g");
  CHECK(skips.count(3) == 1);  // short row
  CHECK(skips.count(4) == 1);  // missing id
  CHECK(skips.count(5) == 1);  // bad score
  CHECK(skips.count(6) == 1);  // bad label
  CHECK(skips.count(7) == 1);  // bad identity value
}

TEST_CASE("a non-finite score is rejected loudly, not skipped") {
  TempDir dir;
  const auto path = dir.file("data.csv");
  write_file(path,
             "id,score,toxicity,text,male,gay\n"
             "a,nan,0.8,x,0,0\n");
  CHECK_THROWS_AS(read_table_all(path, small_schema()), NonFiniteScore);
}

TEST_CASE("missing schema columns fail upfront") {
  TempDir dir;
  const auto path = dir.file("data.csv");
  write_file(path, "id,toxicity,text,male,gay\nx,0.1,t,0,0\n");
  CHECK_THROWS_AS(read_table_all(path, small_schema()), MissingColumn);
  CHECK_THROWS_AS(read_table_all(dir.file("absent.csv"), small_schema()), IoError);
}

TEST_CASE("json-lines input parses the same content") {
  TempDir dir;
  const auto path = dir.file("data.jsonl");
  write_file(path,
             R"({"id":"a","score":0.9,"toxicity":"0.8","text":"hello","male":0,"gay":0.7})"
             "\n"
             "not json\n"
             R"({"id":"b","score":0.2,"toxicity":0.1,"text":"ok"})"
             "\n");
  ReadStats stats;
  const auto rows = read_table_all(path, small_schema(), &stats);
  CHECK(stats.skipped == 1);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].label == BinaryLabel::kPositive);
  CHECK(rows[0].subgroups == std::vector<std::string>{"gay"});
  CHECK(rows[1].label == BinaryLabel::kNegative);
  CHECK(rows[1].subgroups.empty());  // identity keys absent -> untagged
}

TEST_CASE("slice filter keeps strictly shorter comments only") {
  LabeledExample ex;
  ex.id = "x";
  ex.char_length = 99;
  SliceFilter filter;
  filter.max_chars = 100;
  CHECK(slice_keeps(ex, filter));
  ex.char_length = 100;
  CHECK_FALSE(slice_keeps(ex, filter));
  ex.char_length.reset();
  CHECK_THROWS_AS(slice_keeps(ex, filter), MissingLength);
  filter.max_chars.reset();
  CHECK(slice_keeps(ex, filter));  // no filter: unchanged
}

TEST_CASE("char length counts unicode scalars, not bytes") {
  CHECK(scalar_length("abc") == 3);
  CHECK(scalar_length("") == 0);
  CHECK(scalar_length("caf\xc3\xa9") == 4);          // e-acute is 2 bytes
  CHECK(scalar_length("\xe2\x82\xac 1") == 3);       // euro sign is 3 bytes
  CHECK(scalar_length("\xf0\x9f\x98\x80") == 1);     // emoji is 4 bytes
}

TEST_CASE("write_scored round-trips ids, scores, labels and tags") {
  Xoshiro256pp rng(17);
  std::vector<LabeledExample> original;
  for (int i = 0; i < 200; ++i) {
    LabeledExample ex;
    ex.id = "ex-" + std::to_string(i);
    ex.score = rng.uniform01();
    ex.label = (rng.next() & 1) ? BinaryLabel::kPositive : BinaryLabel::kNegative;
    if (rng.next() % 3 == 0) ex.subgroups.push_back("alpha");
    if (rng.next() % 5 == 0) ex.subgroups.push_back("beta");
    std::sort(ex.subgroups.begin(), ex.subgroups.end());
    original.push_back(std::move(ex));
  }
  TempDir dir;
  const auto path = dir.file("scored.csv");
  const TableSchema schema = write_scored(path, original);
  const auto back = read_table_all(path, schema);
  REQUIRE(back.size() == original.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    REQUIRE(back[i].id == original[i].id);
    REQUIRE(*back[i].score == *original[i].score);  // exact round-trip
    REQUIRE(back[i].label == original[i].label);
    auto tags = back[i].subgroups;
    std::sort(tags.begin(), tags.end());
    REQUIRE(tags == original[i].subgroups);
  }
}

TEST_CASE("write_scored streams large collections row by row") {
  // Reduced-scale check of the streamed-write contract: 100k rows go out
  // and come back intact.
  Xoshiro256pp rng(8);
  std::vector<LabeledExample> examples;
  examples.reserve(100000);
  for (int i = 0; i < 100000; ++i) {
    LabeledExample ex;
    ex.id = "r" + std::to_string(i);
    ex.score = rng.uniform01();
    ex.label = (i % 3 == 0) ? BinaryLabel::kPositive : BinaryLabel::kNegative;
    if (i % 7 == 0) ex.subgroups = {"g"};
    examples.push_back(std::move(ex));
  }
  TempDir dir;
  const auto path = dir.file("large.csv");
  const TableSchema schema = write_scored(path, examples);
  ReadStats stats;
  std::size_t positives = 0;
  read_table(path, schema, [&positives](LabeledExample&& ex) {
    positives += ex.label == BinaryLabel::kPositive;
  });
  std::size_t rows = 0;
  stats = read_table(path, schema, [&rows](LabeledExample&&) { ++rows; });
  CHECK(rows == examples.size());
  CHECK(stats.skipped == 0);
  CHECK(positives == 33334);
}

TEST_CASE("write_scored with an empty collection emits a header-only file") {
  TempDir dir;
  const auto path = dir.file("empty.csv");
  write_scored(path, std::vector<LabeledExample>{});
  std::ifstream in(path);
  std::string line;
  REQUIRE(std::getline(in, line));
  CHECK(line == "id,label");
  CHECK_FALSE(std::getline(in, line));
}

TEST_CASE("schema JSON load validates and keeps deterministic identity order") {
  TempDir dir;
  const auto path = dir.file("schema.json");
  write_file(path, R"({
    "id_column": "id",
    "score_column": "score",
    "label_column": "tox",
    "text_column": null,
    "identity_columns": {"zeta": "z", "alpha": "a"},
    "label_threshold": 0.4,
    "identity_threshold": 0.6
  })");
  const auto schema = load_schema(path);
  CHECK(schema.label_column == "tox");
  CHECK_FALSE(schema.text_column.has_value());
  REQUIRE(schema.identity_columns.size() == 2);
  CHECK(schema.identity_columns[0].first == "alpha");  // sorted by column
  CHECK(schema.identity_columns[1].first == "zeta");

  write_file(path, R"({"id_column": "id", "label_column": "id"})");
  CHECK_THROWS_AS(load_schema(path), InvalidSpec);  // duplicate column
  write_file(path, R"({"id_column": "id", "label_column": "l", "label_threshold": 1.5})");
  CHECK_THROWS_AS(load_schema(path), InvalidSpec);
}

TEST_CASE("template generation: counts, balance, tagging") {
  TemplateSet set;
  set.templates = {{"Being {identity} is wonderful.", BinaryLabel::kNegative},
                   {"I love {identity} people.", BinaryLabel::kNegative},
                   {"All {identity} people are awful.", BinaryLabel::kPositive},
                   {"I hate {identity} people.", BinaryLabel::kPositive}};
  set.terms = {{"gay", "gay"}, {"muslim", "muslim"}, {"deaf people", "deaf"}};
  const auto out = generate_templates(set);
  REQUIRE(out.size() == 12);

  std::map<std::string, std::pair<int, int>> per_subgroup;  // subgroup -> (n, positives)
  for (const auto& ex : out) {
    REQUIRE(ex.subgroups.size() == 1);
    REQUIRE_FALSE(ex.score.has_value());
    REQUIRE(ex.text.find("{identity}") == std::string::npos);
    auto& [n, pos] = per_subgroup[ex.subgroups[0]];
    ++n;
    pos += ex.label == BinaryLabel::kPositive;
  }
  REQUIRE(per_subgroup.size() == 3);
  for (const auto& [sg, np] : per_subgroup) {
    CHECK(np.first == 4);
    CHECK(np.second == 2);  // exactly the template set's balance
  }

  const auto& first = out.front();
  CHECK(first.text == "Being gay is wonderful.");
  CHECK(*first.char_length == first.text.size());
}

TEST_CASE("templates without exactly one placeholder are rejected") {
  TemplateSet set;
  set.terms = {{"gay", "gay"}};
  set.templates = {{"no placeholder here", BinaryLabel::kNegative}};
  CHECK_THROWS_AS(generate_templates(set), BadTemplate);
  set.templates = {{"{identity} and {identity}", BinaryLabel::kNegative}};
  CHECK_THROWS_AS(generate_templates(set), BadTemplate);
  set.templates.clear();
  CHECK_THROWS_AS(generate_templates(set), InvalidSpec);
}

TEST_CASE("shipped default template set yields 77k balanced examples") {
  const auto set = load_template_set(fs::path(BIASEVAL_DATA_DIR) / "default_templates.csv",
                                     fs::path(BIASEVAL_DATA_DIR) / "default_identity_terms.csv");
  REQUIRE(set.templates.size() == 1540);
  REQUIRE(set.terms.size() == 50);
  const auto out = generate_templates(set);
  REQUIRE(out.size() == 77000);

  std::map<std::string, std::pair<int, int>> per_subgroup;
  for (const auto& ex : out) {
    auto& [n, pos] = per_subgroup[ex.subgroups[0]];
    ++n;
    pos += ex.label == BinaryLabel::kPositive;
  }
  REQUIRE(per_subgroup.size() == 50);
  for (const auto& [sg, np] : per_subgroup) {
    REQUIRE(np.first == 1540);
    REQUIRE(np.second == 770);  // 50% toxic in every subgroup
  }
}
