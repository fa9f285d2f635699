#pragma once

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "biaseval/csv.hpp"
#include "biaseval/errors.hpp"
#include "biaseval/metrics.hpp"
#include "biaseval/table_io.hpp"
#include "biaseval/types.hpp"

namespace biaseval {

// One model's scores, keyed by example id. Must cover every id in the
// dataset handed to build_report.
struct ScoreSet {
  std::string name;
  std::unordered_map<std::string, double> by_id;
};

struct ReportOptions {
  std::string sort_metric = "subgroup_auc";  // worst-first ordering key
  unsigned threads = 0;                      // 0: hardware concurrency
  std::string dataset_id;
};

// Per-subgroup metric rows for one or two models over one slice.
// rows[m][i] belongs to models[m] and subgroups[i]; the two row sets always
// cover identical subgroup ids in identical order.
struct EvalReport {
  std::vector<std::string> models;
  std::optional<std::uint32_t> max_chars;
  std::uint64_t min_subgroup_count = 0;
  std::string dataset_id;
  std::string sort_metric = "subgroup_auc";
  std::string generated_at;
  std::vector<std::string> subgroups;
  std::vector<std::vector<BiasMetricsRow>> rows;

  bool operator==(const EvalReport&) const = default;
};

inline constexpr std::string_view kMetricKeys[] = {
    "subgroup_auc", "bpsn_auc", "bnsp_auc", "negative_aeg", "positive_aeg"};

inline std::optional<double> metric_value(const BiasMetricsRow& row, std::string_view key) {
  if (key == "subgroup_auc") return row.subgroup_auc;
  if (key == "bpsn_auc") return row.bpsn_auc;
  if (key == "bnsp_auc") return row.bnsp_auc;
  if (key == "negative_aeg") return row.negative_aeg;
  if (key == "positive_aeg") return row.positive_aeg;
  throw InvalidSpec("unknown sort metric '" + std::string(key) + "'");
}

// UTC timestamp; honors SOURCE_DATE_EPOCH so pipelines can be byte-stable.
inline std::string now_iso8601_utc() {
  std::time_t t = std::time(nullptr);
  if (const char* sde = std::getenv("SOURCE_DATE_EPOCH")) {
    t = static_cast<std::time_t>(std::strtoll(sde, nullptr, 10));
  }
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Computes bias_suite per qualifying subgroup per model, worst subgroups
// first. Subgroup qualification counts in-slice subgroup examples of any
// label against filter.min_subgroup_count. An empty `subgroups` list means
// every tag observed in the sliced dataset.
inline EvalReport build_report(std::span<const LabeledExample> dataset,
                               std::vector<std::string> subgroups, const SliceFilter& filter,
                               std::span<const ScoreSet> models,
                               const ReportOptions& options = {}) {
  if (models.empty() || models.size() > 2) {
    throw InvalidSpec("build_report takes one or two models");
  }
  if (models.size() == 2 && models[0].name == models[1].name) {
    throw InvalidSpec("model names must be distinct");
  }
  (void)metric_value(BiasMetricsRow{}, options.sort_metric);  // validate the key

  // Slice by length once; keep compact per-example records.
  std::vector<std::uint32_t> kept;
  kept.reserve(dataset.size());
  for (std::uint32_t i = 0; i < dataset.size(); ++i) {
    if (slice_keeps(dataset[i], filter)) kept.push_back(i);
  }

  // Resolve model scores against the sliced dataset.
  std::vector<std::vector<double>> model_scores(models.size());
  for (std::size_t m = 0; m < models.size(); ++m) {
    model_scores[m].resize(kept.size());
    std::vector<std::string> missing;
    for (std::size_t k = 0; k < kept.size(); ++k) {
      const auto& ex = dataset[kept[k]];
      const auto it = models[m].by_id.find(ex.id);
      if (it == models[m].by_id.end()) {
        if (missing.size() < 5) missing.push_back(ex.id);
        continue;
      }
      model_scores[m][k] = it->second;
    }
    if (!missing.empty()) {
      std::string msg = "model '" + models[m].name + "' lacks scores for ids:";
      for (const auto& id : missing) msg += " " + id;
      throw ScoreCoverageGap(msg);
    }
  }

  if (subgroups.empty()) {
    std::set<std::string> seen;
    for (const auto k : kept) {
      seen.insert(dataset[k].subgroups.begin(), dataset[k].subgroups.end());
    }
    subgroups.assign(seen.begin(), seen.end());
  }

  // Qualify subgroups by in-slice tagged-example count.
  std::vector<std::string> qualified;
  for (const auto& sg : subgroups) {
    std::uint64_t count = 0;
    for (const auto k : kept) {
      count += dataset[k].in_subgroup(sg);
    }
    if (count >= filter.min_subgroup_count && count > 0) qualified.push_back(sg);
  }
  if (qualified.empty()) {
    throw NoQualifyingSubgroups("no subgroup reaches min_subgroup_count " +
                                std::to_string(filter.min_subgroup_count) + " in the slice");
  }
  std::sort(qualified.begin(), qualified.end());
  qualified.erase(std::unique(qualified.begin(), qualified.end()), qualified.end());

  // Per-subgroup rows, computed in parallel, merged by index so the output
  // order never depends on scheduling.
  std::vector<std::vector<BiasMetricsRow>> rows(models.size(),
                                               std::vector<BiasMetricsRow>(qualified.size()));
  auto compute_subgroup = [&](std::size_t sgi) {
    const std::string& sg = qualified[sgi];
    // Cell membership is score-independent, so route indices once.
    std::vector<std::uint32_t> cell[4];  // d_neg, d_pos, dg_neg, dg_pos
    for (std::uint32_t k = 0; k < kept.size(); ++k) {
      const auto& ex = dataset[kept[k]];
      const bool member = ex.in_subgroup(sg);
      const bool positive = ex.label == BinaryLabel::kPositive;
      cell[(member ? 2 : 0) + (positive ? 1 : 0)].push_back(k);
    }
    for (std::size_t m = 0; m < models.size(); ++m) {
      SubgroupPartition p;
      p.subgroup_id = sg;
      ScoreSample* samples[4] = {&p.d_neg, &p.d_pos, &p.dg_neg, &p.dg_pos};
      for (int c = 0; c < 4; ++c) {
        samples[c]->scores.reserve(cell[c].size());
        for (const auto k : cell[c]) samples[c]->scores.push_back(model_scores[m][k]);
      }
      rows[m][sgi] = bias_suite(p);
    }
  };

  unsigned threads = options.threads ? options.threads : std::thread::hardware_concurrency();
  threads = std::max(1u, std::min<unsigned>(threads, qualified.size()));
  if (threads == 1) {
    for (std::size_t i = 0; i < qualified.size(); ++i) compute_subgroup(i);
  } else {
    std::atomic<std::size_t> cursor{0};
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (std::size_t i = cursor.fetch_add(1); i < qualified.size();
             i = cursor.fetch_add(1)) {
          compute_subgroup(i);
        }
      });
    }
    for (auto& t : pool) t.join();
  }

  // Worst-first: ascending by the first model's sort metric, absent values
  // last, ties broken by subgroup id.
  std::vector<std::size_t> order(qualified.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto va = metric_value(rows[0][a], options.sort_metric);
    const auto vb = metric_value(rows[0][b], options.sort_metric);
    if (va.has_value() != vb.has_value()) return va.has_value();
    if (va && vb && *va != *vb) return *va < *vb;
    return qualified[a] < qualified[b];
  });

  EvalReport report;
  for (const auto& m : models) report.models.push_back(m.name);
  report.max_chars = filter.max_chars;
  report.min_subgroup_count = filter.min_subgroup_count;
  report.dataset_id = options.dataset_id;
  report.sort_metric = options.sort_metric;
  report.generated_at = now_iso8601_utc();
  report.rows.resize(models.size());
  for (const auto i : order) {
    report.subgroups.push_back(qualified[i]);
    for (std::size_t m = 0; m < models.size(); ++m) {
      report.rows[m].push_back(rows[m][i]);
    }
  }
  return report;
}

// --- serialization -----------------------------------------------------

inline void to_json(nlohmann::json& j, const BiasMetricsRow& row) {
  auto opt = [](const std::optional<double>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json();
  };
  j = {{"subgroup", row.subgroup_id},
       {"n_bg_neg", row.n_bg_neg},
       {"n_bg_pos", row.n_bg_pos},
       {"n_sg_neg", row.n_sg_neg},
       {"n_sg_pos", row.n_sg_pos},
       {"subgroup_auc", opt(row.subgroup_auc)},
       {"bpsn_auc", opt(row.bpsn_auc)},
       {"bnsp_auc", opt(row.bnsp_auc)},
       {"negative_aeg", opt(row.negative_aeg)},
       {"positive_aeg", opt(row.positive_aeg)}};
}

inline void from_json(const nlohmann::json& j, BiasMetricsRow& row) {
  row.subgroup_id = j.at("subgroup").get<std::string>();
  row.n_bg_neg = j.at("n_bg_neg").get<std::uint64_t>();
  row.n_bg_pos = j.at("n_bg_pos").get<std::uint64_t>();
  row.n_sg_neg = j.at("n_sg_neg").get<std::uint64_t>();
  row.n_sg_pos = j.at("n_sg_pos").get<std::uint64_t>();
  auto opt = [&](const char* key) -> std::optional<double> {
    if (!j.contains(key) || j[key].is_null()) return std::nullopt;
    return j[key].get<double>();
  };
  row.subgroup_auc = opt("subgroup_auc");
  row.bpsn_auc = opt("bpsn_auc");
  row.bnsp_auc = opt("bnsp_auc");
  row.negative_aeg = opt("negative_aeg");
  row.positive_aeg = opt("positive_aeg");
}

inline void to_json(nlohmann::json& j, const EvalReport& report) {
  j = nlohmann::json{{"models", report.models},
                     {"slice",
                      {{"max_chars", report.max_chars ? nlohmann::json(*report.max_chars)
                                                      : nlohmann::json()},
                       {"min_subgroup_count", report.min_subgroup_count},
                       {"dataset_id", report.dataset_id}}},
                     {"sort_metric", report.sort_metric},
                     {"generated_at", report.generated_at},
                     {"subgroups", report.subgroups}};
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t m = 0; m < report.models.size(); ++m) {
    for (const auto& row : report.rows[m]) {
      nlohmann::json r = row;
      r["model"] = report.models[m];
      rows.push_back(std::move(r));
    }
  }
  j["rows"] = rows;
}

inline void from_json(const nlohmann::json& j, EvalReport& report) {
  report.models = j.at("models").get<std::vector<std::string>>();
  const auto& slice = j.at("slice");
  report.max_chars.reset();
  if (!slice.at("max_chars").is_null()) {
    report.max_chars = slice.at("max_chars").get<std::uint32_t>();
  }
  report.min_subgroup_count = slice.at("min_subgroup_count").get<std::uint64_t>();
  report.dataset_id = slice.value("dataset_id", std::string());
  report.sort_metric = j.value("sort_metric", std::string("subgroup_auc"));
  report.generated_at = j.value("generated_at", std::string());
  report.subgroups = j.at("subgroups").get<std::vector<std::string>>();
  report.rows.assign(report.models.size(), {});
  std::unordered_map<std::string, std::size_t> model_index;
  for (std::size_t m = 0; m < report.models.size(); ++m) model_index[report.models[m]] = m;
  for (const auto& r : j.at("rows")) {
    const auto m = model_index.find(r.at("model").get<std::string>());
    if (m == model_index.end()) throw InvalidSpec("report row references unknown model");
    report.rows[m->second].push_back(r.get<BiasMetricsRow>());
  }
}

// --- rendering ----------------------------------------------------------

enum class RenderFormat { kCsv, kMarkdown, kJson, kSvgHeatmap };

inline RenderFormat parse_render_format(std::string_view name) {
  if (name == "csv") return RenderFormat::kCsv;
  if (name == "markdown" || name == "md") return RenderFormat::kMarkdown;
  if (name == "json") return RenderFormat::kJson;
  if (name == "svg-heatmap" || name == "svg") return RenderFormat::kSvgHeatmap;
  throw UnsupportedFormat(std::string(name));
}

namespace detail {

inline std::string opt_str(const std::optional<double>& v) {
  return v ? format_double(*v) : std::string();
}

// Fixed color anchors so two reports are visually comparable.
// AUC: 0.5 -> red, 1.0 -> white. AEG: -0.5 -> blue, 0 -> white, +0.5 -> red.
struct Rgb {
  int r, g, b;
};

inline Rgb lerp(Rgb a, Rgb b, double t) {
  t = std::clamp(t, 0.0, 1.0);
  auto mix = [t](int x, int y) { return static_cast<int>(x + (y - x) * t + 0.5); };
  return {mix(a.r, b.r), mix(a.g, b.g), mix(a.b, b.b)};
}

inline std::string hex_color(Rgb c) {
  char buf[8];
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", c.r, c.g, c.b);
  return buf;
}

inline std::string auc_color(double v) {
  static constexpr Rgb red{215, 48, 39}, white{255, 255, 255};
  return hex_color(lerp(red, white, (v - 0.5) / 0.5));
}

inline std::string aeg_color(double v) {
  static constexpr Rgb blue{49, 54, 149}, white{255, 255, 255}, red{165, 0, 38};
  if (v < 0.0) return hex_color(lerp(white, blue, -v / 0.5));
  return hex_color(lerp(white, red, v / 0.5));
}

inline std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

}  // namespace detail

inline std::string render(const EvalReport& report, RenderFormat format) {
  if (report.subgroups.empty() || report.models.empty()) {
    throw InvalidSpec("cannot render an empty report");
  }
  static constexpr const char* kColumns[] = {
      "subgroup",     "n_bg_neg", "n_bg_pos", "n_sg_neg",     "n_sg_pos",    "subgroup_auc",
      "bpsn_auc",     "bnsp_auc", "negative_aeg", "positive_aeg"};

  switch (format) {
    case RenderFormat::kJson: {
      const nlohmann::json j = report;
      return j.dump(2) + "\n";
    }

    case RenderFormat::kCsv: {
      std::ostringstream out;
      CsvWriter writer(out);
      std::vector<std::string> fields;
      fields.push_back("model");
      for (const char* c : kColumns) fields.push_back(c);
      writer.write_row(fields);
      for (std::size_t m = 0; m < report.models.size(); ++m) {
        for (const auto& row : report.rows[m]) {
          fields.clear();
          fields.push_back(report.models[m]);
          fields.push_back(row.subgroup_id);
          fields.push_back(std::to_string(row.n_bg_neg));
          fields.push_back(std::to_string(row.n_bg_pos));
          fields.push_back(std::to_string(row.n_sg_neg));
          fields.push_back(std::to_string(row.n_sg_pos));
          fields.push_back(detail::opt_str(row.subgroup_auc));
          fields.push_back(detail::opt_str(row.bpsn_auc));
          fields.push_back(detail::opt_str(row.bnsp_auc));
          fields.push_back(detail::opt_str(row.negative_aeg));
          fields.push_back(detail::opt_str(row.positive_aeg));
          writer.write_row(fields);
        }
      }
      return out.str();
    }

    case RenderFormat::kMarkdown: {
      std::ostringstream out;
      for (std::size_t m = 0; m < report.models.size(); ++m) {
        out << "## " << report.models[m] << "\n\n|";
        for (const char* c : kColumns) out << " " << c << " |";
        out << "\n|";
        for (std::size_t c = 0; c < std::size(kColumns); ++c) out << " --- |";
        out << "\n";
        for (const auto& row : report.rows[m]) {
          out << "| " << row.subgroup_id << " | " << row.n_bg_neg << " | " << row.n_bg_pos
              << " | " << row.n_sg_neg << " | " << row.n_sg_pos << " | "
              << detail::opt_str(row.subgroup_auc) << " | " << detail::opt_str(row.bpsn_auc)
              << " | " << detail::opt_str(row.bnsp_auc) << " | "
              << detail::opt_str(row.negative_aeg) << " | "
              << detail::opt_str(row.positive_aeg) << " |\n";
        }
        out << "\n";
      }
      return out.str();
    }

    case RenderFormat::kSvgHeatmap: {
      static constexpr const char* kMetricNames[] = {"Subgroup AUC", "BPSN AUC", "BNSP AUC",
                                                     "Negative AEG", "Positive AEG"};
      const int label_w = 240, cell_w = 92, cell_h = 22, header_h = 54, gap = 16;
      const int block_w = 5 * cell_w;
      const int width = label_w + static_cast<int>(report.models.size()) * (block_w + gap);
      const int height = header_h + cell_h * static_cast<int>(report.subgroups.size()) + 8;

      std::ostringstream out;
      out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
          << height << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
      out << "<rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";

      for (std::size_t m = 0; m < report.models.size(); ++m) {
        const int x0 = label_w + static_cast<int>(m) * (block_w + gap);
        out << "<text x=\"" << x0 + block_w / 2 << "\" y=\"16\" text-anchor=\"middle\" "
            << "font-weight=\"bold\">" << detail::xml_escape(report.models[m]) << "</text>\n";
        for (int c = 0; c < 5; ++c) {
          out << "<text x=\"" << x0 + c * cell_w + cell_w / 2 << "\" y=\"40\" "
              << "text-anchor=\"middle\" font-size=\"10\">" << kMetricNames[c] << "</text>\n";
        }
      }

      for (std::size_t i = 0; i < report.subgroups.size(); ++i) {
        const int y = header_h + static_cast<int>(i) * cell_h;
        out << "<text x=\"" << label_w - 8 << "\" y=\"" << y + cell_h - 7
            << "\" text-anchor=\"end\">" << detail::xml_escape(report.subgroups[i])
            << "</text>\n";
        for (std::size_t m = 0; m < report.models.size(); ++m) {
          const int x0 = label_w + static_cast<int>(m) * (block_w + gap);
          const BiasMetricsRow& row = report.rows[m][i];
          const std::optional<double> values[5] = {row.subgroup_auc, row.bpsn_auc,
                                                   row.bnsp_auc, row.negative_aeg,
                                                   row.positive_aeg};
          for (int c = 0; c < 5; ++c) {
            const int x = x0 + c * cell_w;
            if (!values[c]) {
              // Absent metric: blank cell.
              out << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cell_w
                  << "\" height=\"" << cell_h
                  << "\" fill=\"white\" stroke=\"#cccccc\"/>\n";
              continue;
            }
            const std::string color =
                c < 3 ? detail::auc_color(*values[c]) : detail::aeg_color(*values[c]);
            char label[16];
            std::snprintf(label, sizeof(label), "%.2f", *values[c]);
            out << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cell_w
                << "\" height=\"" << cell_h << "\" fill=\"" << color
                << "\" stroke=\"#888888\"/>\n";
            out << "<text x=\"" << x + cell_w / 2 << "\" y=\"" << y + cell_h - 7
                << "\" text-anchor=\"middle\">" << label << "</text>\n";
          }
        }
      }
      out << "</svg>\n";
      return out.str();
    }
  }
  throw UnsupportedFormat("unknown");
}

// --- distribution sketches ----------------------------------------------

struct CellSketch {
  std::vector<double> bin_edges;        // bins + 1 edges spanning [0, 1]
  std::vector<std::uint64_t> counts;
  std::vector<double> density_x;        // kernel density curve samples
  std::vector<double> density_y;
  double bandwidth = 0.0;

  bool operator==(const CellSketch&) const = default;
};

struct DistributionSketch {
  std::string subgroup_id;
  std::optional<CellSketch> bg_neg, bg_pos, sg_neg, sg_pos;
};

namespace detail {

// Gaussian KDE with a Silverman-style bandwidth (floored at 0.01).
inline CellSketch sketch_cell(const std::vector<double>& scores, std::uint32_t bins) {
  CellSketch cell;
  const double n = static_cast<double>(scores.size());
  cell.bin_edges.resize(bins + 1);
  for (std::uint32_t b = 0; b <= bins; ++b) {
    cell.bin_edges[b] = static_cast<double>(b) / bins;
  }
  cell.counts.assign(bins, 0);
  for (const double raw : scores) {
    const double s = std::clamp(raw, 0.0, 1.0);
    const auto b = std::min<std::uint32_t>(bins - 1, static_cast<std::uint32_t>(s * bins));
    ++cell.counts[b];
  }

  double mean = 0.0;
  for (const double s : scores) mean += s;
  mean /= n;
  double var = 0.0;
  for (const double s : scores) var += (s - mean) * (s - mean);
  const double sd = scores.size() > 1 ? std::sqrt(var / (n - 1)) : 0.0;

  std::vector<double> sorted = scores;
  std::sort(sorted.begin(), sorted.end());
  const double iqr = sorted[static_cast<std::size_t>(0.75 * (n - 1))] -
                     sorted[static_cast<std::size_t>(0.25 * (n - 1))];
  double spread = sd;
  if (iqr > 0.0) spread = std::min(sd, iqr / 1.34);
  cell.bandwidth = std::max(0.01, 0.9 * spread * std::pow(n, -0.2));

  constexpr int kDensityPoints = 101;
  cell.density_x.resize(kDensityPoints);
  cell.density_y.resize(kDensityPoints);
  const double inv = 1.0 / (cell.bandwidth * 2.50662827463100050242 * n);
  for (int i = 0; i < kDensityPoints; ++i) {
    const double x = static_cast<double>(i) / (kDensityPoints - 1);
    double density = 0.0;
    for (const double s : scores) {
      const double z = (x - s) / cell.bandwidth;
      density += std::exp(-0.5 * z * z);
    }
    cell.density_x[i] = x;
    cell.density_y[i] = density * inv;
  }
  return cell;
}

}  // namespace detail

// Histogram plus kernel density for each of the four partition cells;
// empty cells stay absent.
inline DistributionSketch sketch_distributions(std::span<const LabeledExample> dataset,
                                               const std::string& subgroup_id,
                                               const ScoreSet* scores, std::uint32_t bins) {
  if (bins < 1) throw InvalidSpec("bins must be >= 1");
  std::vector<LabeledExample> rescored;
  std::span<const LabeledExample> source = dataset;
  if (scores != nullptr) {
    rescored.assign(dataset.begin(), dataset.end());
    for (auto& ex : rescored) {
      const auto it = scores->by_id.find(ex.id);
      if (it == scores->by_id.end()) {
        throw ScoreCoverageGap("model '" + scores->name + "' lacks a score for id " + ex.id);
      }
      ex.score = it->second;
    }
    source = rescored;
  }
  const SubgroupPartition p = partition(source, subgroup_id);

  DistributionSketch sketch;
  sketch.subgroup_id = subgroup_id;
  auto fill = [bins](const ScoreSample& sample, std::optional<CellSketch>& slot) {
    if (!sample.empty()) slot = detail::sketch_cell(sample.scores, bins);
  };
  fill(p.d_neg, sketch.bg_neg);
  fill(p.d_pos, sketch.bg_pos);
  fill(p.dg_neg, sketch.sg_neg);
  fill(p.dg_pos, sketch.sg_pos);
  return sketch;
}

inline void to_json(nlohmann::json& j, const CellSketch& cell) {
  j = {{"bin_edges", cell.bin_edges},
       {"counts", cell.counts},
       {"density_x", cell.density_x},
       {"density_y", cell.density_y},
       {"bandwidth", cell.bandwidth}};
}

inline void from_json(const nlohmann::json& j, CellSketch& cell) {
  cell.bin_edges = j.at("bin_edges").get<std::vector<double>>();
  cell.counts = j.at("counts").get<std::vector<std::uint64_t>>();
  cell.density_x = j.at("density_x").get<std::vector<double>>();
  cell.density_y = j.at("density_y").get<std::vector<double>>();
  cell.bandwidth = j.at("bandwidth").get<double>();
}

inline void to_json(nlohmann::json& j, const DistributionSketch& sketch) {
  auto opt = [](const std::optional<CellSketch>& c) {
    return c ? nlohmann::json(*c) : nlohmann::json();
  };
  j = {{"subgroup", sketch.subgroup_id},
       {"bg_neg", opt(sketch.bg_neg)},
       {"bg_pos", opt(sketch.bg_pos)},
       {"sg_neg", opt(sketch.sg_neg)},
       {"sg_pos", opt(sketch.sg_pos)}};
}

// Small two-panel density plot in the style of the score-distribution
// comparisons: background on top, subgroup below, negatives green and
// positives purple.
inline std::string render_sketch_svg(const DistributionSketch& sketch) {
  const int width = 480, panel_h = 120, pad = 36;
  const int height = 2 * panel_h + 3 * pad;
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height << "\" font-family=\"sans-serif\" font-size=\"11\">\n"
      << "<rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";

  double max_density = 1e-12;
  for (const auto* cell : {&sketch.bg_neg, &sketch.bg_pos, &sketch.sg_neg, &sketch.sg_pos}) {
    if (!*cell) continue;
    for (const double y : (*cell)->density_y) max_density = std::max(max_density, y);
  }

  auto draw = [&](const std::optional<CellSketch>& cell, int top, const char* color) {
    if (!cell) return;
    out << "<path fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" d=\"";
    for (std::size_t i = 0; i < cell->density_x.size(); ++i) {
      const double x = pad + cell->density_x[i] * (width - 2 * pad);
      const double y = top + panel_h - (cell->density_y[i] / max_density) * panel_h;
      out << (i == 0 ? 'M' : 'L') << x << ' ' << y << ' ';
    }
    out << "\"/>\n";
  };

  out << "<text x=\"" << pad << "\" y=\"" << pad - 10 << "\">background</text>\n";
  draw(sketch.bg_neg, pad, "#2e7d32");
  draw(sketch.bg_pos, pad, "#6a1b9a");
  out << "<text x=\"" << pad << "\" y=\"" << panel_h + 2 * pad - 10 << "\">"
      << detail::xml_escape(sketch.subgroup_id) << "</text>\n";
  draw(sketch.sg_neg, panel_h + 2 * pad, "#2e7d32");
  draw(sketch.sg_pos, panel_h + 2 * pad, "#6a1b9a");
  out << "</svg>\n";
  return out.str();
}

}  // namespace biaseval
