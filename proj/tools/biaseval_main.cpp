// biaseval: threshold-agnostic unintended-bias metrics over scored,
// subgroup-tagged datasets; plus a scenario simulator, a generic scoring
// client and report rendering.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "biaseval/errors.hpp"
#include "biaseval/metrics.hpp"
#include "biaseval/report.hpp"
#include "biaseval/scenario.hpp"
#include "biaseval/scorer.hpp"
#include "biaseval/table_io.hpp"
#include "biaseval/templates.hpp"

namespace fs = std::filesystem;
using namespace biaseval;

namespace {

constexpr const char* kVersion = "0.1.0";

void write_text_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path.string(), "cannot open output file");
  out << content;
  out.flush();
  if (!out) throw IoError(path.string(), "write failed");
}

struct SimulateArgs {
  std::string scenario = "B";
  std::uint64_t seed = 42;
  std::uint64_t scale = 1000;
  std::string out;
  std::string spec_path;
  std::string schema_out;
};

int run_simulate(const SimulateArgs& args) {
  ScenarioSpec spec;
  if (!args.spec_path.empty()) {
    std::ifstream in(args.spec_path);
    if (!in) throw IoError(args.spec_path, "cannot open scenario spec");
    nlohmann::json j;
    in >> j;
    spec = j.get<ScenarioSpec>();
  } else {
    spec = preset(parse_scenario_id(args.scenario));
  }
  const auto data = sample_scenario(scaled(spec, args.scale), args.seed);
  const TableSchema schema = write_scored(args.out, data);
  if (!args.schema_out.empty()) {
    const nlohmann::json j = schema;
    write_text_file(args.schema_out, j.dump(2) + "\n");
  }
  std::fprintf(stderr, "simulate: wrote %zu examples to %s\n", data.size(),
               args.out.c_str());
  return 0;
}

struct EvaluateArgs {
  std::string input;
  std::string schema_path;
  std::optional<std::uint32_t> max_chars;
  std::uint64_t min_count = 0;
  std::string sort_metric = "subgroup_auc";
  std::string model_name = "model";
  std::vector<std::string> extra_scores;  // NAME=PATH
  std::vector<std::string> subgroups;
  std::string dataset_id;
  std::string out;
  unsigned threads = 0;
};

ScoreSet load_score_file(const std::string& name, const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string(), "cannot open score file");
  CsvReader reader(in);
  std::vector<std::string> fields;
  if (!reader.next(fields) || fields.size() < 2 || fields[0] != "id" || fields[1] != "score") {
    throw MissingColumn("id/score");
  }
  ScoreSet set;
  set.name = name;
  while (reader.next(fields)) {
    if (fields.size() == 1 && fields[0].empty()) continue;
    if (fields.size() < 2) {
      throw IoError(path.string(),
                    "bad score row at line " + std::to_string(reader.record_line()));
    }
    const auto value = detail::parse_number(std::string_view(fields[1]));
    if (!value || !std::isfinite(*value)) {
      throw NonFiniteScore("score for id '" + fields[0] + "' in " + path.string());
    }
    set.by_id[fields[0]] = *value;
  }
  return set;
}

int run_evaluate(const EvaluateArgs& args) {
  const TableSchema schema = load_schema(args.schema_path);

  std::vector<LabeledExample> dataset;
  std::size_t skip_printed = 0;
  const ReadStats stats = read_table(
      args.input, schema,
      [&dataset](LabeledExample&& ex) {
        ex.text.clear();
        ex.text.shrink_to_fit();  // lengths are kept; raw text is not needed
        dataset.push_back(std::move(ex));
      },
      [&skip_printed](std::size_t line, const std::string& reason) {
        if (skip_printed < 10) {
          std::fprintf(stderr, "evaluate: skipped line %zu: %s\n", line, reason.c_str());
          ++skip_printed;
        }
      });
  if (stats.skipped > 0) {
    std::fprintf(stderr, "evaluate: skipped %zu malformed rows of %zu\n", stats.skipped,
                 stats.rows + stats.skipped);
  }

  std::vector<ScoreSet> models;
  if (schema.score_column) {
    ScoreSet embedded;
    embedded.name = args.model_name;
    for (const auto& ex : dataset) {
      embedded.by_id[ex.id] = *ex.score;
    }
    models.push_back(std::move(embedded));
  }
  for (const auto& spec : args.extra_scores) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == spec.size()) {
      throw InvalidSpec("--scores expects NAME=PATH, got '" + spec + "'");
    }
    models.push_back(load_score_file(spec.substr(0, eq), spec.substr(eq + 1)));
  }
  if (models.empty()) {
    throw InvalidSpec("no model scores: schema has no score_column and no --scores given");
  }
  if (models.size() > 2) throw InvalidSpec("at most two models per report");

  SliceFilter filter;
  filter.max_chars = args.max_chars;
  filter.min_subgroup_count = args.min_count;

  ReportOptions options;
  options.sort_metric = args.sort_metric;
  options.threads = args.threads;
  options.dataset_id = args.dataset_id.empty() ? fs::path(args.input).filename().string()
                                               : args.dataset_id;

  const EvalReport report = build_report(dataset, args.subgroups, filter, models, options);
  write_text_file(args.out, render(report, RenderFormat::kJson));
  std::fprintf(stderr, "evaluate: %zu subgroups x %zu model(s) -> %s\n",
               report.subgroups.size(), report.models.size(), args.out.c_str());
  return 0;
}

struct ScoreArgs {
  std::string input;
  std::string scorer_config;
  std::string out;
  std::string id_column = "id";
  std::string text_column = "text";
};

int run_score(const ScoreArgs& args) {
  const ScorerConfig cfg = load_scorer_config(args.scorer_config);

  std::ifstream in(args.input, std::ios::binary);
  if (!in) throw IoError(args.input, "cannot open input file");
  CsvReader reader(in);
  std::vector<std::string> header;
  if (!reader.next(header)) throw MissingColumn(args.id_column);
  std::size_t id_idx = header.size(), text_idx = header.size();
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == args.id_column) id_idx = i;
    if (header[i] == args.text_column) text_idx = i;
  }
  if (id_idx == header.size()) throw MissingColumn(args.id_column);
  if (text_idx == header.size()) throw MissingColumn(args.text_column);

  std::vector<std::pair<std::string, std::string>> texts;
  std::vector<std::string> fields;
  while (reader.next(fields)) {
    if (fields.size() == 1 && fields[0].empty()) continue;
    if (fields.size() != header.size() || fields[id_idx].empty()) {
      throw IoError(args.input, "bad row at line " + std::to_string(reader.record_line()));
    }
    texts.emplace_back(fields[id_idx], fields[text_idx]);
  }

  const ScoreBatchResult result = score_batch(texts, cfg);

  std::ofstream out(args.out, std::ios::binary);
  if (!out) throw IoError(args.out, "cannot open output file");
  CsvWriter writer(out);
  std::vector<std::string> row = {"id", "score"};
  writer.write_row(row);
  for (const auto& [id, score] : result.scores) {
    row[0] = id;
    row[1] = detail::format_double(score);
    writer.write_row(row);
  }
  out.flush();

  std::fprintf(stderr, "score: %zu scored (%zu from cache, %zu requests), %zu failed\n",
               result.scores.size(), result.cache_hits, result.network_calls,
               result.failures.size());
  for (std::size_t i = 0; i < result.failures.size() && i < 10; ++i) {
    std::fprintf(stderr, "score: %s: %s\n", result.failures[i].first.c_str(),
                 result.failures[i].second.c_str());
  }
  return result.failures.empty() ? 0 : 1;
}

struct ReportArgs {
  std::string input;
  std::string format = "json";
  std::string out;
};

int run_report(const ReportArgs& args) {
  std::ifstream in(args.input);
  if (!in) throw IoError(args.input, "cannot open report file");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(args.input, std::string("invalid report JSON: ") + e.what());
  }
  const auto report = j.get<EvalReport>();
  write_text_file(args.out, render(report, parse_render_format(args.format)));
  return 0;
}

// ---- calibrate ----------------------------------------------------------

struct ScenarioTargets {
  double subgroup, bpsn, bnsp, neg_aeg, pos_aeg;
};

// Published per-scenario metric values the presets are tuned against.
ScenarioTargets targets(ScenarioId id) {
  switch (id) {
    case ScenarioId::A: return {1.0, 0.99, 1.0, 0.42, 0.42};
    case ScenarioId::B: return {1.0, 0.76, 1.0, 0.5, 0.5};
    case ScenarioId::C: return {1.0, 0.76, 1.0, 0.5, 0.5};
    case ScenarioId::D: return {1.0, 1.0, 0.77, -0.5, -0.5};
    case ScenarioId::E: return {0.93, 0.99, 0.99, 0.48, -0.48};
    case ScenarioId::F: return {1.0, 1.0, 1.0, 0.02, -0.02};
    case ScenarioId::G: return {0.92, 0.98, 0.97, 0.03, -0.03};
  }
  return {};
}

// Subgroup AUC and the shift AUCs carry more weight: they are the tightly
// bounded targets, while the small published AEG values for the wide-range
// scenarios are mostly truncation noise.
double target_badness(const BiasMetricsRow& row, const ScenarioTargets& t) {
  auto sq = [](double d) { return d * d; };
  return 4.0 * sq(*row.subgroup_auc - t.subgroup) + 2.0 * sq(*row.bpsn_auc - t.bpsn) +
         2.0 * sq(*row.bnsp_auc - t.bnsp) + sq(*row.negative_aeg - t.neg_aeg) +
         sq(*row.positive_aeg - t.pos_aeg);
}

BiasMetricsRow eval_spec(const ScenarioSpec& spec, std::uint64_t seed, std::uint64_t scale) {
  const auto data = sample_scenario(scaled(spec, scale), seed);
  return bias_suite(partition(data, kSyntheticSubgroup));
}

void print_row(const char* tag, const BiasMetricsRow& row) {
  std::printf("%-18s subgroup=%.4f bpsn=%.4f bnsp=%.4f negAEG=%+.4f posAEG=%+.4f\n", tag,
              *row.subgroup_auc, *row.bpsn_auc, *row.bnsp_auc, *row.negative_aeg,
              *row.positive_aeg);
}

struct CalibrateArgs {
  std::uint64_t scale = 100000;
  std::uint64_t seed = 20240401;
  bool search = false;
};

// Re-derives the preset parameters with the coarse grid search that pinned
// them, then reports achieved metrics against the published targets.
int run_calibrate(const CalibrateArgs& args) {
  std::printf("calibration at scale %llu per count unit, seed %llu\n",
              static_cast<unsigned long long>(args.scale),
              static_cast<unsigned long long>(args.seed));

  for (int i = 0; i < 7; ++i) {
    const auto id = static_cast<ScenarioId>(i);
    const ScenarioSpec frozen = preset(id);
    const ScenarioTargets t = targets(id);
    std::printf("\nscenario %s\n", to_string(id));
    std::printf("  frozen params: sg_neg(mean=%.3f sd=%.3f [%.3f,%.3f]) "
                "sg_pos(mean=%.3f sd=%.3f [%.3f,%.3f])\n",
                frozen.sg_neg.mean, frozen.sg_neg.stddev, frozen.sg_neg.lower,
                frozen.sg_neg.upper, frozen.sg_pos.mean, frozen.sg_pos.stddev,
                frozen.sg_pos.lower, frozen.sg_pos.upper);
    std::printf("  targets:           subgroup=%.2f bpsn=%.2f bnsp=%.2f negAEG=%+.2f "
                "posAEG=%+.2f\n",
                t.subgroup, t.bpsn, t.bnsp, t.neg_aeg, t.pos_aeg);
    print_row("  frozen achieves:", eval_spec(frozen, args.seed, args.scale));

    if (!args.search) continue;
    switch (id) {
      case ScenarioId::A: {
        // One knob: the common subgroup right shift.
        double best = 0.0, best_badness = 1e9;
        for (double shift = 0.09; shift <= 0.151; shift += 0.01) {
          ScenarioSpec s = frozen;
          s.sg_neg.mean = s.bg_neg.mean + shift;
          s.sg_pos.mean = s.bg_pos.mean + shift;
          const double badness = target_badness(eval_spec(s, args.seed, args.scale), t);
          if (badness < best_badness) {
            best_badness = badness;
            best = shift;
          }
        }
        std::printf("  search: best shift %.3f (frozen uses %.3f)\n", best,
                    frozen.sg_neg.mean - frozen.bg_neg.mean);
        break;
      }
      case ScenarioId::B: {
        // One knob: sg_neg mean, which sets the BPSN overlap.
        double best = 0.0, best_badness = 1e9;
        for (double mean = 0.66; mean <= 0.721; mean += 0.01) {
          ScenarioSpec s = frozen;
          s.sg_neg.mean = mean;
          const double badness = target_badness(eval_spec(s, args.seed, args.scale), t);
          if (badness < best_badness) {
            best_badness = badness;
            best = mean;
          }
        }
        std::printf("  search: best sg_neg mean %.3f (frozen uses %.3f)\n", best,
                    frozen.sg_neg.mean);
        break;
      }
      case ScenarioId::C:
      case ScenarioId::D:
        std::printf("  search: derived from scenario B (count skew / mirror image)\n");
        break;
      case ScenarioId::E: {
        // Two knobs: symmetric shift toward the middle and subgroup width.
        double best_shift = 0.0, best_sd = 0.0, best_badness = 1e9;
        for (double sd = 0.055; sd <= 0.0751; sd += 0.005) {
          for (double shift = 0.16; shift <= 0.201; shift += 0.01) {
            ScenarioSpec s = frozen;
            s.sg_neg = {s.bg_neg.mean + shift, sd, 0.0, 1.0};
            s.sg_pos = {s.bg_pos.mean - shift, sd, 0.0, 1.0};
            const double badness = target_badness(eval_spec(s, args.seed, args.scale), t);
            if (badness < best_badness) {
              best_badness = badness;
              best_shift = shift;
              best_sd = sd;
            }
          }
        }
        std::printf("  search: best shift %.3f sd %.3f (frozen uses %.3f / %.3f)\n",
                    best_shift, best_sd, frozen.sg_neg.mean - frozen.bg_neg.mean,
                    frozen.sg_neg.stddev);
        break;
      }
      case ScenarioId::F:
      case ScenarioId::G: {
        // One knob: the subgroup width.
        double best = 0.0, best_badness = 1e9;
        const double lo = id == ScenarioId::F ? 0.12 : 0.20;
        const double hi = id == ScenarioId::F ? 0.18 : 0.26;
        for (double sd = lo; sd <= hi + 1e-9; sd += 0.01) {
          ScenarioSpec s = frozen;
          s.sg_neg.stddev = sd;
          s.sg_pos.stddev = sd;
          const double badness = target_badness(eval_spec(s, args.seed, args.scale), t);
          if (badness < best_badness) {
            best_badness = badness;
            best = sd;
          }
        }
        std::printf("  search: best subgroup sd %.3f (frozen uses %.3f)\n", best,
                    frozen.sg_neg.stddev);
        break;
      }
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Threshold-agnostic unintended-bias metrics over scored datasets"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand

  unsigned threads = 0;
  app.add_option("--threads", threads, "Worker thread cap (0 = hardware concurrency)");

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Sample a synthetic bias scenario");
  simulate->add_option("--scenario", sim.scenario, "Scenario id A..G")
      ->default_str(sim.scenario);
  simulate->add_option("--spec", sim.spec_path, "Scenario spec JSON (overrides --scenario)")
      ->check(CLI::ExistingFile);
  simulate->add_option("--seed", sim.seed, "PRNG seed")->default_str("42");
  simulate->add_option("--scale", sim.scale, "Count multiplier")->default_str("1000");
  simulate->add_option("--out", sim.out, "Output CSV path")->required();
  simulate->add_option("--schema-out", sim.schema_out, "Write matching schema JSON here");

  EvaluateArgs eval;
  auto* evaluate = app.add_subcommand("evaluate", "Compute the per-subgroup metric suite");
  evaluate->add_option("--input", eval.input, "Labeled dataset (.csv or .jsonl)")
      ->required()
      ->check(CLI::ExistingFile);
  evaluate->add_option("--schema", eval.schema_path, "Schema JSON")
      ->required()
      ->check(CLI::ExistingFile);
  evaluate->add_option("--max-chars", eval.max_chars,
                       "Keep only examples strictly shorter than this");
  evaluate->add_option("--min-count", eval.min_count,
                       "Minimum in-slice subgroup example count");
  evaluate->add_option("--sort-metric", eval.sort_metric, "Worst-first ordering key")
      ->default_str(eval.sort_metric);
  evaluate->add_option("--model-name", eval.model_name,
                       "Name for the score column of the input");
  evaluate->add_option("--scores", eval.extra_scores,
                       "Extra model scores as NAME=PATH (csv with id,score)");
  evaluate->add_option("--subgroup", eval.subgroups,
                       "Restrict to these subgroups (default: all observed)");
  evaluate->add_option("--dataset-id", eval.dataset_id, "Dataset label for the report");
  evaluate->add_option("--out", eval.out, "Output report JSON path")->required();

  ScoreArgs score;
  auto* score_cmd = app.add_subcommand("score", "Score texts against an HTTP endpoint");
  score_cmd->add_option("--input", score.input, "CSV with id,text columns")
      ->required()
      ->check(CLI::ExistingFile);
  score_cmd->add_option("--scorer", score.scorer_config, "Scorer config JSON")
      ->required()
      ->check(CLI::ExistingFile);
  score_cmd->add_option("--out", score.out, "Output CSV (id,score)")->required();
  score_cmd->add_option("--id-column", score.id_column, "Input id column name");
  score_cmd->add_option("--text-column", score.text_column, "Input text column name");

  ReportArgs rep;
  auto* report_cmd = app.add_subcommand("report", "Render a report JSON to another format");
  report_cmd->add_option("--input", rep.input, "EvalReport JSON")
      ->required()
      ->check(CLI::ExistingFile);
  report_cmd->add_option("--format", rep.format, "csv | markdown | json | svg-heatmap")
      ->default_str(rep.format);
  report_cmd->add_option("--out", rep.out, "Output path")->required();

  CalibrateArgs cal;
  auto* calibrate = app.add_subcommand("calibrate",
                                       "Check scenario presets against their targets");
  calibrate->add_option("--scale", cal.scale, "Draws per count unit")->default_str("100000");
  calibrate->add_option("--seed", cal.seed, "PRNG seed")->default_str("20240401");
  calibrate->add_flag("--search", cal.search, "Re-run the coarse parameter grid search");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  eval.threads = threads;
  try {
    if (simulate->parsed()) return run_simulate(sim);
    if (evaluate->parsed()) return run_evaluate(eval);
    if (score_cmd->parsed()) return run_score(score);
    if (report_cmd->parsed()) return run_report(rep);
    if (calibrate->parsed()) return run_calibrate(cal);
  } catch (const Error& e) {
    std::fprintf(stderr, "biaseval: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "biaseval: unexpected error: %s\n", e.what());
    return 1;
  }
  return 2;
}
