// aggrisk: command-line front end for the aggregate risk analysis engine.
//
// Subcommands: generate (synthetic datasets), query (ad hoc SQL-like
// queries), step (weighted single-event blends), bench (scaling harness).
//
// Exit codes: 0 success, 2 usage/config error, 3 query parse/semantic error,
// 4 data error.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "aggrisk/analytics.hpp"
#include "aggrisk/dataset_io.hpp"
#include "aggrisk/engine.hpp"
#include "aggrisk/errors.hpp"
#include "aggrisk/generator.hpp"
#include "aggrisk/query.hpp"
#include "aggrisk/text.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitQuery = 3;
constexpr int kExitData = 4;

using Clock = std::chrono::steady_clock;

struct GenerateArgs {
  std::string out;
  aggrisk::GeneratorConfig cfg;
  std::string regions_csv;
  std::string perils_csv;
};

struct QueryArgs {
  std::string data;
  std::string sql;
  std::string query_file;
  unsigned workers = std::max(1u, std::thread::hardware_concurrency());
  std::size_t job_size = 200;
  bool oracle = false;
  std::string out;
  std::string dump_yelt;
};

struct StepArgs {
  std::string data;
  std::string events;  // "id:weight,id:weight"
  std::uint32_t trials = 1;
  std::uint64_t seed = 1;
  std::string sql = "SELECT STATS FROM PORTFOLIO";
  unsigned workers = std::max(1u, std::thread::hardware_concurrency());
  std::size_t job_size = 200;
  std::string out;
};

struct BenchArgs {
  std::string data;
  std::string workers_list = "1";
  std::string layers_list;
  std::uint32_t trials = 10000;
  std::uint32_t events = 100;
  std::uint32_t elts_per_layer = 5;
  std::uint32_t catalogue = 100;
  std::uint64_t seed = 1;
  std::size_t job_size = 200;
  unsigned repeats = 3;
  std::string sql = "SELECT MEAN FROM PORTFOLIO";
  std::string out = "bench.csv";
};

std::vector<std::string> split_tokens(const std::string& csv) {
  std::vector<std::string> out;
  for (std::string_view part : aggrisk::split(csv, ',')) {
    if (!part.empty()) out.emplace_back(part);
  }
  return out;
}

int run_generate(const GenerateArgs& args) {
  aggrisk::GeneratorConfig cfg = args.cfg;
  if (!args.regions_csv.empty()) cfg.regions = split_tokens(args.regions_csv);
  if (!args.perils_csv.empty()) cfg.perils = split_tokens(args.perils_csv);
  const aggrisk::Dataset ds = aggrisk::generate_dataset(cfg);
  aggrisk::write_dataset(ds, args.out);
  std::cout << "wrote dataset to " << args.out << " (" << ds.yet.size() << " YET rows, "
            << ds.layers.size() << " layers, " << ds.elt_pool.size() << " ELTs)\n";
  return kExitOk;
}

// Parses + compiles, printing caret diagnostics to stderr on failure.
std::optional<aggrisk::QueryPlan> make_plan(const std::string& sql, const aggrisk::Dataset& ds) {
  const aggrisk::ParseResult parsed = aggrisk::parse_query(sql);
  if (!parsed.ok()) {
    std::cerr << parsed.error->render(sql);
    return std::nullopt;
  }
  aggrisk::CompileResult compiled = aggrisk::compile_query(*parsed.query, ds);
  if (!compiled.ok()) {
    std::cerr << compiled.error->render(sql);
    return std::nullopt;
  }
  return std::move(compiled.plan);
}

void emit_report(const aggrisk::LossReport& report, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << aggrisk::report_to_csv(report);
  } else {
    aggrisk::write_report_csv(out_path, report);
  }
}

// report.csv -> report.m_3_4.csv / report.m_3_4.delta.csv
std::string subset_path(const std::string& base, const std::vector<aggrisk::LayerId>& subset,
                        bool delta) {
  std::filesystem::path p(base);
  std::string stem = p.stem().string();
  if (!subset.empty()) {
    stem += ".m";
    for (aggrisk::LayerId id : subset) stem += "_" + std::to_string(id);
  }
  if (delta) stem += ".delta";
  return (p.parent_path() / (stem + p.extension().string())).string();
}

int run_query_cmd(const QueryArgs& args) {
  std::string sql = args.sql;
  if (sql.empty() && !args.query_file.empty()) {
    std::ifstream in(args.query_file, std::ios::binary);
    if (!in) {
      throw aggrisk::DataError(aggrisk::DataError::Kind::MissingFile, args.query_file, 0,
                               "query file not found");
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    sql = buf.str();
  }

  const aggrisk::Dataset ds = aggrisk::load_dataset(args.data);
  const auto plan = make_plan(sql, ds);
  if (!plan) return kExitQuery;

  aggrisk::ExecConfig cfg;
  cfg.workers = args.workers;
  cfg.job_size = args.job_size;
  cfg.dump_yelt_path = args.dump_yelt;

  if (!plan->query.marginal.empty()) {
    if (args.out.empty()) {
      std::cerr << "error: marginal queries write one file per subset; --out is required\n";
      return kExitUsage;
    }
    const auto results = aggrisk::run_marginal(*plan, ds, cfg);
    for (const aggrisk::MarginalResult& result : results) {
      aggrisk::write_report_csv(subset_path(args.out, result.subset, false), result.report);
      if (!result.subset.empty()) {
        aggrisk::write_report_csv(subset_path(args.out, result.subset, true), result.difference);
      }
    }
    std::cout << "wrote " << results.size() << " subset reports next to " << args.out << "\n";
    return kExitOk;
  }

  const aggrisk::LossReport report =
      args.oracle ? aggrisk::sequential_oracle(*plan, ds) : aggrisk::run_query(*plan, ds, cfg);
  emit_report(report, args.out);
  return kExitOk;
}

int run_step(const StepArgs& args) {
  aggrisk::StepSpec spec;
  spec.num_trials = args.trials;
  for (std::string_view part : aggrisk::split(args.events, ',')) {
    if (part.empty()) continue;
    const auto fields = aggrisk::split(part, ':');
    std::uint32_t id = 0;
    double weight = 0.0;
    if (fields.size() != 2 || !aggrisk::parse_u32(fields[0], id) ||
        !aggrisk::parse_double(fields[1], weight)) {
      std::cerr << "error: --events expects 'id:weight[,id:weight...]', got '" << part << "'\n";
      return kExitUsage;
    }
    spec.weighted_events.push_back({id, weight});
  }
  if (spec.weighted_events.empty()) {
    std::cerr << "error: --events must name at least one event\n";
    return kExitUsage;
  }

  aggrisk::Dataset ds = aggrisk::load_dataset(args.data);
  for (const aggrisk::StepEvent& e : spec.weighted_events) {
    if (ds.find_event(e.event_id) == nullptr) {
      throw aggrisk::DataError(aggrisk::DataError::Kind::InvariantViolation, "events.csv", 0,
                               "STEP event " + std::to_string(e.event_id) +
                                   " not present in the event catalogue");
    }
  }

  ds.yet = aggrisk::build_step_yet(spec, args.seed);
  std::ostringstream manifest;
  manifest << ds.manifest << "step_events=" << args.events << "\n"
           << "step_trials=" << args.trials << "\n"
           << "step_seed=" << args.seed << "\n";
  ds.manifest = manifest.str();
  ds.rebuild_index();

  const auto plan = make_plan(args.sql, ds);
  if (!plan) return kExitQuery;

  aggrisk::ExecConfig cfg;
  cfg.workers = args.workers;
  cfg.job_size = args.job_size;
  emit_report(aggrisk::run_query(*plan, ds, cfg), args.out);
  return kExitOk;
}

double median_of(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  return values[(values.size() - 1) / 2];
}

int run_bench(const BenchArgs& args) {
  std::vector<unsigned> workers;
  for (std::string_view part : aggrisk::split(args.workers_list, ',')) {
    std::uint32_t w = 0;
    if (!aggrisk::parse_u32(part, w) || w == 0) {
      std::cerr << "error: --workers-list expects positive integers\n";
      return kExitUsage;
    }
    workers.push_back(w);
  }

  std::vector<std::uint32_t> layer_counts;
  if (!args.layers_list.empty()) {
    for (std::string_view part : aggrisk::split(args.layers_list, ',')) {
      std::uint32_t n = 0;
      if (!aggrisk::parse_u32(part, n) || n == 0) {
        std::cerr << "error: --layers-list expects positive integers\n";
        return kExitUsage;
      }
      layer_counts.push_back(n);
    }
  }
  if (!args.data.empty() && !layer_counts.empty()) {
    std::cerr << "error: --layers-list only applies to generated workloads, not --data\n";
    return kExitUsage;
  }
  if (args.data.empty() && layer_counts.empty()) layer_counts.push_back(400);
  if (args.repeats == 0) {
    std::cerr << "error: --repeats must be >= 1\n";
    return kExitUsage;
  }

  std::string csv = "trials,events,layers,elts,workers,job_size,phase,seconds\n";
  const char* phases[] = {"setup", "map_combine", "reduce", "report"};

  auto bench_dataset = [&](const aggrisk::Dataset& ds, std::uint32_t layers) -> int {
    const auto plan = make_plan(args.sql, ds);
    if (!plan) return kExitQuery;
    for (unsigned w : workers) {
      std::vector<double> samples[4];
      for (unsigned rep = 0; rep < args.repeats; ++rep) {
        aggrisk::ExecConfig cfg;
        cfg.workers = w;
        cfg.job_size = args.job_size;
        aggrisk::PhaseTimings timings;
        const aggrisk::LossReport report = aggrisk::run_query(*plan, ds, cfg, &timings);
        const auto report_start = Clock::now();
        const std::string rendered = aggrisk::report_to_csv(report);
        const double report_s = std::chrono::duration<double>(Clock::now() - report_start).count();
        samples[0].push_back(timings.setup);
        samples[1].push_back(timings.map_combine);
        samples[2].push_back(timings.reduce);
        samples[3].push_back(report_s);
        (void)rendered;
      }
      for (int ph = 0; ph < 4; ++ph) {
        csv += std::to_string(ds.num_trials());
        csv += ',';
        csv += std::to_string(ds.num_trials() ? ds.yet.size() / ds.num_trials() : 0);
        csv += ',';
        csv += std::to_string(layers);
        csv += ',';
        csv += std::to_string(ds.elt_pool.size());
        csv += ',';
        csv += std::to_string(w);
        csv += ',';
        csv += std::to_string(args.job_size);
        csv += ',';
        csv += phases[ph];
        csv += ',';
        csv += aggrisk::format_double(median_of(samples[ph]));
        csv += '\n';
      }
    }
    return kExitOk;
  };

  if (!args.data.empty()) {
    const aggrisk::Dataset ds = aggrisk::load_dataset(args.data);
    const int rc = bench_dataset(ds, static_cast<std::uint32_t>(ds.layers.size()));
    if (rc != kExitOk) return rc;
  } else {
    for (std::uint32_t layers : layer_counts) {
      aggrisk::GeneratorConfig cfg;
      cfg.seed = args.seed;
      cfg.num_trials = args.trials;
      cfg.events_per_trial = args.events;
      cfg.num_layers = layers;
      cfg.elts_per_layer = args.elts_per_layer;
      cfg.catalogue_size = args.catalogue;
      const aggrisk::Dataset ds = aggrisk::generate_dataset(cfg);
      const int rc = bench_dataset(ds, layers);
      if (rc != kExitOk) return rc;
    }
  }

  std::ofstream out(args.out, std::ios::binary);
  if (!out) {
    throw aggrisk::DataError(aggrisk::DataError::Kind::MissingFile, args.out, 0,
                             "cannot open for writing");
  }
  out << csv;
  std::cout << "wrote " << args.out << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ad hoc aggregate risk analysis over simulated year event tables"};
  app.require_subcommand(1);

  GenerateArgs gen;
  CLI::App* generate = app.add_subcommand("generate", "Generate a synthetic dataset");
  generate->add_option("--out", gen.out, "Output directory")->required();
  generate->add_option("--trials", gen.cfg.num_trials, "Number of simulation trials")->required();
  generate->add_option("--events", gen.cfg.events_per_trial, "Events per trial")->required();
  generate->add_option("--layers", gen.cfg.num_layers, "Number of layers")->required();
  generate->add_option("--elts-per-layer", gen.cfg.elts_per_layer, "ELTs covered per layer")
      ->required();
  generate->add_option("--seed", gen.cfg.seed, "Generator seed");
  generate->add_option("--catalogue", gen.cfg.catalogue_size, "Event catalogue size");
  generate->add_option("--regions", gen.regions_csv, "Comma-separated region tokens");
  generate->add_option("--perils", gen.perils_csv, "Comma-separated peril tokens");

  QueryArgs query;
  CLI::App* query_cmd = app.add_subcommand("query", "Run an ad hoc query against a dataset");
  query_cmd->add_option("--data", query.data, "Dataset directory")->required();
  auto* sql_opt = query_cmd->add_option("--sql", query.sql, "Query text");
  query_cmd->add_option("--query", query.query_file, "File containing the query text")
      ->excludes(sql_opt);
  query_cmd->add_option("--workers", query.workers, "Worker thread count");
  query_cmd->add_option("--job-size", query.job_size, "Layers per job");
  query_cmd->add_flag("--oracle", query.oracle, "Use the sequential reference implementation");
  query_cmd->add_option("--out", query.out, "Report file (stdout when absent)");
  query_cmd->add_option("--dump-yelt", query.dump_yelt, "Debug: write the intermediate YELT here");

  StepArgs step;
  CLI::App* step_cmd = app.add_subcommand("step", "Weighted single-event (STEP) analysis");
  step_cmd->add_option("--data", step.data, "Dataset directory")->required();
  step_cmd->add_option("--events", step.events, "Weighted events, 'id:weight[,id:weight...]'")
      ->required();
  step_cmd->add_option("--trials", step.trials, "Number of STEP trials")->required();
  step_cmd->add_option("--seed", step.seed, "STEP sampling seed");
  step_cmd->add_option("--sql", step.sql, "Query to run (default: SELECT STATS FROM PORTFOLIO)");
  step_cmd->add_option("--workers", step.workers, "Worker thread count");
  step_cmd->add_option("--job-size", step.job_size, "Layers per job");
  step_cmd->add_option("--out", step.out, "Report file (stdout when absent)");

  BenchArgs bench;
  CLI::App* bench_cmd = app.add_subcommand("bench", "Scaling benchmark harness");
  bench_cmd->add_option("--data", bench.data, "Existing dataset directory (else generated)");
  bench_cmd->add_option("--workers-list", bench.workers_list, "Comma-separated worker counts");
  bench_cmd->add_option("--layers-list", bench.layers_list,
                        "Comma-separated layer counts for generated workloads");
  bench_cmd->add_option("--trials", bench.trials, "Trials per generated workload");
  bench_cmd->add_option("--events", bench.events, "Events per trial");
  bench_cmd->add_option("--elts-per-layer", bench.elts_per_layer, "ELTs per layer");
  bench_cmd->add_option("--catalogue", bench.catalogue, "Event catalogue size");
  bench_cmd->add_option("--seed", bench.seed, "Generator seed");
  bench_cmd->add_option("--job-size", bench.job_size, "Layers per job");
  bench_cmd->add_option("--repeats", bench.repeats, "Runs per configuration (median reported)");
  bench_cmd->add_option("--sql", bench.sql, "Query to benchmark");
  bench_cmd->add_option("--out", bench.out, "Benchmark CSV path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (generate->parsed()) return run_generate(gen);
    if (query_cmd->parsed()) {
      if (query.sql.empty() && query.query_file.empty()) {
        std::cerr << "error: one of --sql or --query is required\n";
        return kExitUsage;
      }
      if (query.oracle && !query.dump_yelt.empty()) {
        std::cerr << "error: --dump-yelt requires the parallel engine, not --oracle\n";
        return kExitUsage;
      }
      return run_query_cmd(query);
    }
    if (step_cmd->parsed()) return run_step(step);
    if (bench_cmd->parsed()) return run_bench(bench);
  } catch (const aggrisk::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const aggrisk::DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const aggrisk::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
