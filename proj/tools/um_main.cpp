#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <iomanip>
#include <iostream>
#include <string>
#include <vector>

#include "um/errors.hpp"
#include "um/evaluation.hpp"
#include "um/inference.hpp"
#include "um/masking.hpp"
#include "um/neural.hpp"
#include "um/program.hpp"
#include "um/serialize.hpp"
#include "um/training.hpp"

namespace {

using namespace um;

int env_threads() {
  const char* raw = std::getenv("UM_THREADS");
  if (raw == nullptr) return 1;
  char* end = nullptr;
  const long n = std::strtol(raw, &end, 10);
  if (end == raw || *end != '\0' || n < 1)
    throw ValidationError("UM_THREADS must be a positive integer");
  return static_cast<int>(n);
}

struct GenGraphArgs {
  std::string family;
  int n = 0;
  std::uint64_t seed = 0;
  std::string out;
};

void run_gen_graph(const GenGraphArgs& args) {
  ProgramSpec program;
  if (args.family == "probprog") {
    program = builtin_probprog();
  } else if (args.n < 2) {
    throw ValidationError("graph family '" + args.family +
                          "' needs a node count >= 2");
  } else if (args.family == "chain") {
    program = make_chain(args.n, args.seed);
  } else if (args.family == "star") {
    program = make_star(args.n, args.seed);
  } else {  // grid
    int side = 1;
    while (side * side < args.n) ++side;
    if (side * side != args.n)
      throw ValidationError("grid node count must be a perfect square");
    program = make_grid(side, side, args.seed);
  }

  std::string out = args.out;
  if (out.empty()) out = program.name + ".json";
  save_program(out, program);
  std::cout << "wrote " << program.name << " (" << program.n_sites()
            << " sites) to " << out << "\n";
}

struct TrainArgs {
  std::string program_path;
  int preset = 0;
  int hidden = 0;
  int width = 0;
  std::string activation = "relu";
  double dropout = 0.0;
  std::string mode = "standard";
  int iters = 5000;
  int batch = 512;
  std::uint64_t seed = 0;
  std::int64_t stats_samples = 100000;
  std::string out = "checkpoint.json";
  std::string loss_csv;
};

void run_train(const TrainArgs& args) {
  const ProgramSpec program = load_program(args.program_path);
  Architecture arch;
  if (args.hidden > 0 || args.width > 0) {
    if (args.preset > 0)
      throw ValidationError("give either --preset or --hidden/--width");
    if (args.hidden < 1 || args.width < 1)
      throw ValidationError("--hidden and --width must both be >= 1");
    arch.hidden_layers = args.hidden;
    arch.hidden_width = args.width;
  } else {
    arch = preset_architecture(args.preset > 0 ? args.preset : 1);
  }
  arch.activation = activation_from_string(args.activation);
  arch.dropout_p = args.dropout;
  const TrainMode mode = mode_from_string(args.mode);

  const RandomStream root(args.seed);
  RandomStream stats_rng = root.derive("cli/stats");
  const EncodingLayout layout = make_layout(program);
  const PriorStats stats =
      compute_prior_stats(program, args.stats_samples, stats_rng);

  RandomStream build_rng = root.derive("cli/build");
  UmModel model = build_um(program, arch, mode, layout, stats, build_rng);

  TrainConfig config;
  config.batch_size = args.batch;
  config.iterations = args.iters;
  config.mode = mode;
  config.seed = root.derive("cli/train").key();
  config.loss_log_every = std::max(1, args.iters / 100);
  const TrainReport report = train(model, program, config);

  save_checkpoint(args.out, Checkpoint{program, std::move(model)});
  if (!args.loss_csv.empty())
    write_text_file(args.loss_csv, train_csv(report, program));

  std::cout << "trained " << program.name << " for " << report.final_step
            << " steps (" << to_string(mode) << ", h="
            << arch.hidden_layers << ", s=" << arch.hidden_width << ")\n";
  std::cout << "final summed loss: "
            << format_double(report.summed_losses.back()) << "\n";
  std::cout << "checkpoint: " << args.out << "\n";
}

void print_marginals(const ProgramSpec& program, const MarginalSet& marginals) {
  std::size_t width = 4;
  for (const auto& [site, probs] : marginals.categorical)
    width = std::max(width, program.sites[site].name.size());
  for (const auto& [site, mean] : marginals.continuous)
    width = std::max(width, program.sites[site].name.size());

  std::cout << std::left << std::setw(static_cast<int>(width) + 2) << "site"
            << "estimate\n";
  for (int i = 0; i < program.n_sites(); ++i) {
    if (auto it = marginals.categorical.find(i);
        it != marginals.categorical.end()) {
      std::cout << std::setw(static_cast<int>(width) + 2)
                << program.sites[i].name;
      for (Eigen::Index k = 0; k < it->second.size(); ++k)
        std::cout << (k > 0 ? " " : "") << format_double(it->second[k]);
      std::cout << "\n";
    } else if (auto jt = marginals.continuous.find(i);
               jt != marginals.continuous.end()) {
      std::cout << std::setw(static_cast<int>(width) + 2)
                << program.sites[i].name << format_double(jt->second) << "\n";
    }
  }
}

struct InferArgs {
  std::string checkpoint_path;
  std::string evidence_path;
  std::string method = "direct";
  std::int64_t n = 10000;
  double sigma_factor = 0.5;
  double floor = 0.05;
  std::uint64_t seed = 0;
  std::string out;
};

void run_infer(const InferArgs& args) {
  const Checkpoint ckpt = load_checkpoint(args.checkpoint_path);
  const Evidence evidence = evidence_from_json(
      ckpt.program, parse_json_file(args.evidence_path));

  MarginalSet marginals;
  nlohmann::json extra = nlohmann::json::object();
  if (args.method == "direct") {
    marginals = cond_marginals(ckpt.model, ckpt.program, evidence);
  } else {
    GuideConfig guide{args.sigma_factor, args.floor};
    RandomStream rng = RandomStream(args.seed).derive("cli/infer");
    const WeightedSampleSet samples = importance_sample_guided(
        ckpt.model, ckpt.program, evidence, guide, args.n, rng);
    marginals = posterior_estimates(ckpt.program, samples);
    const double ess = effective_sample_size(samples);
    extra["ess"] = ess;
    extra["n_samples"] = args.n;
    std::cout << "ess: " << format_double(ess) << " of " << args.n << "\n";
  }

  print_marginals(ckpt.program, marginals);
  if (!args.out.empty()) {
    nlohmann::json j = extra;
    j["marginals"] = marginals_to_json(ckpt.program, marginals);
    write_text_file(args.out, j.dump(2) + "\n");
  }
}

struct OracleArgs {
  std::string program_path;
  std::string evidence_path;
  std::string out;
};

void run_oracle(const OracleArgs& args) {
  const ProgramSpec program = load_program(args.program_path);
  const Evidence evidence =
      evidence_from_json(program, parse_json_file(args.evidence_path));
  MarginalSet marginals;
  marginals.categorical = enumerate_posterior(program, evidence);
  print_marginals(program, marginals);
  if (!args.out.empty()) {
    nlohmann::json j;
    j["marginals"] = marginals_to_json(program, marginals);
    write_text_file(args.out, j.dump(2) + "\n");
  }
}

struct BenchmarkArgs {
  std::vector<std::string> graphs;
  std::vector<std::string> modes;
  std::vector<int> presets;
  int iters = 5000;
  int batch = 512;
  int queries = 100;
  std::int64_t truth_samples = 1000000;
  std::int64_t stats_samples = 100000;
  std::uint64_t seed = 0;
  bool timing = false;
  std::string out = "benchmark.csv";
};

void run_benchmark_cmd(const BenchmarkArgs& args) {
  BenchmarkConfig config;
  config.graphs = args.graphs;
  for (const std::string& m : args.modes)
    config.modes.push_back(mode_from_string(m));
  config.presets = args.presets;
  config.iterations = args.iters;
  config.batch_size = args.batch;
  config.n_queries = args.queries;
  config.truth_samples = args.truth_samples;
  config.stats_samples = args.stats_samples;
  config.seed = args.seed;
  config.threads = env_threads();
  config.record_timing = args.timing;

  const BenchmarkReport report = run_benchmark(config);
  write_text_file(args.out, benchmark_csv(report));
  int failed = 0;
  for (const BenchmarkRow& row : report.rows) {
    if (!row.error.empty()) {
      ++failed;
      std::cerr << "cell " << row.graph << "/" << to_string(row.mode) << "/"
                << row.preset << " failed: " << row.error << "\n";
    }
  }
  std::cout << "wrote " << report.rows.size() << " rows (" << failed
            << " failed) to " << args.out << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"universal marginaliser: train once, condition on anything"};
  app.require_subcommand(1);

  GenGraphArgs gen;
  CLI::App* gen_cmd =
      app.add_subcommand("gen-graph", "write a benchmark program as JSON");
  gen_cmd->add_option("family", gen.family, "chain|grid|star|probprog")
      ->required()
      ->check(CLI::IsMember({"chain", "grid", "star", "probprog"}));
  gen_cmd->add_option("n", gen.n, "node count (ignored for probprog)");
  gen_cmd->add_option("--seed", gen.seed, "CPT seed");
  gen_cmd->add_option("--out", gen.out, "output path (default <name>.json)");

  TrainArgs tr;
  CLI::App* train_cmd =
      app.add_subcommand("train", "train a marginaliser for a program");
  train_cmd->add_option("--program", tr.program_path, "program JSON")
      ->required();
  train_cmd->add_option("--preset", tr.preset, "architecture preset 1..3")
      ->check(CLI::Range(1, 3));
  train_cmd->add_option("--hidden", tr.hidden, "hidden layer count");
  train_cmd->add_option("--width", tr.width, "hidden layer width");
  train_cmd->add_option("--activation", tr.activation, "relu|tanh")
      ->check(CLI::IsMember({"relu", "tanh"}));
  train_cmd->add_option("--dropout", tr.dropout, "dropout probability");
  train_cmd->add_option("--mode", tr.mode, "standard|flexible")
      ->check(CLI::IsMember({"standard", "flexible", "flex"}));
  train_cmd->add_option("--iters", tr.iters, "training iterations")
      ->check(CLI::PositiveNumber);
  train_cmd->add_option("--batch", tr.batch, "batch size")
      ->check(CLI::PositiveNumber);
  train_cmd->add_option("--seed", tr.seed, "master seed");
  train_cmd->add_option("--stats-samples", tr.stats_samples,
                        "prior-stats sample count")
      ->check(CLI::PositiveNumber);
  train_cmd->add_option("--out", tr.out, "checkpoint path");
  train_cmd->add_option("--loss-csv", tr.loss_csv, "loss curve CSV path");

  InferArgs inf;
  CLI::App* infer_cmd =
      app.add_subcommand("infer", "query a trained marginaliser");
  infer_cmd->add_option("--checkpoint", inf.checkpoint_path, "checkpoint JSON")
      ->required();
  infer_cmd->add_option("--evidence", inf.evidence_path, "evidence JSON")
      ->required();
  infer_cmd->add_option("--method", inf.method, "direct|guide-is")
      ->check(CLI::IsMember({"direct", "guide-is"}));
  infer_cmd->add_option("--n", inf.n, "importance samples for guide-is")
      ->check(CLI::PositiveNumber);
  infer_cmd->add_option("--sigma-factor", inf.sigma_factor,
                        "continuous proposal std factor");
  infer_cmd->add_option("--floor", inf.floor,
                        "prior-mix weight for categorical proposals");
  infer_cmd->add_option("--seed", inf.seed, "sampling seed");
  infer_cmd->add_option("--out", inf.out, "marginals JSON path");

  OracleArgs ora;
  CLI::App* oracle_cmd =
      app.add_subcommand("oracle", "exact marginals by enumeration");
  oracle_cmd->add_option("--program", ora.program_path, "program JSON")
      ->required();
  oracle_cmd->add_option("--evidence", ora.evidence_path, "evidence JSON")
      ->required();
  oracle_cmd->add_option("--out", ora.out, "marginals JSON path");

  BenchmarkArgs bench;
  CLI::App* bench_cmd =
      app.add_subcommand("benchmark", "correlation grid over graphs");
  bench_cmd->add_option("--graphs", bench.graphs, "graph names")
      ->delimiter(',');
  bench_cmd->add_option("--modes", bench.modes, "standard,flexible")
      ->delimiter(',');
  bench_cmd->add_option("--presets", bench.presets, "presets among 1,2,3")
      ->delimiter(',');
  bench_cmd->add_option("--iters", bench.iters, "training iterations")
      ->check(CLI::PositiveNumber);
  bench_cmd->add_option("--batch", bench.batch, "batch size")
      ->check(CLI::PositiveNumber);
  bench_cmd->add_option("--queries", bench.queries, "test queries per graph")
      ->check(CLI::PositiveNumber);
  bench_cmd->add_option("--truth-samples", bench.truth_samples,
                        "IS samples for 32-site ground truth")
      ->check(CLI::PositiveNumber);
  bench_cmd->add_option("--stats-samples", bench.stats_samples,
                        "prior-stats sample count")
      ->check(CLI::PositiveNumber);
  bench_cmd->add_option("--seed", bench.seed, "master seed");
  bench_cmd->add_flag("--timing", bench.timing,
                      "record wall-clock (breaks byte determinism)");
  bench_cmd->add_option("--out", bench.out, "report CSV path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*gen_cmd) run_gen_graph(gen);
    if (*train_cmd) run_train(tr);
    if (*infer_cmd) run_infer(inf);
    if (*oracle_cmd) run_oracle(ora);
    if (*bench_cmd) run_benchmark_cmd(bench);
    return 0;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
