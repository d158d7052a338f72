#include "um/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <sstream>
#include <thread>

#include "um/errors.hpp"
#include "um/masking.hpp"
#include "um/training.hpp"

namespace um {

std::vector<TestQuery> make_test_set(const ProgramSpec& program, int n_queries,
                                     RandomStream& rng) {
  if (n_queries < 1) throw ValidationError("n_queries must be >= 1");
  const int n = program.n_sites();
  if (n < 2)
    throw ValidationError("test queries need at least two sites");

  std::vector<TestQuery> queries;
  queries.reserve(n_queries);
  while (static_cast<int>(queries.size()) < n_queries) {
    const Assignment sample = ancestral_sample(program, rng);
    const Mask mask = sample_mask(n, rng);
    const int n_masked = static_cast<int>(mask.masked.size());
    if (n_masked == 0 || n_masked == n) continue;

    TestQuery query;
    query.evidence = Evidence(n);
    std::vector<bool> hidden(n, false);
    for (int site : mask.masked) hidden[site] = true;
    for (int i = 0; i < n; ++i) {
      if (!hidden[i]) query.evidence.set(i, sample[i]);
    }
    queries.push_back(std::move(query));
  }
  return queries;
}

GroundTruth ground_truth_enumeration(const ProgramSpec& program,
                                     const TestQuery& query) {
  GroundTruth truth;
  truth.marginals.categorical = enumerate_posterior(program, query.evidence);
  truth.method = "enumeration";
  return truth;
}

GroundTruth ground_truth_is_prior(const ProgramSpec& program,
                                  const TestQuery& query, std::int64_t n,
                                  RandomStream& rng) {
  const WeightedSampleSet samples =
      importance_sample_prior(program, query.evidence, n, rng);
  GroundTruth truth;
  truth.marginals = posterior_estimates(program, samples);
  truth.method = "is_prior";
  truth.n_samples = n;
  return truth;
}

double pearson(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size())
    throw ValidationError("pearson: length mismatch");
  const std::size_t n = xs.size();
  if (n < 2) throw ValidationError("pearson: need at least two pairs");

  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);

  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx <= 0.0 || syy <= 0.0)
    throw NumericError("pearson: zero-variance input");
  return sxy / std::sqrt(sxx * syy);
}

CorrelationScore correlation_score(const std::vector<MarginalSet>& predictions,
                                   const std::vector<GroundTruth>& truths) {
  if (predictions.size() != truths.size())
    throw ValidationError(
        "correlation_score: predictions/truths length mismatch");

  std::vector<double> cat_pred, cat_truth, cont_pred, cont_truth;
  for (std::size_t q = 0; q < predictions.size(); ++q) {
    for (const auto& [site, truth_probs] : truths[q].marginals.categorical) {
      const Eigen::VectorXd& p = predictions[q].categorical.at(site);
      for (int k = 1; k < truth_probs.size(); ++k) {
        cat_pred.push_back(p[k]);
        cat_truth.push_back(truth_probs[k]);
      }
    }
    for (const auto& [site, truth_mean] : truths[q].marginals.continuous) {
      cont_pred.push_back(predictions[q].continuous.at(site));
      cont_truth.push_back(truth_mean);
    }
  }

  CorrelationScore score;
  score.categorical_pairs = static_cast<std::int64_t>(cat_pred.size());
  score.continuous_pairs = static_cast<std::int64_t>(cont_pred.size());
  if (!cat_pred.empty()) score.categorical = pearson(cat_pred, cat_truth);
  if (!cont_pred.empty()) score.continuous = pearson(cont_pred, cont_truth);
  return score;
}

CorrelationScore correlation_score(const UmModel& model,
                                   const ProgramSpec& program,
                                   const std::vector<TestQuery>& queries,
                                   const std::vector<GroundTruth>& truths) {
  if (queries.size() != truths.size())
    throw ValidationError("correlation_score: queries/truths length mismatch");
  std::vector<MarginalSet> predictions;
  predictions.reserve(queries.size());
  for (const TestQuery& query : queries)
    predictions.push_back(cond_marginals(model, program, query.evidence));
  return correlation_score(predictions, truths);
}

const std::vector<std::string> kBenchmarkGraphs = {
    "chain4", "chain16", "chain32", "grid9",
    "grid16", "star4",   "star8",   "star32"};

ProgramSpec benchmark_graph(const std::string& name, std::uint64_t seed) {
  if (name == "chain4") return make_chain(4, seed);
  if (name == "chain16") return make_chain(16, seed);
  if (name == "chain32") return make_chain(32, seed);
  if (name == "grid9") return make_grid(3, 3, seed);
  if (name == "grid16") return make_grid(4, 4, seed);
  if (name == "star4") return make_star(4, seed);
  if (name == "star8") return make_star(8, seed);
  if (name == "star32") return make_star(32, seed);
  throw ValidationError("unknown benchmark graph '" + name + "'");
}

namespace {

struct GraphArtifacts {
  ProgramSpec program;
  EncodingLayout layout;
  PriorStats stats;
  std::vector<TestQuery> queries;
  std::vector<GroundTruth> truths;
};

GraphArtifacts prepare_graph(const std::string& name,
                             const BenchmarkConfig& config,
                             const RandomStream& root) {
  GraphArtifacts art;
  art.program =
      benchmark_graph(name, root.derive("bench/graph").derive(name).key());
  art.layout = make_layout(art.program);

  RandomStream stats_rng = root.derive("bench/stats").derive(name);
  art.stats =
      compute_prior_stats(art.program, config.stats_samples, stats_rng);

  RandomStream test_rng = root.derive("bench/test").derive(name);
  art.queries = make_test_set(art.program, config.n_queries, test_rng);

  const bool exact = art.program.n_sites() <= 16;
  const RandomStream truth_root = root.derive("bench/truth").derive(name);
  art.truths.reserve(art.queries.size());
  for (std::size_t q = 0; q < art.queries.size(); ++q) {
    if (exact) {
      art.truths.push_back(
          ground_truth_enumeration(art.program, art.queries[q]));
    } else {
      RandomStream truth_rng = truth_root.derive(q);
      art.truths.push_back(ground_truth_is_prior(
          art.program, art.queries[q], config.truth_samples, truth_rng));
    }
  }
  return art;
}

struct Cell {
  int graph = 0;  // index into the artifact list
  TrainMode mode = TrainMode::Standard;
  int preset = 0;
};

BenchmarkRow run_cell(const Cell& cell, const std::string& graph_name,
                      const GraphArtifacts& art, const BenchmarkConfig& config,
                      const RandomStream& root) {
  BenchmarkRow row;
  row.graph = graph_name;
  row.mode = cell.mode;
  row.preset = cell.preset;
  row.seed = config.seed;
  row.iterations = config.iterations;
  row.batch_size = config.batch_size;

  const auto t0 = std::chrono::steady_clock::now();
  try {
    const RandomStream cell_root = root.derive("bench/cell")
                                       .derive(graph_name)
                                       .derive(to_string(cell.mode))
                                       .derive(cell.preset);
    RandomStream build_rng = cell_root.derive("build");
    UmModel model = build_um(art.program, cell.preset, cell.mode, art.layout,
                             art.stats, build_rng);

    TrainConfig tc;
    tc.batch_size = config.batch_size;
    tc.iterations = config.iterations;
    tc.mode = cell.mode;
    tc.seed = cell_root.derive("train").key();
    tc.loss_log_every = std::max(1, config.iterations / 10);
    train(model, art.program, tc);

    const CorrelationScore score =
        correlation_score(model, art.program, art.queries, art.truths);
    row.correlation_cat = score.categorical;
    row.correlation_cont = score.continuous;
  } catch (const std::exception& e) {
    row.error = e.what();
  }
  if (config.record_timing) {
    const auto t1 = std::chrono::steady_clock::now();
    row.seconds = std::chrono::duration<double>(t1 - t0).count();
  }
  return row;
}

}  // namespace

BenchmarkReport run_benchmark(const BenchmarkConfig& config) {
  std::vector<std::string> graphs =
      config.graphs.empty() ? kBenchmarkGraphs : config.graphs;
  std::vector<TrainMode> modes =
      config.modes.empty()
          ? std::vector<TrainMode>{TrainMode::Standard, TrainMode::Flexible}
          : config.modes;
  std::vector<int> presets =
      config.presets.empty() ? std::vector<int>{1, 2, 3} : config.presets;
  const int threads = std::max(1, config.threads);

  const RandomStream root(config.seed);
  std::vector<GraphArtifacts> artifacts;
  artifacts.reserve(graphs.size());
  for (const std::string& name : graphs)
    artifacts.push_back(prepare_graph(name, config, root));

  std::vector<Cell> cells;
  for (int g = 0; g < static_cast<int>(graphs.size()); ++g) {
    for (TrainMode mode : modes) {
      for (int preset : presets) cells.push_back(Cell{g, mode, preset});
    }
  }

  BenchmarkReport report;
  report.rows.resize(cells.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= cells.size()) break;
      const Cell& cell = cells[i];
      report.rows[i] = run_cell(cell, graphs[cell.graph],
                                artifacts[cell.graph], config, root);
    }
  };
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return report;
}

std::string benchmark_csv(const BenchmarkReport& report) {
  std::ostringstream out;
  out << "graph,mode,preset,seed,correlation_cat,correlation_cont,iters,"
         "batch,seconds\n";
  for (const BenchmarkRow& row : report.rows) {
    out << row.graph << ',' << to_string(row.mode) << ',' << row.preset << ','
        << row.seed << ',' << format_double(row.correlation_cat) << ','
        << format_double(row.correlation_cont) << ',' << row.iterations << ','
        << row.batch_size << ',' << format_double(row.seconds) << '\n';
  }
  return out.str();
}

}  // namespace um
