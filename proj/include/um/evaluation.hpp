#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "um/inference.hpp"
#include "um/neural.hpp"
#include "um/program.hpp"
#include "um/rng.hpp"

namespace um {

// One evaluation case: observed sites with values; everything else is
// queried.
struct TestQuery {
  Evidence evidence;
};

struct GroundTruth {
  MarginalSet marginals;
  std::string method;          // "enumeration" | "is_prior"
  std::int64_t n_samples = 0;  // 0 for enumeration
};

// Prior sample + random mask per query; masked sites become the latents.
// Degenerate masks (none / all) are redrawn so every query has at least one
// observed and one unobserved site.
std::vector<TestQuery> make_test_set(const ProgramSpec& program, int n_queries,
                                     RandomStream& rng);

GroundTruth ground_truth_enumeration(const ProgramSpec& program,
                                     const TestQuery& query);
GroundTruth ground_truth_is_prior(const ProgramSpec& program,
                                  const TestQuery& query, std::int64_t n,
                                  RandomStream& rng);

// Pearson product-moment coefficient; throws on length mismatch, length < 2
// or zero variance.
double pearson(const std::vector<double>& xs, const std::vector<double>& ys);

struct CorrelationScore {
  double categorical = std::numeric_limits<double>::quiet_NaN();
  double continuous = std::numeric_limits<double>::quiet_NaN();
  std::int64_t categorical_pairs = 0;
  std::int64_t continuous_pairs = 0;
};

// Pools (prediction, truth) pairs over all queries and unobserved sites:
// every non-reference state k >= 1 of each categorical site, and the means
// of continuous sites as a separate score.
CorrelationScore correlation_score(const std::vector<MarginalSet>& predictions,
                                   const std::vector<GroundTruth>& truths);

// Predictions from one cond_marginals pass per query.
CorrelationScore correlation_score(const UmModel& model,
                                   const ProgramSpec& program,
                                   const std::vector<TestQuery>& queries,
                                   const std::vector<GroundTruth>& truths);

struct BenchmarkConfig {
  std::vector<std::string> graphs;  // empty = the full 8-graph suite
  std::vector<TrainMode> modes;     // empty = {standard, flexible}
  std::vector<int> presets;         // empty = {1, 2, 3}
  int iterations = 5000;
  int batch_size = 512;
  int n_queries = 100;
  std::int64_t truth_samples = 1000000;
  std::int64_t stats_samples = 100000;
  std::uint64_t seed = 0;
  int threads = 1;
  // Wall-clock is zeroed by default so identical seeds give identical CSV
  // bytes; opt in to real timings when determinism does not matter.
  bool record_timing = false;
};

struct BenchmarkRow {
  std::string graph;
  TrainMode mode = TrainMode::Standard;
  int preset = 0;
  std::uint64_t seed = 0;
  double correlation_cat = std::numeric_limits<double>::quiet_NaN();
  double correlation_cont = std::numeric_limits<double>::quiet_NaN();
  int iterations = 0;
  int batch_size = 0;
  double seconds = 0.0;
  std::string error;  // empty on success
};

struct BenchmarkReport {
  std::vector<BenchmarkRow> rows;
};

extern const std::vector<std::string> kBenchmarkGraphs;

// chain4/chain16/chain32, grid9/grid16, star4/star8/star32.
ProgramSpec benchmark_graph(const std::string& name, std::uint64_t seed);

// Trains one model per (graph, mode, preset) cell and scores it against
// enumeration (<= 16 sites) or 1M-sample likelihood weighting (32 sites).
// Graph artifacts (program, prior stats, test set, truths) are shared
// across the graph's cells; cells run on `threads` workers with derived
// seeds, so the report is identical for any thread count. Cell failures are
// recorded in the row and the run continues.
BenchmarkReport run_benchmark(const BenchmarkConfig& config);

// Columns: graph,mode,preset,seed,correlation_cat,correlation_cont,iters,
// batch,seconds.
std::string benchmark_csv(const BenchmarkReport& report);

}  // namespace um
