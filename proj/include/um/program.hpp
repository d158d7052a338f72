#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "um/rng.hpp"

namespace um {

enum class SiteKind { Categorical, Continuous };

// One row per joint parent configuration, one column per state. Rows are
// indexed row-major over the parent list (first parent most significant).
struct CategoricalTable {
  Eigen::MatrixXd table;
};

struct GaussianConst {
  double mean = 0.0;
  double std = 1.0;
};

// Mean taken from one parent's value; std either a constant or another
// parent's value. Parent fields are positions in the site's parent list.
struct GaussianLinear {
  int mean_parent = 0;
  double std_const = 1.0;
  int std_parent = -1;  // -1: use std_const
};

struct GammaConst {
  double shape = 1.0;  // shape-rate parameterisation
  double rate = 1.0;
};

// Threshold branch from the two-regime random walk program: with
// a = |parents[0]|, the site draws Bernoulli(a) as a {0.0, 1.0}-valued real
// when a < 1, and Gaussian(parents[0], parents[1]) otherwise.
struct BranchBernoulliGaussian {};

using ConditionalDist = std::variant<CategoricalTable, GaussianConst,
                                     GaussianLinear, GammaConst,
                                     BranchBernoulliGaussian>;

struct SiteSpec {
  std::string name;
  SiteKind kind = SiteKind::Continuous;
  int arity = 0;             // categorical sites only, >= 2
  std::vector<int> parents;  // indices of earlier sites, order is meaningful
  ConditionalDist dist;
  bool proposable = true;    // eligible for model-guided proposals
};

// A bounded probabilistic program: a fixed, topologically ordered list of
// random choices. Immutable after validation; safe to share across threads.
struct ProgramSpec {
  std::string name;
  std::vector<SiteSpec> sites;

  int n_sites() const { return static_cast<int>(sites.size()); }
};

// Full sample of all sites in site order; categorical values are state
// indices stored as exact small doubles.
using Assignment = Eigen::VectorXd;

// A partial observation: per-site observed flag plus value.
class Evidence {
 public:
  Evidence() = default;
  explicit Evidence(int n_sites)
      : observed_(n_sites, 0), values_(Eigen::VectorXd::Zero(n_sites)) {}

  void set(int site, double value) {
    observed_.at(site) = 1;
    values_[site] = value;
  }
  void clear(int site) {
    observed_.at(site) = 0;
    values_[site] = 0.0;
  }
  bool observed(int site) const { return observed_.at(site) != 0; }
  double value(int site) const { return values_[site]; }
  int n_sites() const { return static_cast<int>(observed_.size()); }
  int n_observed() const;
  std::vector<int> observed_sites() const;

 private:
  std::vector<std::uint8_t> observed_;
  Eigen::VectorXd values_;
};

// Structural validation: topological parent order, unique names, CPT row
// counts and row sums, positive distribution parameters. Throws
// ValidationError; called by every constructor-of-convenience and on
// deserialisation.
void validate(const ProgramSpec& program);

int site_index(const ProgramSpec& program, const std::string& name);

// Row into a CategoricalTable for the parent values in `values`.
int parent_config_index(const ProgramSpec& program, const SiteSpec& site,
                        const Assignment& values);

// Draw site `site` from its conditional given parents already set in
// `values`. Used by ancestral sampling and by proposal fallbacks.
double sample_site(const ProgramSpec& program, int site,
                   const Assignment& values, RandomStream& rng);

// Log conditional density/mass of `value` at `site` given parents in
// `values`; -inf off support.
double site_log_density(const ProgramSpec& program, int site, double value,
                        const Assignment& values);

Assignment ancestral_sample(const ProgramSpec& program, RandomStream& rng);

// Sum of per-site log conditionals; -inf for zero-mass assignments. When
// `override_evidence` is given, observed sites take their values from it.
double log_joint(const ProgramSpec& program, const Assignment& assignment,
                 const std::optional<Evidence>& override_evidence = {});

// Benchmark graph families: binary sites, every conditional P(X=1 | parent
// config) drawn independently Uniform(0,1) from the seed.
ProgramSpec make_chain(int n, std::uint64_t seed);
ProgramSpec make_grid(int rows, int cols, std::uint64_t seed);
ProgramSpec make_star(int n, std::uint64_t seed);

// The 52-site mixed program: t0 ~ Gaussian(0,3), v ~ Gamma(3,1), then
// t1..t50 threshold-branch sites with parents (t_{i-1}, v). Branch sites are
// not proposable.
ProgramSpec builtin_probprog();

// Exact conditional marginals P(X_i = k | evidence) for every unobserved
// site, by summation over all completions. Requires an all-categorical
// program with at most 2^20 joint configurations.
std::map<int, Eigen::VectorXd> enumerate_posterior(const ProgramSpec& program,
                                                   const Evidence& evidence);

}  // namespace um
