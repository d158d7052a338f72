#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "um/neural.hpp"
#include "um/program.hpp"
#include "um/rng.hpp"

namespace um {

// Predictions for unobserved sites: probability vector per categorical
// site, de-standardised mean per continuous site.
struct MarginalSet {
  std::map<int, Eigen::VectorXd> categorical;
  std::map<int, double> continuous;
};

struct GuideConfig {
  // Continuous proposals are Gaussian(predicted mean, sigma_factor * prior
  // std); categorical proposals mix the predicted vector with the site's
  // prior conditional at weight `floor` (defensive mixing), bounding the
  // damage a bad prediction can do to the importance weights.
  double sigma_factor = 0.5;
  double floor = 0.05;
};

struct WeightedSampleSet {
  std::vector<Assignment> assignments;
  std::vector<double> log_weights;
  Evidence evidence;
  std::string proposal;  // "prior" | "um-guide"

  std::int64_t size() const {
    return static_cast<std::int64_t>(log_weights.size());
  }
};

// Single-pass approximate posterior marginals: one encode, one forward.
MarginalSet cond_marginals(const UmModel& model, const ProgramSpec& program,
                           const Evidence& evidence);

// Chain-rule proposal: walk sites in program order, re-encoding and
// re-running the model once per unobserved proposable site so each draw
// conditions on the evidence plus everything sampled so far. Non-proposable
// sites, and sites with no observed descendant (whose conditional given the
// full prefix provably equals their prior conditional), fall back to the
// program's own conditional, whose log-density is folded into log q (it
// cancels against the joint in the weight). Returns the completed assignment
// and the exact proposal log-density of the sampled part; observed sites
// contribute zero.
std::pair<Assignment, double> sequential_propose(const UmModel& model,
                                                 const ProgramSpec& program,
                                                 const Evidence& evidence,
                                                 const GuideConfig& cfg,
                                                 RandomStream& rng);

// Recompute sequential_propose's log q for a given completed assignment.
double replay_log_q(const UmModel& model, const ProgramSpec& program,
                    const Evidence& evidence, const GuideConfig& cfg,
                    const Assignment& assignment);

// Likelihood weighting: ancestral sampling with observed sites clamped;
// log w sums the log-density of each observed value given sampled parents.
WeightedSampleSet importance_sample_prior(const ProgramSpec& program,
                                          const Evidence& evidence,
                                          std::int64_t n, RandomStream& rng);

// Model-guided importance sampling: log w = log_joint - log q.
WeightedSampleSet importance_sample_guided(const UmModel& model,
                                           const ProgramSpec& program,
                                           const Evidence& evidence,
                                           const GuideConfig& cfg,
                                           std::int64_t n, RandomStream& rng);

// Self-normalised estimates: weighted state frequencies / weighted means
// for unobserved sites. Throws NumericError when no weight is usable.
MarginalSet posterior_estimates(const ProgramSpec& program,
                                const WeightedSampleSet& samples);

// (sum w)^2 / sum w^2 over normalised weights; in [1, n].
double effective_sample_size(const WeightedSampleSet& samples);

double gaussian_log_pdf(double x, double mean, double std);

}  // namespace um
