#include "um/inference.hpp"

#include <cmath>
#include <limits>

#include "um/errors.hpp"
#include "um/masking.hpp"

namespace um {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kLogTwoPi = 1.8378770664093454836;

void check_guide_config(const GuideConfig& cfg) {
  if (!(cfg.sigma_factor > 0.0))
    throw ValidationError("sigma_factor must be > 0");
  if (!(cfg.floor >= 0.0 && cfg.floor <= 0.1))
    throw ValidationError("categorical proposal floor must be in [0, 0.1]");
}

void check_evidence(const ProgramSpec& program, const Evidence& evidence) {
  if (evidence.n_sites() != program.n_sites())
    throw ValidationError("evidence built for a different program");
}

// Sites with no observed descendant keep their prior conditional as the
// exact posterior conditional once the whole prefix is assigned (any
// dependence on later evidence would have to flow through a descendant), so
// the proposal samples them from the program itself and their weight terms
// cancel exactly.
std::vector<char> has_observed_descendant(const ProgramSpec& program,
                                          const Evidence& evidence) {
  const int n = program.n_sites();
  std::vector<std::vector<int>> children(n);
  for (int i = 0; i < n; ++i)
    for (int p : program.sites[i].parents) children[p].push_back(i);
  std::vector<char> flag(n, 0);
  for (int i = n - 1; i >= 0; --i)
    for (int c : children[i])
      if (evidence.observed(c) || flag[c]) flag[i] = 1;
  return flag;
}

// Defensive proposal for a categorical site: the model prediction mixed with
// the site's prior conditional row. A model blunder then costs at most a
// 1/floor weight factor, and an uninformative model degrades gracefully to
// likelihood weighting instead of collapsing the sample set.
Eigen::VectorXd categorical_proposal(const ProgramSpec& program, int site,
                                     const Assignment& values,
                                     const Eigen::VectorXd& pred,
                                     double floor) {
  if (floor == 0.0) return pred;
  const SiteSpec& spec = program.sites[site];
  const auto& table = std::get<CategoricalTable>(spec.dist).table;
  const Eigen::VectorXd prior =
      table.row(parent_config_index(program, spec, values)).transpose();
  return (1.0 - floor) * pred + floor * prior;
}

}  // namespace

double gaussian_log_pdf(double x, double mean, double std) {
  const double z = (x - mean) / std;
  return -0.5 * (kLogTwoPi + z * z) - std::log(std);
}

MarginalSet cond_marginals(const UmModel& model, const ProgramSpec& program,
                           const Evidence& evidence) {
  check_evidence(program, evidence);
  const Eigen::VectorXd input =
      encode(program, model.layout, model.stats, evidence);
  const std::vector<Eigen::VectorXd> preds = forward(model, input);

  MarginalSet out;
  for (int i = 0; i < program.n_sites(); ++i) {
    if (evidence.observed(i)) continue;
    if (program.sites[i].kind == SiteKind::Categorical)
      out.categorical[i] = preds[i];
    else
      out.continuous[i] = destandardize(model.stats, i, preds[i][0]);
  }
  return out;
}

std::pair<Assignment, double> sequential_propose(const UmModel& model,
                                                 const ProgramSpec& program,
                                                 const Evidence& evidence,
                                                 const GuideConfig& cfg,
                                                 RandomStream& rng) {
  check_guide_config(cfg);
  check_evidence(program, evidence);

  const int n = program.n_sites();
  Assignment values = Assignment::Zero(n);
  Evidence known = evidence;
  const std::vector<char> needs_model = has_observed_descendant(program, evidence);
  double log_q = 0.0;

  for (int i = 0; i < n; ++i) {
    if (evidence.observed(i)) {
      values[i] = evidence.value(i);
      continue;
    }
    const SiteSpec& site = program.sites[i];
    if (!site.proposable || !needs_model[i]) {
      values[i] = sample_site(program, i, values, rng);
      log_q += site_log_density(program, i, values[i], values);
    } else {
      const Eigen::VectorXd input =
          encode(program, model.layout, model.stats, known);
      const std::vector<Eigen::VectorXd> preds = forward(model, input);
      if (!preds[i].allFinite())
        throw NumericError("non-finite proposal prediction at site " +
                           site.name);
      if (site.kind == SiteKind::Categorical) {
        const Eigen::VectorXd p =
            categorical_proposal(program, i, values, preds[i], cfg.floor);
        const int state = rng.categorical(p);
        values[i] = static_cast<double>(state);
        log_q += std::log(p[state]);
      } else {
        const double mean = destandardize(model.stats, i, preds[i][0]);
        const double std = cfg.sigma_factor * model.stats.std[i];
        values[i] = rng.normal(mean, std);
        log_q += gaussian_log_pdf(values[i], mean, std);
      }
    }
    known.set(i, values[i]);
  }
  return {values, log_q};
}

double replay_log_q(const UmModel& model, const ProgramSpec& program,
                    const Evidence& evidence, const GuideConfig& cfg,
                    const Assignment& assignment) {
  check_guide_config(cfg);
  check_evidence(program, evidence);

  Evidence known = evidence;
  const std::vector<char> needs_model = has_observed_descendant(program, evidence);
  double log_q = 0.0;
  for (int i = 0; i < program.n_sites(); ++i) {
    if (evidence.observed(i)) continue;
    const SiteSpec& site = program.sites[i];
    if (!site.proposable || !needs_model[i]) {
      log_q += site_log_density(program, i, assignment[i], assignment);
    } else {
      const Eigen::VectorXd input =
          encode(program, model.layout, model.stats, known);
      const std::vector<Eigen::VectorXd> preds = forward(model, input);
      if (site.kind == SiteKind::Categorical) {
        const Eigen::VectorXd p = categorical_proposal(program, i, assignment,
                                                       preds[i], cfg.floor);
        log_q += std::log(p[static_cast<int>(assignment[i])]);
      } else {
        const double mean = destandardize(model.stats, i, preds[i][0]);
        const double std = cfg.sigma_factor * model.stats.std[i];
        log_q += gaussian_log_pdf(assignment[i], mean, std);
      }
    }
    known.set(i, assignment[i]);
  }
  return log_q;
}

WeightedSampleSet importance_sample_prior(const ProgramSpec& program,
                                          const Evidence& evidence,
                                          std::int64_t n, RandomStream& rng) {
  check_evidence(program, evidence);
  if (n < 1) throw ValidationError("sample count must be >= 1");

  const int n_sites = program.n_sites();
  WeightedSampleSet out;
  out.assignments.reserve(n);
  out.log_weights.reserve(n);
  out.evidence = evidence;
  out.proposal = "prior";

  for (std::int64_t s = 0; s < n; ++s) {
    RandomStream srng = rng.derive(static_cast<std::uint64_t>(s));
    Assignment values = Assignment::Zero(n_sites);
    double log_w = 0.0;
    for (int i = 0; i < n_sites; ++i) {
      if (evidence.observed(i)) {
        values[i] = evidence.value(i);
        log_w += site_log_density(program, i, values[i], values);
      } else {
        values[i] = sample_site(program, i, values, srng);
      }
    }
    out.assignments.push_back(std::move(values));
    out.log_weights.push_back(log_w);
  }
  return out;
}

WeightedSampleSet importance_sample_guided(const UmModel& model,
                                           const ProgramSpec& program,
                                           const Evidence& evidence,
                                           const GuideConfig& cfg,
                                           std::int64_t n, RandomStream& rng) {
  check_guide_config(cfg);
  check_evidence(program, evidence);
  if (n < 1) throw ValidationError("sample count must be >= 1");

  WeightedSampleSet out;
  out.assignments.reserve(n);
  out.log_weights.reserve(n);
  out.evidence = evidence;
  out.proposal = "um-guide";

  for (std::int64_t s = 0; s < n; ++s) {
    RandomStream srng = rng.derive(static_cast<std::uint64_t>(s));
    auto [values, log_q] =
        sequential_propose(model, program, evidence, cfg, srng);
    const double log_w = log_joint(program, values) - log_q;
    out.assignments.push_back(std::move(values));
    out.log_weights.push_back(log_w);
  }
  return out;
}

namespace {

// Largest finite log-weight, or throws when none is usable.
double log_weight_anchor(const WeightedSampleSet& samples) {
  double best = kNegInf;
  for (double lw : samples.log_weights) {
    if (std::isnan(lw)) throw NumericError("NaN log-weight");
    if (lw > best) best = lw;
  }
  if (best == kNegInf)
    throw NumericError(
        "degenerate weights: every sample has zero likelihood under the "
        "evidence");
  return best;
}

}  // namespace

MarginalSet posterior_estimates(const ProgramSpec& program,
                                const WeightedSampleSet& samples) {
  check_evidence(program, samples.evidence);
  if (samples.size() == 0) throw ValidationError("empty sample set");
  const double anchor = log_weight_anchor(samples);

  MarginalSet out;
  for (int i = 0; i < program.n_sites(); ++i) {
    if (samples.evidence.observed(i)) continue;
    if (program.sites[i].kind == SiteKind::Categorical)
      out.categorical[i] = Eigen::VectorXd::Zero(program.sites[i].arity);
    else
      out.continuous[i] = 0.0;
  }

  double total = 0.0;
  for (std::int64_t s = 0; s < samples.size(); ++s) {
    const double w = std::exp(samples.log_weights[s] - anchor);
    if (w == 0.0) continue;
    total += w;
    const Assignment& values = samples.assignments[s];
    for (auto& [site, probs] : out.categorical)
      probs[static_cast<int>(values[site])] += w;
    for (auto& [site, mean] : out.continuous) mean += w * values[site];
  }
  for (auto& [site, probs] : out.categorical) probs /= total;
  for (auto& [site, mean] : out.continuous) mean /= total;
  return out;
}

double effective_sample_size(const WeightedSampleSet& samples) {
  if (samples.size() == 0) throw ValidationError("empty sample set");
  const double anchor = log_weight_anchor(samples);
  double sum = 0.0, sum_sq = 0.0;
  for (double lw : samples.log_weights) {
    const double w = std::exp(lw - anchor);
    sum += w;
    sum_sq += w * w;
  }
  return sum * sum / sum_sq;
}

}  // namespace um
