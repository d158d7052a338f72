#include "um/program.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <set>
#include <sstream>

#include "um/errors.hpp"

namespace um {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
// Parent-supplied scale parameters are floored instead of rejected so that
// density evaluation stays total on proposals that wander off support; the
// sample's own prior term already carries the -inf in that case.
constexpr double kStdFloor = 1e-12;

double log_normal_density(double x, double mean, double std) {
  if (!(std > 0.0)) return kNegInf;
  const double z = (x - mean) / std;
  return -0.5 * z * z - std::log(std) - 0.5 * std::log(2.0 * std::numbers::pi);
}

double log_gamma_density(double x, double shape, double rate) {
  if (!(x > 0.0)) return kNegInf;
  return shape * std::log(rate) + (shape - 1.0) * std::log(x) - rate * x -
         std::lgamma(shape);
}

int checked_state(const SiteSpec& site, double value, int site_idx) {
  const double rounded = std::nearbyint(value);
  if (rounded != value || rounded < 0.0 || rounded >= site.arity) {
    std::ostringstream msg;
    msg << "site " << site.name << " (index " << site_idx
        << "): value " << value << " is not a state in [0, " << site.arity
        << ")";
    throw ValidationError(msg.str());
  }
  return static_cast<int>(rounded);
}

}  // namespace

int Evidence::n_observed() const {
  int n = 0;
  for (auto f : observed_) n += f;
  return n;
}

std::vector<int> Evidence::observed_sites() const {
  std::vector<int> out;
  for (int i = 0; i < n_sites(); ++i) {
    if (observed_[i]) out.push_back(i);
  }
  return out;
}

void validate(const ProgramSpec& program) {
  if (program.sites.empty()) {
    throw ValidationError("program '" + program.name + "' has no sites");
  }
  std::set<std::string> names;
  for (int i = 0; i < program.n_sites(); ++i) {
    const SiteSpec& site = program.sites[i];
    if (site.name.empty()) {
      throw ValidationError("site " + std::to_string(i) + " has empty name");
    }
    if (!names.insert(site.name).second) {
      throw ValidationError("duplicate site name '" + site.name + "'");
    }
    for (int p : site.parents) {
      if (p < 0 || p >= i) {
        throw ValidationError("site '" + site.name +
                              "' has parent index out of topological order");
      }
    }
    if (site.kind == SiteKind::Categorical && site.arity < 2) {
      throw ValidationError("categorical site '" + site.name +
                            "' needs arity >= 2");
    }

    if (const auto* ct = std::get_if<CategoricalTable>(&site.dist)) {
      if (site.kind != SiteKind::Categorical) {
        throw ValidationError("site '" + site.name +
                              "' has a categorical table but continuous kind");
      }
      long expected_rows = 1;
      for (int p : site.parents) {
        if (program.sites[p].kind != SiteKind::Categorical) {
          throw ValidationError("categorical table site '" + site.name +
                                "' requires categorical parents");
        }
        expected_rows *= program.sites[p].arity;
      }
      if (ct->table.rows() != expected_rows ||
          ct->table.cols() != site.arity) {
        throw ValidationError("site '" + site.name +
                              "': table shape does not match parent arities");
      }
      for (Eigen::Index r = 0; r < ct->table.rows(); ++r) {
        double sum = 0.0;
        for (Eigen::Index c = 0; c < ct->table.cols(); ++c) {
          const double v = ct->table(r, c);
          if (!(v >= 0.0 && v <= 1.0)) {
            throw ValidationError("site '" + site.name +
                                  "': table entry outside [0,1]");
          }
          sum += v;
        }
        if (std::abs(sum - 1.0) > 1e-9) {
          throw ValidationError("site '" + site.name + "': table row " +
                                std::to_string(r) + " sums to " +
                                std::to_string(sum));
        }
      }
    } else if (const auto* g = std::get_if<GaussianConst>(&site.dist)) {
      if (site.kind != SiteKind::Continuous) {
        throw ValidationError("gaussian site '" + site.name +
                              "' must be continuous");
      }
      if (!(g->std > 0.0)) {
        throw ValidationError("site '" + site.name + "': std must be > 0");
      }
    } else if (const auto* gl = std::get_if<GaussianLinear>(&site.dist)) {
      if (site.kind != SiteKind::Continuous) {
        throw ValidationError("gaussian site '" + site.name +
                              "' must be continuous");
      }
      const int np = static_cast<int>(site.parents.size());
      if (gl->mean_parent < 0 || gl->mean_parent >= np) {
        throw ValidationError("site '" + site.name +
                              "': mean parent position out of range");
      }
      if (gl->std_parent >= 0) {
        if (gl->std_parent >= np) {
          throw ValidationError("site '" + site.name +
                                "': std parent position out of range");
        }
      } else if (!(gl->std_const > 0.0)) {
        throw ValidationError("site '" + site.name + "': std must be > 0");
      }
    } else if (const auto* gm = std::get_if<GammaConst>(&site.dist)) {
      if (site.kind != SiteKind::Continuous) {
        throw ValidationError("gamma site '" + site.name +
                              "' must be continuous");
      }
      if (!(gm->shape > 0.0) || !(gm->rate > 0.0)) {
        throw ValidationError("site '" + site.name +
                              "': gamma shape and rate must be > 0");
      }
    } else if (std::holds_alternative<BranchBernoulliGaussian>(site.dist)) {
      if (site.kind != SiteKind::Continuous) {
        throw ValidationError("branch site '" + site.name +
                              "' must be continuous");
      }
      if (site.parents.size() != 2) {
        throw ValidationError("branch site '" + site.name +
                              "' needs exactly two parents (value, std)");
      }
      if (program.sites[site.parents[0]].kind != SiteKind::Continuous ||
          program.sites[site.parents[1]].kind != SiteKind::Continuous) {
        throw ValidationError("branch site '" + site.name +
                              "' needs continuous parents");
      }
    }
  }
}

int site_index(const ProgramSpec& program, const std::string& name) {
  for (int i = 0; i < program.n_sites(); ++i) {
    if (program.sites[i].name == name) return i;
  }
  throw ValidationError("unknown site '" + name + "' in program '" +
                        program.name + "'");
}

int parent_config_index(const ProgramSpec& program, const SiteSpec& site,
                        const Assignment& values) {
  int row = 0;
  for (int p : site.parents) {
    const SiteSpec& parent = program.sites[p];
    row = row * parent.arity +
          checked_state(parent, values[p], p);
  }
  return row;
}

double sample_site(const ProgramSpec& program, int site,
                   const Assignment& values, RandomStream& rng) {
  const SiteSpec& s = program.sites[site];
  if (const auto* ct = std::get_if<CategoricalTable>(&s.dist)) {
    const int row = parent_config_index(program, s, values);
    return static_cast<double>(rng.categorical(ct->table.row(row)));
  }
  if (const auto* g = std::get_if<GaussianConst>(&s.dist)) {
    return rng.normal(g->mean, g->std);
  }
  if (const auto* gl = std::get_if<GaussianLinear>(&s.dist)) {
    const double mean = values[s.parents[gl->mean_parent]];
    const double std = gl->std_parent >= 0
                           ? std::max(values[s.parents[gl->std_parent]], kStdFloor)
                           : gl->std_const;
    return rng.normal(mean, std);
  }
  if (const auto* gm = std::get_if<GammaConst>(&s.dist)) {
    return rng.gamma(gm->shape, gm->rate);
  }
  // BranchBernoulliGaussian
  const double t = values[s.parents[0]];
  const double a = std::abs(t);
  if (a < 1.0) {
    return rng.bernoulli(a) ? 1.0 : 0.0;
  }
  const double std = std::max(values[s.parents[1]], kStdFloor);
  return rng.normal(t, std);
}

double site_log_density(const ProgramSpec& program, int site, double value,
                        const Assignment& values) {
  const SiteSpec& s = program.sites[site];
  if (const auto* ct = std::get_if<CategoricalTable>(&s.dist)) {
    const int row = parent_config_index(program, s, values);
    const int state = checked_state(s, value, site);
    const double p = ct->table(row, state);
    return p > 0.0 ? std::log(p) : kNegInf;
  }
  if (const auto* g = std::get_if<GaussianConst>(&s.dist)) {
    return log_normal_density(value, g->mean, g->std);
  }
  if (const auto* gl = std::get_if<GaussianLinear>(&s.dist)) {
    const double mean = values[s.parents[gl->mean_parent]];
    const double std = gl->std_parent >= 0
                           ? std::max(values[s.parents[gl->std_parent]], kStdFloor)
                           : gl->std_const;
    return log_normal_density(value, mean, std);
  }
  if (const auto* gm = std::get_if<GammaConst>(&s.dist)) {
    return log_gamma_density(value, gm->shape, gm->rate);
  }
  // BranchBernoulliGaussian: {0,1} point masses below the threshold,
  // Gaussian density above it.
  const double t = values[s.parents[0]];
  const double a = std::abs(t);
  if (a < 1.0) {
    if (value == 1.0) return a > 0.0 ? std::log(a) : kNegInf;
    if (value == 0.0) return a < 1.0 ? std::log1p(-a) : kNegInf;
    return kNegInf;
  }
  const double std = std::max(values[s.parents[1]], kStdFloor);
  return log_normal_density(value, t, std);
}

Assignment ancestral_sample(const ProgramSpec& program, RandomStream& rng) {
  Assignment values = Assignment::Zero(program.n_sites());
  for (int i = 0; i < program.n_sites(); ++i) {
    values[i] = sample_site(program, i, values, rng);
  }
  return values;
}

double log_joint(const ProgramSpec& program, const Assignment& assignment,
                 const std::optional<Evidence>& override_evidence) {
  if (assignment.size() != program.n_sites()) {
    throw ValidationError("assignment length does not match program");
  }
  Assignment values = assignment;
  if (override_evidence) {
    for (int i = 0; i < program.n_sites(); ++i) {
      if (override_evidence->observed(i)) values[i] = override_evidence->value(i);
    }
  }
  double total = 0.0;
  for (int i = 0; i < program.n_sites(); ++i) {
    total += site_log_density(program, i, values[i], values);
    if (total == kNegInf) return kNegInf;
  }
  return total;
}

namespace {

// Binary site whose conditional is a random logistic model of its parents:
// p(1 | x) = sigmoid(bias + sum_j w_j (2 x_j - 1)), tabulated row by row in
// the first-parent-major order parent_config_index uses. Roots get a small
// bias only, so their priors stay diffuse; parent weights have magnitude in
// [2, 4] with a random sign, so every link stays informative. Diffuse roots
// with strong links give multi-modal joints whose posteriors genuinely
// differ from the prior; independent uniform rows would make likelihood
// weights nearly flat and the graphs degenerate as inference benchmarks.
SiteSpec random_binary_site(const std::string& name,
                            const std::vector<int>& parents,
                            long rows, RandomStream& rng) {
  SiteSpec site;
  site.name = name;
  site.kind = SiteKind::Categorical;
  site.arity = 2;
  site.parents = parents;
  const double bias = (rng.uniform() - 0.5) * 1.2;
  std::vector<double> weights(parents.size());
  for (double& w : weights) {
    w = 2.0 + 2.0 * rng.uniform();
    if (rng.uniform() < 0.5) w = -w;
  }
  Eigen::MatrixXd table(rows, 2);
  for (long r = 0; r < rows; ++r) {
    double z = bias;
    for (std::size_t j = 0; j < weights.size(); ++j) {
      const long x = (r >> (weights.size() - 1 - j)) & 1;
      z += weights[j] * static_cast<double>(2 * x - 1);
    }
    const double p1 = 1.0 / (1.0 + std::exp(-z));
    table(r, 0) = 1.0 - p1;
    table(r, 1) = p1;
  }
  site.dist = CategoricalTable{std::move(table)};
  return site;
}

}  // namespace

ProgramSpec make_chain(int n, std::uint64_t seed) {
  if (n < 2) throw ValidationError("chain needs at least 2 nodes");
  RandomStream rng = RandomStream(seed).derive("graph/chain");
  ProgramSpec program;
  program.name = "chain" + std::to_string(n);
  for (int i = 0; i < n; ++i) {
    std::vector<int> parents;
    if (i > 0) parents.push_back(i - 1);
    program.sites.push_back(random_binary_site(
        "X" + std::to_string(i), parents, i == 0 ? 1 : 2, rng));
  }
  validate(program);
  return program;
}

ProgramSpec make_grid(int rows, int cols, std::uint64_t seed) {
  if (rows < 1 || cols < 1 || rows * cols < 2) {
    throw ValidationError("grid needs at least 2 nodes");
  }
  RandomStream rng = RandomStream(seed).derive("graph/grid");
  ProgramSpec program;
  program.name = "grid" + std::to_string(rows * cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      std::vector<int> parents;
      if (r > 0) parents.push_back((r - 1) * cols + c);  // from above
      if (c > 0) parents.push_back(r * cols + c - 1);    // from the left
      program.sites.push_back(random_binary_site(
          "X" + std::to_string(r * cols + c), parents,
          1L << parents.size(), rng));
    }
  }
  validate(program);
  return program;
}

ProgramSpec make_star(int n, std::uint64_t seed) {
  if (n < 2) throw ValidationError("star needs at least 2 nodes");
  RandomStream rng = RandomStream(seed).derive("graph/star");
  ProgramSpec program;
  program.name = "star" + std::to_string(n);
  program.sites.push_back(random_binary_site("X0", {}, 1, rng));
  for (int i = 1; i < n; ++i) {
    program.sites.push_back(
        random_binary_site("X" + std::to_string(i), {0}, 2, rng));
  }
  validate(program);
  return program;
}

ProgramSpec builtin_probprog() {
  ProgramSpec program;
  program.name = "probprog";

  SiteSpec t0;
  t0.name = "t0";
  t0.kind = SiteKind::Continuous;
  t0.dist = GaussianConst{0.0, 3.0};
  program.sites.push_back(t0);

  SiteSpec v;
  v.name = "v";
  v.kind = SiteKind::Continuous;
  v.dist = GammaConst{3.0, 1.0};
  program.sites.push_back(v);

  for (int i = 1; i <= 50; ++i) {
    SiteSpec t;
    t.name = "t" + std::to_string(i);
    t.kind = SiteKind::Continuous;
    // parents: previous t site, then v (site index 1)
    t.parents = {i == 1 ? 0 : i, 1};
    t.dist = BranchBernoulliGaussian{};
    t.proposable = false;  // mixed point-mass/density support
    program.sites.push_back(t);
  }
  validate(program);
  return program;
}

std::map<int, Eigen::VectorXd> enumerate_posterior(const ProgramSpec& program,
                                                   const Evidence& evidence) {
  const int n = program.n_sites();
  if (evidence.n_sites() != n) {
    throw ValidationError("evidence size does not match program");
  }
  double log_space = 0.0;
  for (const SiteSpec& site : program.sites) {
    if (site.kind != SiteKind::Categorical) {
      throw ValidationError(
          "enumeration requires an all-categorical program; site '" +
          site.name + "' is continuous");
    }
    log_space += std::log2(static_cast<double>(site.arity));
  }
  if (log_space > 20.0 + 1e-9) {
    throw ValidationError("joint state space exceeds 2^20 configurations");
  }

  std::vector<int> free_sites;
  Assignment values = Assignment::Zero(n);
  for (int i = 0; i < n; ++i) {
    if (evidence.observed(i)) {
      const int state = checked_state(program.sites[i], evidence.value(i), i);
      values[i] = state;
    } else {
      free_sites.push_back(i);
    }
  }

  std::map<int, Eigen::VectorXd> accum;
  for (int i : free_sites) {
    accum[i] = Eigen::VectorXd::Zero(program.sites[i].arity);
  }
  if (free_sites.empty()) return accum;

  // Mixed-radix sweep over the unobserved sites.
  std::vector<int> counter(free_sites.size(), 0);
  double total = 0.0;
  for (;;) {
    for (size_t j = 0; j < free_sites.size(); ++j) {
      values[free_sites[j]] = counter[j];
    }
    double p = 1.0;
    for (int i = 0; i < n && p > 0.0; ++i) {
      const auto& table = std::get<CategoricalTable>(program.sites[i].dist).table;
      const int row = parent_config_index(program, program.sites[i], values);
      p *= table(row, static_cast<int>(values[i]));
    }
    if (p > 0.0) {
      total += p;
      for (size_t j = 0; j < free_sites.size(); ++j) {
        accum[free_sites[j]][counter[j]] += p;
      }
    }
    // increment
    size_t j = 0;
    for (; j < counter.size(); ++j) {
      if (++counter[j] < program.sites[free_sites[j]].arity) break;
      counter[j] = 0;
    }
    if (j == counter.size()) break;
  }

  if (!(total > 0.0)) {
    throw ValidationError("evidence has zero probability under the program");
  }
  for (auto& [site, vec] : accum) vec /= total;
  return accum;
}

}  // namespace um
