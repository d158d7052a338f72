#include "um/masking.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "um/errors.hpp"

namespace um {

EncodingLayout make_layout(const ProgramSpec& program) {
  EncodingLayout layout;
  int offset = 0;
  for (const SiteSpec& site : program.sites) {
    SiteSlots slots;
    slots.offset = offset;
    slots.value_width = site.kind == SiteKind::Categorical ? site.arity : 1;
    layout.sites.push_back(slots);
    offset += slots.width();
  }
  layout.input_width = offset;
  return layout;
}

PriorStats compute_prior_stats(const ProgramSpec& program,
                               std::int64_t n_samples, RandomStream& rng) {
  if (n_samples < 1000) {
    throw ValidationError("prior statistics need at least 1000 samples");
  }
  const int n = program.n_sites();
  PriorStats stats;
  stats.n_samples = n_samples;
  stats.probs.resize(n);
  stats.mean = Eigen::VectorXd::Zero(n);
  stats.std = Eigen::VectorXd::Ones(n);

  std::vector<Eigen::VectorXd> counts(n);
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd sum_sq = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < n; ++i) {
    if (program.sites[i].kind == SiteKind::Categorical) {
      counts[i] = Eigen::VectorXd::Zero(program.sites[i].arity);
    }
  }

  for (std::int64_t s = 0; s < n_samples; ++s) {
    const Assignment sample = ancestral_sample(program, rng);
    for (int i = 0; i < n; ++i) {
      if (program.sites[i].kind == SiteKind::Categorical) {
        counts[i][static_cast<int>(sample[i])] += 1.0;
      } else {
        sum[i] += sample[i];
        sum_sq[i] += sample[i] * sample[i];
      }
    }
  }

  for (int i = 0; i < n; ++i) {
    if (program.sites[i].kind == SiteKind::Categorical) {
      stats.probs[i] = counts[i] / static_cast<double>(n_samples);
    } else {
      const double mean = sum[i] / static_cast<double>(n_samples);
      const double var =
          std::max(0.0, sum_sq[i] / static_cast<double>(n_samples) - mean * mean);
      stats.mean[i] = mean;
      stats.std[i] = std::max(std::sqrt(var), kPriorStdFloor);
    }
  }
  return stats;
}

double standardize(const PriorStats& stats, int site, double value) {
  return (value - stats.mean[site]) / stats.std[site];
}

double destandardize(const PriorStats& stats, int site, double value) {
  return value * stats.std[site] + stats.mean[site];
}

Mask sample_mask(int n_sites, RandomStream& rng) {
  if (n_sites < 1) throw ValidationError("mask needs at least one site");
  const int n_masked = rng.uniform_int(n_sites + 1);
  std::vector<int> order(n_sites);
  std::iota(order.begin(), order.end(), 0);
  // partial Fisher-Yates: the first n_masked entries are the mask
  for (int i = 0; i < n_masked; ++i) {
    const int j = i + rng.uniform_int(n_sites - i);
    std::swap(order[i], order[j]);
  }
  Mask mask;
  mask.masked.assign(order.begin(), order.begin() + n_masked);
  std::sort(mask.masked.begin(), mask.masked.end());
  return mask;
}

Eigen::VectorXd encode(const ProgramSpec& program, const EncodingLayout& layout,
                       const PriorStats& stats, const Evidence& evidence) {
  if (evidence.n_sites() != program.n_sites()) {
    throw ValidationError("evidence size does not match program");
  }
  Eigen::VectorXd input = Eigen::VectorXd::Zero(layout.input_width);
  for (int i = 0; i < program.n_sites(); ++i) {
    const SiteSlots& slots = layout.sites[i];
    const SiteSpec& site = program.sites[i];
    if (evidence.observed(i)) {
      if (site.kind == SiteKind::Categorical) {
        const double value = evidence.value(i);
        const double rounded = std::nearbyint(value);
        if (rounded != value || rounded < 0.0 || rounded >= site.arity) {
          std::ostringstream msg;
          msg << "site " << site.name << ": observed value " << value
              << " outside [0, " << site.arity << ")";
          throw ValidationError(msg.str());
        }
        input[slots.offset + static_cast<int>(rounded)] = 1.0;
      } else {
        input[slots.offset] = standardize(stats, i, evidence.value(i));
      }
      input[slots.flag()] = 1.0;
    } else {
      if (site.kind == SiteKind::Categorical) {
        input.segment(slots.offset, slots.value_width) = stats.probs[i];
      }
      // continuous: standardised prior mean is 0; flag stays 0
    }
  }
  return input;
}

Eigen::VectorXd encode_target(const ProgramSpec& program, const PriorStats& stats,
                              const Assignment& sample) {
  Eigen::VectorXd target(program.n_sites());
  for (int i = 0; i < program.n_sites(); ++i) {
    target[i] = program.sites[i].kind == SiteKind::Categorical
                    ? sample[i]
                    : standardize(stats, i, sample[i]);
  }
  return target;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> make_training_pair(
    const ProgramSpec& program, const EncodingLayout& layout,
    const PriorStats& stats, const Assignment& sample, const Mask& mask) {
  Evidence evidence(program.n_sites());
  for (int i = 0; i < program.n_sites(); ++i) evidence.set(i, sample[i]);
  for (int m : mask.masked) evidence.clear(m);
  return {encode(program, layout, stats, evidence),
          encode_target(program, stats, sample)};
}

TrainingBatch make_training_batch(const ProgramSpec& program,
                                  const EncodingLayout& layout,
                                  const PriorStats& stats, int batch_size,
                                  RandomStream& rng) {
  TrainingBatch batch;
  batch.inputs.resize(batch_size, layout.input_width);
  batch.targets.resize(batch_size, program.n_sites());
  for (int b = 0; b < batch_size; ++b) {
    const Assignment sample = ancestral_sample(program, rng);
    const Mask mask = sample_mask(program.n_sites(), rng);
    auto [input, target] = make_training_pair(program, layout, stats, sample, mask);
    batch.inputs.row(b) = input.transpose();
    batch.targets.row(b) = target.transpose();
  }
  return batch;
}

}  // namespace um
