#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <utility>
#include <vector>

#include "um/program.hpp"
#include "um/rng.hpp"

namespace um {

// Where each site lives in the network input vector. A categorical site of
// arity k occupies k probability slots plus one observed-flag slot; a
// continuous site one standardised-value slot plus one flag slot. Ranges are
// contiguous, non-overlapping and cover [0, D).
struct SiteSlots {
  int offset = 0;       // first value slot
  int value_width = 0;  // k for categorical, 1 for continuous
  int flag() const { return offset + value_width; }
  int width() const { return value_width + 1; }
};

struct EncodingLayout {
  std::vector<SiteSlots> sites;
  int input_width = 0;  // D
};

EncodingLayout make_layout(const ProgramSpec& program);

// Prior marginals estimated from ancestral samples: probability vector per
// categorical site, mean/std per continuous site (std floored at 1e-6).
// Masked slots in the encoding are filled from these.
struct PriorStats {
  std::vector<Eigen::VectorXd> probs;  // empty for continuous sites
  Eigen::VectorXd mean;                // zero for categorical sites
  Eigen::VectorXd std;                 // one for categorical sites
  std::int64_t n_samples = 0;
};

constexpr double kPriorStdFloor = 1e-6;

// n_samples >= 1000; deterministic given the stream.
PriorStats compute_prior_stats(const ProgramSpec& program,
                               std::int64_t n_samples, RandomStream& rng);

double standardize(const PriorStats& stats, int site, double value);
double destandardize(const PriorStats& stats, int site, double value);

// Sites whose values are hidden from the training input.
struct Mask {
  std::vector<int> masked;  // ascending
};

// Mask size i ~ DiscreteUniform{0..n_sites} (both ends inclusive), then i
// distinct sites uniformly without replacement.
Mask sample_mask(int n_sites, RandomStream& rng);

// Observed sites contribute their value slots (one-hot / standardised) with
// flag 1; unobserved sites contribute the prior (marginal vector / zero)
// with flag 0.
Eigen::VectorXd encode(const ProgramSpec& program, const EncodingLayout& layout,
                       const PriorStats& stats, const Evidence& evidence);

// Training target over ALL sites: categorical state index or standardised
// real, in site order.
Eigen::VectorXd encode_target(const ProgramSpec& program, const PriorStats& stats,
                              const Assignment& sample);

// Masked view of a full prior sample paired with its all-sites target.
std::pair<Eigen::VectorXd, Eigen::VectorXd> make_training_pair(
    const ProgramSpec& program, const EncodingLayout& layout,
    const PriorStats& stats, const Assignment& sample, const Mask& mask);

struct TrainingBatch {
  Eigen::MatrixXd inputs;   // batch x D
  Eigen::MatrixXd targets;  // batch x N
};

// Fresh prior samples, one fresh mask each. Draw order is fixed (sample
// then mask, row by row) so every consumer sees the same stream layout.
TrainingBatch make_training_batch(const ProgramSpec& program,
                                  const EncodingLayout& layout,
                                  const PriorStats& stats, int batch_size,
                                  RandomStream& rng);

}  // namespace um
