#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

#include "um/neural.hpp"
#include "um/program.hpp"

namespace um {

struct TrainConfig {
  int batch_size = 512;
  int iterations = 5000;
  TrainMode mode = TrainMode::Standard;
  std::uint64_t seed = 0;
  int loss_log_every = 50;
};

struct TrainReport {
  std::vector<std::int64_t> steps;           // logged iteration numbers, 1-based
  std::vector<Eigen::VectorXd> head_losses;  // one mean loss per head per logged step
  std::vector<double> summed_losses;         // sum over heads per logged step
  std::vector<std::uint64_t> batch_digests;  // per-iteration hash of (inputs, targets)
  double wall_seconds = 0.0;
  std::int64_t final_step = 0;
};

// The three-step loop: sample a prior batch, mask it, fit. Standard mode
// takes one optimiser step on the summed loss; flexible mode walks the heads
// in site order, each head's own optimiser stepping the trunk and that head
// from a gradient restricted to its loss. All gradients of an iteration come
// from the same forward trace, and the batch stream is independent of the
// mode, so both modes consume identical batches given the same seed.
TrainReport train(UmModel& model, const ProgramSpec& program,
                  const TrainConfig& config);

// Advisory diagnostic: trailing-window mean summed loss at the end is below
// the one at the start.
bool loss_curve_monotone_check(const TrainReport& report, int window = 10);

// Rows `step,head_name,loss`, one per head per logged step plus a "summed"
// pseudo-head.
std::string train_csv(const TrainReport& report, const ProgramSpec& program);

// Shortest decimal form that round-trips the double exactly; used by every
// CSV/JSON writer so equal numbers always serialise to equal bytes.
std::string format_double(double v);

std::uint64_t digest_bytes(const void* data, std::size_t n,
                           std::uint64_t seed = 1469598103934665603ull);

}  // namespace um
