#include "um/training.hpp"

#include <charconv>
#include <chrono>
#include <cstring>
#include <numeric>
#include <sstream>

#include "um/errors.hpp"
#include "um/masking.hpp"

namespace um {

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::uint64_t digest_bytes(const void* data, std::size_t n,
                           std::uint64_t seed) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

namespace {

std::uint64_t digest_batch(const TrainingBatch& batch) {
  std::uint64_t h = digest_bytes(
      batch.inputs.data(), sizeof(double) * batch.inputs.size());
  return digest_bytes(batch.targets.data(),
                      sizeof(double) * batch.targets.size(), h);
}

}  // namespace

TrainReport train(UmModel& model, const ProgramSpec& program,
                  const TrainConfig& config) {
  if (config.batch_size < 1) throw ValidationError("batch_size must be >= 1");
  if (config.iterations < 1) throw ValidationError("iterations must be >= 1");
  if (config.loss_log_every < 1)
    throw ValidationError("loss_log_every must be >= 1");
  if (config.mode != model.mode)
    throw ValidationError("train mode does not match the model's mode");
  if (model.n_heads() != program.n_sites())
    throw ValidationError("model was built for a different program");

  const int n = program.n_sites();
  std::vector<int> all_heads(n);
  std::iota(all_heads.begin(), all_heads.end(), 0);

  // Batch randomness is derived from the config seed alone so that standard
  // and flexible runs see the same data stream; dropout gets its own branch.
  RandomStream batch_root = RandomStream(config.seed).derive("train/batch");
  RandomStream drop_root = RandomStream(config.seed).derive("train/dropout");

  TrainReport report;
  report.batch_digests.reserve(config.iterations);

  const auto t0 = std::chrono::steady_clock::now();
  for (int iter = 0; iter < config.iterations; ++iter) {
    RandomStream batch_rng = batch_root.derive(static_cast<std::uint64_t>(iter));
    TrainingBatch batch = make_training_batch(program, model.layout,
                                              model.stats, config.batch_size,
                                              batch_rng);
    report.batch_digests.push_back(digest_batch(batch));

    RandomStream drop_rng = drop_root.derive(static_cast<std::uint64_t>(iter));
    try {
      ForwardTrace trace = forward_batch(model, batch.inputs, true, &drop_rng);
      const bool log_now = (iter + 1) % config.loss_log_every == 0 ||
                           iter == 0 || iter + 1 == config.iterations;
      if (log_now) {
        Eigen::VectorXd losses = head_losses(model, trace, batch.targets);
        report.steps.push_back(iter + 1);
        report.head_losses.push_back(losses);
        report.summed_losses.push_back(losses.sum());
      }
      if (model.mode == TrainMode::Standard) {
        ModelGrad grad = backward_from_trace(model, trace, batch.targets);
        adam_step(model.optim[0], model, grad, all_heads);
      } else {
        for (int h = 0; h < n; ++h) {
          ModelGrad grad = backward_from_trace(model, trace, batch.targets, h);
          adam_step(model.optim[h], model, grad, {h});
        }
      }
    } catch (const NumericError& e) {
      throw NumericError("iteration " + std::to_string(iter + 1) + ": " +
                         e.what());
    }
    ++model.steps_trained;
  }
  const auto t1 = std::chrono::steady_clock::now();
  report.wall_seconds = std::chrono::duration<double>(t1 - t0).count();
  report.final_step = model.steps_trained;
  return report;
}

bool loss_curve_monotone_check(const TrainReport& report, int window) {
  const int n = static_cast<int>(report.summed_losses.size());
  if (window < 1 || n < 2 * window) return false;
  double head = 0.0, tail = 0.0;
  for (int i = 0; i < window; ++i) {
    head += report.summed_losses[i];
    tail += report.summed_losses[n - 1 - i];
  }
  return tail < head;
}

std::string train_csv(const TrainReport& report, const ProgramSpec& program) {
  std::ostringstream out;
  out << "step,head_name,loss\n";
  for (std::size_t i = 0; i < report.steps.size(); ++i) {
    for (int h = 0; h < report.head_losses[i].size(); ++h) {
      out << report.steps[i] << ',' << program.sites[h].name << ','
          << format_double(report.head_losses[i][h]) << '\n';
    }
    out << report.steps[i] << ",summed,"
        << format_double(report.summed_losses[i]) << '\n';
  }
  return out.str();
}

}  // namespace um
