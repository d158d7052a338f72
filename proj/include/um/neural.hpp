#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "um/masking.hpp"
#include "um/program.hpp"
#include "um/rng.hpp"

namespace um {

enum class Activation { Rectifier, Tanh };
enum class TrainMode { Standard, Flexible };

std::string to_string(Activation a);
std::string to_string(TrainMode m);
Activation activation_from_string(const std::string& s);
TrainMode mode_from_string(const std::string& s);

struct Architecture {
  int hidden_layers = 2;  // h
  int hidden_width = 10;  // s
  Activation activation = Activation::Rectifier;
  double dropout_p = 0.0;
};

// Size presets 1..3: (2,10), (4,35), (8,100).
Architecture preset_architecture(int preset);

// Batch convention: rows are samples, y = x * w + b.
struct DenseLayer {
  Eigen::MatrixXd w;     // in x out
  Eigen::RowVectorXd b;  // out
};

struct LayerGrad {
  Eigen::MatrixXd w;
  Eigen::RowVectorXd b;
};

// Gradient of the (mean-over-batch, summed-over-selected-heads) loss with
// respect to every parameter; unselected heads hold zero blocks.
struct ModelGrad {
  std::vector<LayerGrad> trunk;
  std::vector<LayerGrad> heads;
};

struct Moments {
  Eigen::MatrixXd m_w, v_w;
  Eigen::RowVectorXd m_b, v_b;
};

// ADAM with inverse-time learning-rate decay: lr_t = lr0 / (1 + decay * t),
// t counting completed steps of this state.
struct AdamState {
  double lr0 = 1e-3;
  double decay = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::int64_t step = 0;
  std::vector<Moments> trunk;  // one per trunk layer
  std::vector<Moments> heads;  // indexed by site; unowned entries stay empty
};

double effective_lr(const AdamState& state);

// One ADAM update of a single tensor; exposed for direct testing.
// t1 is the 1-based step count used for bias correction.
void adam_update(Eigen::MatrixXd& param, const Eigen::MatrixXd& grad,
                 Eigen::MatrixXd& m, Eigen::MatrixXd& v, double lr,
                 std::int64_t t1, double beta1, double beta2, double epsilon);
void adam_update(Eigen::RowVectorXd& param, const Eigen::RowVectorXd& grad,
                 Eigen::RowVectorXd& m, Eigen::RowVectorXd& v, double lr,
                 std::int64_t t1, double beta1, double beta2, double epsilon);

// Shared trunk plus one output head per site: k softmax logits for a
// categorical site, one linear unit for a continuous site.
struct UmModel {
  EncodingLayout layout;
  PriorStats stats;
  Architecture arch;
  TrainMode mode = TrainMode::Standard;
  std::vector<DenseLayer> trunk;
  std::vector<DenseLayer> heads;
  // Standard mode: one state driving everything. Flexible mode: one state
  // per head, each owning moments for the trunk and its own head.
  std::vector<AdamState> optim;
  std::uint64_t seed = 0;
  std::int64_t steps_trained = 0;

  int n_heads() const { return static_cast<int>(heads.size()); }
};

UmModel build_um(const ProgramSpec& program, const Architecture& arch,
                 TrainMode mode, const EncodingLayout& layout,
                 const PriorStats& stats, RandomStream& rng);
UmModel build_um(const ProgramSpec& program, int preset, TrainMode mode,
                 const EncodingLayout& layout, const PriorStats& stats,
                 RandomStream& rng);

// Fresh zero-moment optimiser state(s) for the model's mode, with step
// counters continuing from steps_trained; used at build time and when a
// checkpoint (which does not persist moments) is loaded.
void reset_optimizer(UmModel& model);

// Everything backward needs from a batch forward pass.
struct ForwardTrace {
  Eigen::MatrixXd input;                    // B x D
  std::vector<Eigen::MatrixXd> activation;  // per trunk layer, B x s
  std::vector<Eigen::MatrixXd> drop_mask;   // inverted-dropout scale, may be empty
  std::vector<Eigen::MatrixXd> head_out;    // logits / linear means
};

// training=true applies dropout (when configured) using dropout_rng.
ForwardTrace forward_batch(const UmModel& model, const Eigen::MatrixXd& inputs,
                           bool training = false,
                           RandomStream* dropout_rng = nullptr);

// Single-pass prediction: probability vector per categorical site (softmax),
// standardised mean per continuous site (1-vector). Dropout disabled.
std::vector<Eigen::VectorXd> forward(const UmModel& model,
                                     const Eigen::VectorXd& input);

// Per-site losses for one example: categorical -log p[target state],
// continuous squared error in standardised space.
Eigen::VectorXd loss_per_head(const UmModel& model,
                              const std::vector<Eigen::VectorXd>& predictions,
                              const Eigen::VectorXd& target);

// Mean-over-batch loss per head, computed stably from logits.
Eigen::VectorXd head_losses(const UmModel& model, const ForwardTrace& trace,
                            const Eigen::MatrixXd& targets);

// Exact gradients of sum over selected heads of mean-over-batch loss.
// only_head selects a single head; nullopt selects all.
ModelGrad backward(const UmModel& model, const Eigen::MatrixXd& inputs,
                   const Eigen::MatrixXd& targets,
                   std::optional<int> only_head = {});
ModelGrad backward_from_trace(const UmModel& model, const ForwardTrace& trace,
                              const Eigen::MatrixXd& targets,
                              std::optional<int> only_head = {});

// One optimisation step over the trunk and the listed heads. Throws
// NumericError naming the offending tensor on non-finite gradients, and
// verifies updated parameters stay finite.
void adam_step(AdamState& state, UmModel& model, const ModelGrad& grad,
               const std::vector<int>& head_ids);

}  // namespace um
