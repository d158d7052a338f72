#include "um/neural.hpp"

#include <cmath>
#include <string>

#include "um/errors.hpp"

namespace um {

namespace {

void check_finite(const Eigen::MatrixXd& m, const Eigen::RowVectorXd& b,
                  const std::string& what) {
  if (!m.allFinite() || !b.allFinite()) {
    throw NumericError("non-finite values in " + what);
  }
}

Eigen::MatrixXd activate(const Eigen::MatrixXd& z, Activation a) {
  if (a == Activation::Rectifier) return z.cwiseMax(0.0);
  return z.array().tanh().matrix();
}

// Derivative from the post-activation value (exact for both options).
Eigen::ArrayXXd activation_grad(const Eigen::MatrixXd& act, Activation a) {
  if (a == Activation::Rectifier) {
    return (act.array() > 0.0).cast<double>();
  }
  return 1.0 - act.array().square();
}

Eigen::VectorXd row_log_sum_exp(const Eigen::MatrixXd& z) {
  const Eigen::VectorXd mx = z.rowwise().maxCoeff();
  return mx.array() +
         (z.colwise() - mx).array().exp().rowwise().sum().log();
}

int target_state(double t) { return static_cast<int>(t); }

}  // namespace

std::string to_string(Activation a) {
  return a == Activation::Rectifier ? "relu" : "tanh";
}

std::string to_string(TrainMode m) {
  return m == TrainMode::Standard ? "standard" : "flexible";
}

Activation activation_from_string(const std::string& s) {
  if (s == "relu" || s == "rectifier") return Activation::Rectifier;
  if (s == "tanh") return Activation::Tanh;
  throw ValidationError("unknown activation '" + s + "'");
}

TrainMode mode_from_string(const std::string& s) {
  if (s == "standard") return TrainMode::Standard;
  if (s == "flexible" || s == "flex") return TrainMode::Flexible;
  throw ValidationError("unknown training mode '" + s + "'");
}

Architecture preset_architecture(int preset) {
  Architecture arch;
  switch (preset) {
    case 1: arch.hidden_layers = 2; arch.hidden_width = 10; break;
    case 2: arch.hidden_layers = 4; arch.hidden_width = 35; break;
    case 3: arch.hidden_layers = 8; arch.hidden_width = 100; break;
    default:
      throw ValidationError("architecture preset must be 1, 2 or 3");
  }
  return arch;
}

double effective_lr(const AdamState& state) {
  return state.lr0 / (1.0 + state.decay * static_cast<double>(state.step));
}

namespace {

template <typename T>
void adam_update_impl(T& param, const T& grad, T& m, T& v, double lr,
                      std::int64_t t1, double beta1, double beta2,
                      double epsilon) {
  m = beta1 * m + (1.0 - beta1) * grad;
  v = (beta2 * v.array() + (1.0 - beta2) * grad.array().square()).matrix();
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t1));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t1));
  param.array() -=
      lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + epsilon);
}

}  // namespace

void adam_update(Eigen::MatrixXd& param, const Eigen::MatrixXd& grad,
                 Eigen::MatrixXd& m, Eigen::MatrixXd& v, double lr,
                 std::int64_t t1, double beta1, double beta2, double epsilon) {
  adam_update_impl(param, grad, m, v, lr, t1, beta1, beta2, epsilon);
}

void adam_update(Eigen::RowVectorXd& param, const Eigen::RowVectorXd& grad,
                 Eigen::RowVectorXd& m, Eigen::RowVectorXd& v, double lr,
                 std::int64_t t1, double beta1, double beta2, double epsilon) {
  adam_update_impl(param, grad, m, v, lr, t1, beta1, beta2, epsilon);
}

namespace {

DenseLayer init_layer(int fan_in, int fan_out, RandomStream& rng) {
  DenseLayer layer;
  layer.w.resize(fan_in, fan_out);
  const double bound = std::sqrt(6.0 / (fan_in + fan_out));
  for (int i = 0; i < fan_in; ++i) {
    for (int j = 0; j < fan_out; ++j) {
      layer.w(i, j) = (2.0 * rng.uniform() - 1.0) * bound;
    }
  }
  layer.b = Eigen::RowVectorXd::Zero(fan_out);
  return layer;
}

Moments zero_moments(const DenseLayer& layer) {
  Moments m;
  m.m_w = Eigen::MatrixXd::Zero(layer.w.rows(), layer.w.cols());
  m.v_w = m.m_w;
  m.m_b = Eigen::RowVectorXd::Zero(layer.b.cols());
  m.v_b = m.m_b;
  return m;
}

}  // namespace

UmModel build_um(const ProgramSpec& program, const Architecture& arch,
                 TrainMode mode, const EncodingLayout& layout,
                 const PriorStats& stats, RandomStream& rng) {
  if (arch.hidden_layers < 1 || arch.hidden_width < 1) {
    throw ValidationError("architecture needs h >= 1 and s >= 1");
  }
  if (!(arch.dropout_p >= 0.0 && arch.dropout_p < 1.0)) {
    throw ValidationError("dropout probability must be in [0, 1)");
  }
  if (layout.input_width <= 0 ||
      static_cast<int>(layout.sites.size()) != program.n_sites()) {
    throw ValidationError("layout does not match program");
  }

  UmModel model;
  model.layout = layout;
  model.stats = stats;
  model.arch = arch;
  model.mode = mode;
  model.seed = rng.key();

  int in = layout.input_width;
  for (int l = 0; l < arch.hidden_layers; ++l) {
    model.trunk.push_back(init_layer(in, arch.hidden_width, rng));
    in = arch.hidden_width;
  }
  for (const SiteSpec& site : program.sites) {
    const int out = site.kind == SiteKind::Categorical ? site.arity : 1;
    model.heads.push_back(init_layer(arch.hidden_width, out, rng));
  }

  reset_optimizer(model);
  return model;
}

void reset_optimizer(UmModel& model) {
  model.optim.clear();
  const int n = model.n_heads();
  if (model.mode == TrainMode::Standard) {
    AdamState state;
    state.step = model.steps_trained;
    for (const auto& layer : model.trunk) state.trunk.push_back(zero_moments(layer));
    for (const auto& head : model.heads) state.heads.push_back(zero_moments(head));
    model.optim.push_back(std::move(state));
  } else {
    for (int h = 0; h < n; ++h) {
      AdamState state;
      state.step = model.steps_trained;
      for (const auto& layer : model.trunk) state.trunk.push_back(zero_moments(layer));
      state.heads.resize(n);
      state.heads[h] = zero_moments(model.heads[h]);
      model.optim.push_back(std::move(state));
    }
  }
}

UmModel build_um(const ProgramSpec& program, int preset, TrainMode mode,
                 const EncodingLayout& layout, const PriorStats& stats,
                 RandomStream& rng) {
  return build_um(program, preset_architecture(preset), mode, layout, stats, rng);
}

ForwardTrace forward_batch(const UmModel& model, const Eigen::MatrixXd& inputs,
                           bool training, RandomStream* dropout_rng) {
  if (inputs.cols() != model.layout.input_width) {
    throw ValidationError("input width does not match model");
  }
  if (!inputs.allFinite()) {
    throw ValidationError("non-finite network input");
  }
  const bool use_dropout =
      training && model.arch.dropout_p > 0.0 && dropout_rng != nullptr;
  const double keep = 1.0 - model.arch.dropout_p;

  ForwardTrace trace;
  trace.input = inputs;
  trace.activation.reserve(model.trunk.size());
  trace.drop_mask.reserve(use_dropout ? model.trunk.size() : 0);
  trace.head_out.reserve(model.heads.size());

  // activation[] stores the pre-dropout values; the signal flowing to the
  // next layer has the (inverted, 1/keep-scaled) mask applied.
  const Eigen::MatrixXd* current = &trace.input;
  Eigen::MatrixXd dropped;
  for (const DenseLayer& layer : model.trunk) {
    Eigen::MatrixXd z = (*current * layer.w).rowwise() + layer.b;
    trace.activation.push_back(activate(z, model.arch.activation));
    if (use_dropout) {
      Eigen::MatrixXd mask(z.rows(), z.cols());
      for (Eigen::Index r = 0; r < mask.rows(); ++r) {
        for (Eigen::Index c = 0; c < mask.cols(); ++c) {
          mask(r, c) = dropout_rng->bernoulli(keep) ? 1.0 / keep : 0.0;
        }
      }
      trace.drop_mask.push_back(std::move(mask));
      dropped = trace.activation.back().cwiseProduct(trace.drop_mask.back());
      current = &dropped;
    } else {
      current = &trace.activation.back();
    }
  }
  for (const DenseLayer& head : model.heads) {
    trace.head_out.push_back((*current * head.w).rowwise() + head.b);
  }
  return trace;
}

std::vector<Eigen::VectorXd> forward(const UmModel& model,
                                     const Eigen::VectorXd& input) {
  const ForwardTrace trace = forward_batch(model, input.transpose());
  std::vector<Eigen::VectorXd> predictions;
  predictions.reserve(model.heads.size());
  for (const Eigen::MatrixXd& out : trace.head_out) {
    if (out.cols() > 1) {
      Eigen::VectorXd logits = out.row(0);
      const double mx = logits.maxCoeff();
      Eigen::VectorXd p = (logits.array() - mx).exp();
      p /= p.sum();
      predictions.push_back(std::move(p));
    } else {
      predictions.push_back(out.row(0));
    }
  }
  return predictions;
}

Eigen::VectorXd loss_per_head(const UmModel& model,
                              const std::vector<Eigen::VectorXd>& predictions,
                              const Eigen::VectorXd& target) {
  const int n = model.n_heads();
  Eigen::VectorXd losses(n);
  for (int h = 0; h < n; ++h) {
    if (predictions[h].size() > 1) {
      losses[h] = -std::log(predictions[h][target_state(target[h])]);
    } else {
      const double d = predictions[h][0] - target[h];
      losses[h] = d * d;
    }
  }
  return losses;
}

Eigen::VectorXd head_losses(const UmModel& model, const ForwardTrace& trace,
                            const Eigen::MatrixXd& targets) {
  const int n = model.n_heads();
  const Eigen::Index batch = trace.input.rows();
  Eigen::VectorXd losses = Eigen::VectorXd::Zero(n);
  for (int h = 0; h < n; ++h) {
    const Eigen::MatrixXd& out = trace.head_out[h];
    if (out.cols() > 1) {
      const Eigen::VectorXd lse = row_log_sum_exp(out);
      double total = 0.0;
      for (Eigen::Index b = 0; b < batch; ++b) {
        total += lse[b] - out(b, target_state(targets(b, h)));
      }
      losses[h] = total / static_cast<double>(batch);
    } else {
      losses[h] =
          (out.col(0) - targets.col(h)).squaredNorm() / static_cast<double>(batch);
    }
  }
  return losses;
}

ModelGrad backward_from_trace(const UmModel& model, const ForwardTrace& trace,
                              const Eigen::MatrixXd& targets,
                              std::optional<int> only_head) {
  const Eigen::Index batch = trace.input.rows();
  const double inv_batch = 1.0 / static_cast<double>(batch);
  const int n = model.n_heads();
  const bool dropout = !trace.drop_mask.empty();

  auto layer_input = [&](int l) -> Eigen::MatrixXd {
    // input feeding trunk layer l (or the heads for l == depth)
    if (l == 0) return trace.input;
    const Eigen::MatrixXd& act = trace.activation[l - 1];
    return dropout ? act.cwiseProduct(trace.drop_mask[l - 1]).eval() : act;
  };

  ModelGrad grad;
  grad.trunk.resize(model.trunk.size());
  grad.heads.resize(n);

  const int depth = static_cast<int>(model.trunk.size());
  const Eigen::MatrixXd top = layer_input(depth);
  Eigen::MatrixXd delta = Eigen::MatrixXd::Zero(batch, top.cols());

  for (int h = 0; h < n; ++h) {
    if (only_head && *only_head != h) continue;
    const Eigen::MatrixXd& out = trace.head_out[h];
    Eigen::MatrixXd g(batch, out.cols());
    if (out.cols() > 1) {
      // softmax cross-entropy from logits
      const Eigen::VectorXd lse = row_log_sum_exp(out);
      g = ((out.colwise() - lse).array().exp()).matrix();
      for (Eigen::Index b = 0; b < batch; ++b) {
        g(b, target_state(targets(b, h))) -= 1.0;
      }
    } else {
      g = 2.0 * (out.col(0) - targets.col(h));
    }
    g *= inv_batch;
    grad.heads[h].w = top.transpose() * g;
    grad.heads[h].b = g.colwise().sum();
    delta.noalias() += g * model.heads[h].w.transpose();
  }

  for (int l = depth - 1; l >= 0; --l) {
    if (dropout) delta = delta.cwiseProduct(trace.drop_mask[l]);
    const Eigen::MatrixXd dz =
        (delta.array() * activation_grad(trace.activation[l], model.arch.activation))
            .matrix();
    const Eigen::MatrixXd in = layer_input(l);
    grad.trunk[l].w = in.transpose() * dz;
    grad.trunk[l].b = dz.colwise().sum();
    if (l > 0) delta.noalias() = dz * model.trunk[l].w.transpose();
  }
  return grad;
}

ModelGrad backward(const UmModel& model, const Eigen::MatrixXd& inputs,
                   const Eigen::MatrixXd& targets,
                   std::optional<int> only_head) {
  return backward_from_trace(model, forward_batch(model, inputs), targets,
                             only_head);
}

void adam_step(AdamState& state, UmModel& model, const ModelGrad& grad,
               const std::vector<int>& head_ids) {
  for (size_t l = 0; l < model.trunk.size(); ++l) {
    check_finite(grad.trunk[l].w, grad.trunk[l].b,
                 "gradient of trunk layer " + std::to_string(l));
  }
  for (int h : head_ids) {
    check_finite(grad.heads[h].w, grad.heads[h].b,
                 "gradient of head " + std::to_string(h));
  }

  const double lr = effective_lr(state);
  const std::int64_t t1 = state.step + 1;
  for (size_t l = 0; l < model.trunk.size(); ++l) {
    DenseLayer& layer = model.trunk[l];
    Moments& mom = state.trunk[l];
    adam_update(layer.w, grad.trunk[l].w, mom.m_w, mom.v_w, lr, t1,
                state.beta1, state.beta2, state.epsilon);
    adam_update(layer.b, grad.trunk[l].b, mom.m_b, mom.v_b, lr, t1,
                state.beta1, state.beta2, state.epsilon);
    check_finite(layer.w, layer.b, "trunk layer " + std::to_string(l));
  }
  for (int h : head_ids) {
    DenseLayer& head = model.heads[h];
    Moments& mom = state.heads[h];
    adam_update(head.w, grad.heads[h].w, mom.m_w, mom.v_w, lr, t1,
                state.beta1, state.beta2, state.epsilon);
    adam_update(head.b, grad.heads[h].b, mom.m_b, mom.v_b, lr, t1,
                state.beta1, state.beta2, state.epsilon);
    check_finite(head.w, head.b, "head " + std::to_string(h));
  }
  ++state.step;
}

}  // namespace um
