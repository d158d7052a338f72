#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "um/errors.hpp"
#include "um/masking.hpp"
#include "um/neural.hpp"
#include "um/program.hpp"
#include "um/rng.hpp"

using namespace um;

namespace {

// Binary + three-state + continuous: exercises both loss types and k > 2.
ProgramSpec mixed3() {
  ProgramSpec program;
  program.name = "mixed3";
  SiteSpec a;
  a.name = "A";
  a.kind = SiteKind::Categorical;
  a.arity = 2;
  a.dist = CategoricalTable{(Eigen::MatrixXd(1, 2) << 0.4, 0.6).finished()};
  SiteSpec b;
  b.name = "B";
  b.kind = SiteKind::Categorical;
  b.arity = 3;
  b.dist = CategoricalTable{
      (Eigen::MatrixXd(1, 3) << 0.2, 0.5, 0.3).finished()};
  SiteSpec c;
  c.name = "C";
  c.kind = SiteKind::Continuous;
  c.dist = GaussianConst{0.0, 1.0};
  program.sites = {a, b, c};
  validate(program);
  return program;
}

PriorStats neutral_stats(const ProgramSpec& program) {
  PriorStats stats;
  stats.mean = Eigen::VectorXd::Zero(program.n_sites());
  stats.std = Eigen::VectorXd::Ones(program.n_sites());
  for (const SiteSpec& site : program.sites) {
    stats.probs.push_back(
        site.kind == SiteKind::Categorical
            ? Eigen::VectorXd::Constant(site.arity, 1.0 / site.arity)
            : Eigen::VectorXd());
  }
  stats.n_samples = 1000;
  return stats;
}

UmModel small_model(const ProgramSpec& program, const Architecture& arch,
                    TrainMode mode, std::uint64_t seed) {
  RandomStream rng(seed);
  return build_um(program, arch, mode, make_layout(program),
                  neutral_stats(program), rng);
}

void zero_parameters(UmModel& model) {
  for (DenseLayer& layer : model.trunk) {
    layer.w.setZero();
    layer.b.setZero();
  }
  for (DenseLayer& head : model.heads) {
    head.w.setZero();
    head.b.setZero();
  }
}

double total_loss(const UmModel& model, const Eigen::MatrixXd& inputs,
                  const Eigen::MatrixXd& targets) {
  return head_losses(model, forward_batch(model, inputs), targets).sum();
}

// Smallest |pre-activation| across the trunk; finite differences are only
// trusted away from rectifier kinks.
double min_preactivation(const UmModel& model, const Eigen::MatrixXd& inputs) {
  Eigen::MatrixXd x = inputs;
  double lo = std::numeric_limits<double>::infinity();
  for (const DenseLayer& layer : model.trunk) {
    Eigen::MatrixXd z = (x * layer.w).rowwise() + layer.b;
    lo = std::min(lo, z.array().abs().minCoeff());
    x = model.arch.activation == Activation::Rectifier
            ? z.cwiseMax(0.0).eval()
            : z.array().tanh().matrix().eval();
  }
  return lo;
}

double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

void check_gradients(UmModel& model, const Eigen::MatrixXd& inputs,
                     const Eigen::MatrixXd& targets) {
  const ModelGrad grad = backward(model, inputs, targets);
  const double h = 1e-5;
  double worst = 0.0;
  auto probe = [&](double& param, double analytic) {
    const double saved = param;
    param = saved + h;
    const double up = total_loss(model, inputs, targets);
    param = saved - h;
    const double down = total_loss(model, inputs, targets);
    param = saved;
    worst = std::max(worst, rel_err((up - down) / (2.0 * h), analytic));
  };
  for (std::size_t l = 0; l < model.trunk.size(); ++l) {
    for (Eigen::Index i = 0; i < model.trunk[l].w.rows(); ++i)
      for (Eigen::Index j = 0; j < model.trunk[l].w.cols(); ++j)
        probe(model.trunk[l].w(i, j), grad.trunk[l].w(i, j));
    for (Eigen::Index j = 0; j < model.trunk[l].b.cols(); ++j)
      probe(model.trunk[l].b[j], grad.trunk[l].b[j]);
  }
  for (int head = 0; head < model.n_heads(); ++head) {
    for (Eigen::Index i = 0; i < model.heads[head].w.rows(); ++i)
      for (Eigen::Index j = 0; j < model.heads[head].w.cols(); ++j)
        probe(model.heads[head].w(i, j), grad.heads[head].w(i, j));
    for (Eigen::Index j = 0; j < model.heads[head].b.cols(); ++j)
      probe(model.heads[head].b[j], grad.heads[head].b[j]);
  }
  CHECK(worst < 1e-4);
}

Eigen::MatrixXd fd_inputs(const UmModel& model, int batch, std::uint64_t seed) {
  RandomStream rng(seed);
  for (int attempt = 0; attempt < 100; ++attempt) {
    Eigen::MatrixXd inputs(batch, model.layout.input_width);
    for (Eigen::Index r = 0; r < inputs.rows(); ++r)
      for (Eigen::Index c = 0; c < inputs.cols(); ++c)
        inputs(r, c) = rng.normal(0.0, 1.0);
    if (min_preactivation(model, inputs) > 1e-4) return inputs;
  }
  throw std::runtime_error("no kink-free probe input found");
}

}  // namespace

TEST_CASE("preset table matches the three published sizes") {
  CHECK(preset_architecture(1).hidden_layers == 2);
  CHECK(preset_architecture(1).hidden_width == 10);
  CHECK(preset_architecture(2).hidden_layers == 4);
  CHECK(preset_architecture(2).hidden_width == 35);
  CHECK(preset_architecture(3).hidden_layers == 8);
  CHECK(preset_architecture(3).hidden_width == 100);
  CHECK_THROWS_AS(preset_architecture(0), ValidationError);
  CHECK_THROWS_AS(preset_architecture(4), ValidationError);
}

TEST_CASE("build_um shapes follow the layout and preset") {
  const ProgramSpec chain = make_chain(4, 2);
  const EncodingLayout layout = make_layout(chain);
  RandomStream stats_rng(1);
  const PriorStats stats = compute_prior_stats(chain, 2000, stats_rng);
  RandomStream rng(5);
  const UmModel model =
      build_um(chain, 2, TrainMode::Standard, layout, stats, rng);

  REQUIRE(model.trunk.size() == 4);
  CHECK(model.trunk[0].w.rows() == 12);
  CHECK(model.trunk[0].w.cols() == 35);
  for (int l = 1; l < 4; ++l) {
    CHECK(model.trunk[l].w.rows() == 35);
    CHECK(model.trunk[l].w.cols() == 35);
  }
  REQUIRE(model.heads.size() == 4);
  for (const DenseLayer& head : model.heads) {
    CHECK(head.w.rows() == 35);
    CHECK(head.w.cols() == 2);
    CHECK(head.b.cols() == 2);
  }
  CHECK(model.optim.size() == 1);
  CHECK(model.optim[0].heads.size() == 4);

  RandomStream rng2(5);
  const UmModel again =
      build_um(chain, 2, TrainMode::Standard, layout, stats, rng2);
  for (std::size_t l = 0; l < model.trunk.size(); ++l)
    CHECK(model.trunk[l].w == again.trunk[l].w);

  RandomStream rng3(5);
  const UmModel flex =
      build_um(chain, 2, TrainMode::Flexible, layout, stats, rng3);
  CHECK(flex.optim.size() == 4);
  for (const AdamState& state : flex.optim) CHECK(state.trunk.size() == 4);
}

TEST_CASE("build_um rejects bad architectures") {
  const ProgramSpec program = mixed3();
  Architecture arch;
  arch.hidden_layers = 0;
  CHECK_THROWS_AS(small_model(program, arch, TrainMode::Standard, 1),
                  ValidationError);
  arch = Architecture{};
  arch.dropout_p = 1.0;
  CHECK_THROWS_AS(small_model(program, arch, TrainMode::Standard, 1),
                  ValidationError);
}

TEST_CASE("zero-weight model predicts uniform and zero") {
  const ProgramSpec program = mixed3();
  UmModel model = small_model(program, Architecture{}, TrainMode::Standard, 3);
  zero_parameters(model);

  const Eigen::VectorXd input =
      Eigen::VectorXd::Zero(model.layout.input_width);
  const auto preds = forward(model, input);
  CHECK(preds[0][0] == 0.5);
  CHECK(preds[0][1] == 0.5);
  for (int k = 0; k < 3; ++k) CHECK(preds[1][k] == doctest::Approx(1.0 / 3));
  CHECK(preds[2][0] == 0.0);
}

TEST_CASE("categorical outputs are distributions for any input") {
  const ProgramSpec program = mixed3();
  const UmModel model =
      small_model(program, Architecture{}, TrainMode::Standard, 4);
  RandomStream rng(6);
  for (int rep = 0; rep < 100; ++rep) {
    Eigen::VectorXd input(model.layout.input_width);
    for (int i = 0; i < input.size(); ++i) input[i] = rng.normal(0.0, 2.0);
    const auto preds = forward(model, input);
    for (int h = 0; h < 2; ++h) {
      CHECK(preds[h].sum() == doctest::Approx(1.0).epsilon(1e-9));
      CHECK(preds[h].minCoeff() > 0.0);
      CHECK(preds[h].maxCoeff() < 1.0);
    }
  }

  Eigen::VectorXd bad = Eigen::VectorXd::Zero(model.layout.input_width);
  bad[0] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(forward(model, bad), ValidationError);
}

TEST_CASE("losses reduce to their closed forms") {
  const ProgramSpec program = mixed3();
  UmModel model = small_model(program, Architecture{}, TrainMode::Standard, 5);
  zero_parameters(model);

  std::vector<Eigen::VectorXd> preds = {
      (Eigen::VectorXd(2) << 0.5, 0.5).finished(),
      (Eigen::VectorXd(3) << 0.2, 0.5, 0.3).finished(),
      (Eigen::VectorXd(1) << 1.5).finished()};
  Eigen::VectorXd target(3);
  target << 1.0, 2.0, 0.5;
  const Eigen::VectorXd losses = loss_per_head(model, preds, target);
  CHECK(losses[0] == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(losses[1] == doctest::Approx(-std::log(0.3)).epsilon(1e-12));
  CHECK(losses[2] == doctest::Approx(1.0).epsilon(1e-12));

  preds[2][0] = 0.5;
  CHECK(loss_per_head(model, preds, target)[2] == 0.0);

  // head_losses agrees with loss_per_head on a singleton batch of the
  // zero-weight model (softmax is uniform).
  const Eigen::MatrixXd input =
      Eigen::MatrixXd::Zero(1, model.layout.input_width);
  Eigen::MatrixXd targets(1, 3);
  targets << 1.0, 2.0, 0.0;
  const Eigen::VectorXd batch_losses =
      head_losses(model, forward_batch(model, input), targets);
  CHECK(batch_losses[0] == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(batch_losses[1] == doctest::Approx(std::log(3.0)).epsilon(1e-12));
  CHECK(batch_losses[2] == 0.0);
}

TEST_CASE("adam takes the closed-form first step and decays its rate") {
  AdamState state;
  CHECK(effective_lr(state) == 0.001);
  state.step = 10000;
  CHECK(effective_lr(state) == doctest::Approx(0.0005).epsilon(1e-12));

  Eigen::MatrixXd param = Eigen::MatrixXd::Zero(1, 1);
  Eigen::MatrixXd grad = Eigen::MatrixXd::Constant(1, 1, 1.0);
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(1, 1);
  Eigen::MatrixXd v = Eigen::MatrixXd::Zero(1, 1);
  adam_update(param, grad, m, v, 0.001, 1, 0.9, 0.999, 1e-8);
  // [FROZEN] first bias-corrected step: -lr / (1 + eps) up to rounding.
  CHECK(param(0, 0) == doctest::Approx(-0.000999999990000001).epsilon(1e-9));

  // Zero gradients never move parameters.
  const ProgramSpec program = mixed3();
  UmModel model = small_model(program, Architecture{}, TrainMode::Standard, 7);
  const UmModel before = model;
  ModelGrad zero;
  zero.trunk.resize(model.trunk.size());
  zero.heads.resize(model.n_heads());
  for (std::size_t l = 0; l < model.trunk.size(); ++l) {
    zero.trunk[l].w = Eigen::MatrixXd::Zero(model.trunk[l].w.rows(),
                                            model.trunk[l].w.cols());
    zero.trunk[l].b = Eigen::RowVectorXd::Zero(model.trunk[l].b.cols());
  }
  std::vector<int> all_heads;
  for (int h = 0; h < model.n_heads(); ++h) {
    all_heads.push_back(h);
    zero.heads[h].w = Eigen::MatrixXd::Zero(model.heads[h].w.rows(),
                                            model.heads[h].w.cols());
    zero.heads[h].b = Eigen::RowVectorXd::Zero(model.heads[h].b.cols());
  }
  for (int rep = 0; rep < 5; ++rep)
    adam_step(model.optim[0], model, zero, all_heads);
  for (std::size_t l = 0; l < model.trunk.size(); ++l)
    CHECK(model.trunk[l].w == before.trunk[l].w);
  CHECK(model.optim[0].step == 5);

  // Non-finite gradients are rejected with the tensor named.
  zero.trunk[0].w(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(adam_step(model.optim[0], model, zero, all_heads),
                  NumericError);
}

TEST_CASE("backprop matches central finite differences") {
  const ProgramSpec program = mixed3();
  Eigen::MatrixXd targets(2, 3);
  targets << 0.0, 2.0, 0.3, 1.0, 0.0, -1.1;

  for (std::uint64_t seed : {11ull, 12ull, 13ull}) {
    Architecture arch;  // preset-1 shape, rectifier
    UmModel model = small_model(program, arch, TrainMode::Standard, seed);
    const Eigen::MatrixXd inputs = fd_inputs(model, 2, seed + 100);
    check_gradients(model, inputs, targets);
  }

  Architecture tanh_arch;
  tanh_arch.activation = Activation::Tanh;
  UmModel model = small_model(program, tanh_arch, TrainMode::Standard, 21);
  const Eigen::MatrixXd inputs = fd_inputs(model, 2, 22);
  check_gradients(model, inputs, targets);
}

TEST_CASE("single-head backward leaves other heads untouched") {
  const ProgramSpec program = mixed3();
  UmModel model = small_model(program, Architecture{}, TrainMode::Flexible, 9);
  Eigen::MatrixXd targets(1, 3);
  targets << 1.0, 0.0, 0.25;
  const Eigen::MatrixXd inputs =
      Eigen::MatrixXd::Constant(1, model.layout.input_width, 0.5);

  const ModelGrad grad = backward(model, inputs, targets, 1);
  CHECK(grad.heads[0].w.size() == 0);
  CHECK(grad.heads[2].w.size() == 0);
  CHECK(grad.heads[1].w.size() > 0);

  // Stepping head 1's optimiser moves the trunk and head 1 only.
  const UmModel before = model;
  adam_step(model.optim[1], model, grad, {1});
  CHECK(model.heads[0].w == before.heads[0].w);
  CHECK(model.heads[2].w == before.heads[2].w);
  CHECK(model.heads[1].w != before.heads[1].w);
  CHECK(model.trunk[0].w != before.trunk[0].w);

  // An exact continuous match yields a zero gradient for that head.
  UmModel zeroed = before;
  zero_parameters(zeroed);
  Eigen::MatrixXd exact_targets(1, 3);
  exact_targets << 0.0, 0.0, 0.0;  // continuous head predicts 0 exactly
  const Eigen::MatrixXd zin =
      Eigen::MatrixXd::Zero(1, zeroed.layout.input_width);
  const ModelGrad g2 = backward(zeroed, zin, exact_targets, 2);
  CHECK(g2.heads[2].w.isZero(0.0));
  for (const LayerGrad& lg : g2.trunk) CHECK(lg.w.isZero(0.0));
}

TEST_CASE("dropout perturbs training forwards only") {
  const ProgramSpec program = mixed3();
  Architecture arch;
  arch.dropout_p = 0.5;
  UmModel model = small_model(program, arch, TrainMode::Standard, 31);
  const Eigen::MatrixXd inputs =
      Eigen::MatrixXd::Constant(4, model.layout.input_width, 1.0);

  RandomStream drop(77);
  const ForwardTrace trained = forward_batch(model, inputs, true, &drop);
  const ForwardTrace plain = forward_batch(model, inputs);
  CHECK(trained.drop_mask.size() == model.trunk.size());
  CHECK(plain.drop_mask.empty());
  CHECK(trained.head_out[0] != plain.head_out[0]);

  // Inference path ignores dropout config entirely.
  const ForwardTrace again = forward_batch(model, inputs);
  CHECK(plain.head_out[0] == again.head_out[0]);
}
