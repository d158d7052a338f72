#include <json.hpp>

#include "um/errors.hpp"
#include "um/masking.hpp"
#include "um/serialize.hpp"

namespace um {

using nlohmann::json;

namespace {

json layer_to_json(const DenseLayer& layer) {
  json w = json::array();
  for (Eigen::Index r = 0; r < layer.w.rows(); ++r) {
    for (Eigen::Index c = 0; c < layer.w.cols(); ++c)
      w.push_back(layer.w(r, c));
  }
  json b = json::array();
  for (Eigen::Index c = 0; c < layer.b.cols(); ++c) b.push_back(layer.b[c]);
  return json{{"rows", layer.w.rows()},
              {"cols", layer.w.cols()},
              {"w", std::move(w)},
              {"b", std::move(b)}};
}

DenseLayer layer_from_json(const json& j, const std::string& what) {
  const Eigen::Index rows = j.at("rows").get<Eigen::Index>();
  const Eigen::Index cols = j.at("cols").get<Eigen::Index>();
  const json& w = j.at("w");
  const json& b = j.at("b");
  if (rows < 1 || cols < 1 ||
      static_cast<Eigen::Index>(w.size()) != rows * cols ||
      static_cast<Eigen::Index>(b.size()) != cols)
    throw ValidationError("checkpoint " + what + " has inconsistent shapes");

  DenseLayer layer;
  layer.w.resize(rows, cols);
  std::size_t k = 0;
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) layer.w(r, c) = w[k++].get<double>();
  }
  layer.b.resize(cols);
  for (Eigen::Index c = 0; c < cols; ++c)
    layer.b[c] = b[static_cast<std::size_t>(c)].get<double>();
  if (!layer.w.allFinite() || !layer.b.allFinite())
    throw ValidationError("checkpoint " + what + " has non-finite values");
  return layer;
}

json stats_to_json(const PriorStats& stats) {
  json probs = json::array();
  for (const Eigen::VectorXd& p : stats.probs) {
    json row = json::array();
    for (Eigen::Index k = 0; k < p.size(); ++k) row.push_back(p[k]);
    probs.push_back(std::move(row));
  }
  json mean = json::array(), std = json::array();
  for (Eigen::Index i = 0; i < stats.mean.size(); ++i) {
    mean.push_back(stats.mean[i]);
    std.push_back(stats.std[i]);
  }
  return json{{"probs", std::move(probs)},
              {"mean", std::move(mean)},
              {"std", std::move(std)},
              {"n_samples", stats.n_samples}};
}

PriorStats stats_from_json(const json& j, const ProgramSpec& program) {
  PriorStats stats;
  const json& probs = j.at("probs");
  const json& mean = j.at("mean");
  const json& std = j.at("std");
  const std::size_t n = static_cast<std::size_t>(program.n_sites());
  if (probs.size() != n || mean.size() != n || std.size() != n)
    throw ValidationError("checkpoint stats do not match the program");

  stats.mean.resize(program.n_sites());
  stats.std.resize(program.n_sites());
  for (std::size_t i = 0; i < n; ++i) {
    const json& p = probs[i];
    Eigen::VectorXd v(p.size());
    for (std::size_t k = 0; k < p.size(); ++k)
      v[static_cast<Eigen::Index>(k)] = p[k].get<double>();
    const SiteSpec& site = program.sites[i];
    if (site.kind == SiteKind::Categorical) {
      if (v.size() != site.arity)
        throw ValidationError("checkpoint stats: prior vector of site '" +
                              site.name + "' does not match its arity");
    } else if (v.size() != 0) {
      throw ValidationError("checkpoint stats: continuous site '" + site.name +
                            "' must not carry a prior vector");
    }
    stats.probs.push_back(std::move(v));
    stats.mean[i] = mean[i].get<double>();
    stats.std[i] = std[i].get<double>();
    if (!(stats.std[i] >= kPriorStdFloor))
      throw ValidationError("checkpoint stats: std below floor at site '" +
                            site.name + "'");
  }
  stats.n_samples = j.at("n_samples").get<std::int64_t>();
  return stats;
}

}  // namespace

json checkpoint_to_json(const Checkpoint& ckpt) {
  const UmModel& model = ckpt.model;
  json trunk = json::array();
  for (const DenseLayer& layer : model.trunk)
    trunk.push_back(layer_to_json(layer));
  json heads = json::object();
  for (int h = 0; h < model.n_heads(); ++h)
    heads[ckpt.program.sites[h].name] = layer_to_json(model.heads[h]);

  return json{{"program", program_to_json(ckpt.program)},
              {"arch",
               {{"h", model.arch.hidden_layers},
                {"s", model.arch.hidden_width},
                {"activation", to_string(model.arch.activation)},
                {"dropout", model.arch.dropout_p}}},
              {"mode", to_string(model.mode)},
              {"stats", stats_to_json(model.stats)},
              {"trunk", std::move(trunk)},
              {"heads", std::move(heads)},
              {"rng_seed", model.seed},
              {"steps_trained", model.steps_trained}};
}

Checkpoint checkpoint_from_json(const json& j) {
  try {
    Checkpoint ckpt;
    ckpt.program = program_from_json(j.at("program"));
    UmModel& model = ckpt.model;

    const json& arch = j.at("arch");
    model.arch.hidden_layers = arch.at("h").get<int>();
    model.arch.hidden_width = arch.at("s").get<int>();
    model.arch.activation =
        activation_from_string(arch.at("activation").get<std::string>());
    model.arch.dropout_p = arch.at("dropout").get<double>();
    model.mode = mode_from_string(j.at("mode").get<std::string>());
    model.layout = make_layout(ckpt.program);
    model.stats = stats_from_json(j.at("stats"), ckpt.program);
    model.seed = j.at("rng_seed").get<std::uint64_t>();
    model.steps_trained = j.at("steps_trained").get<std::int64_t>();

    const json& trunk = j.at("trunk");
    if (static_cast<int>(trunk.size()) != model.arch.hidden_layers)
      throw ValidationError("checkpoint trunk depth does not match arch");
    int in = model.layout.input_width;
    for (std::size_t l = 0; l < trunk.size(); ++l) {
      DenseLayer layer =
          layer_from_json(trunk[l], "trunk layer " + std::to_string(l));
      if (layer.w.rows() != in || layer.w.cols() != model.arch.hidden_width)
        throw ValidationError("checkpoint trunk layer " + std::to_string(l) +
                              " does not match the architecture");
      model.trunk.push_back(std::move(layer));
      in = model.arch.hidden_width;
    }

    const json& heads = j.at("heads");
    if (heads.size() != static_cast<std::size_t>(ckpt.program.n_sites()))
      throw ValidationError("checkpoint head count does not match program");
    for (const SiteSpec& site : ckpt.program.sites) {
      if (!heads.contains(site.name))
        throw ValidationError("checkpoint is missing head '" + site.name +
                              "'");
      DenseLayer head =
          layer_from_json(heads.at(site.name), "head '" + site.name + "'");
      const int out = site.kind == SiteKind::Categorical ? site.arity : 1;
      if (head.w.rows() != model.arch.hidden_width || head.w.cols() != out)
        throw ValidationError("checkpoint head '" + site.name +
                              "' does not match the site");
      model.heads.push_back(std::move(head));
    }

    reset_optimizer(model);
    return ckpt;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("bad checkpoint JSON: ") + e.what());
  }
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  write_text_file(path, checkpoint_to_json(ckpt).dump(2) + "\n");
}

Checkpoint load_checkpoint(const std::string& path) {
  return checkpoint_from_json(parse_json_file(path));
}

}  // namespace um
