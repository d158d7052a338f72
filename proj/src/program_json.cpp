#include <json.hpp>

#include <fstream>
#include <map>
#include <sstream>

#include "um/errors.hpp"
#include "um/serialize.hpp"

namespace um {

using nlohmann::json;

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write file '" + path + "'");
  out << content;
  if (!out) throw ValidationError("failed writing file '" + path + "'");
}

json parse_json_file(const std::string& path) {
  try {
    return json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw ValidationError("malformed JSON in '" + path + "': " + e.what());
  }
}

namespace {

json dist_to_json(const ConditionalDist& dist) {
  json j;
  if (const auto* ct = std::get_if<CategoricalTable>(&dist)) {
    j["type"] = "categorical_table";
    json rows = json::array();
    for (Eigen::Index r = 0; r < ct->table.rows(); ++r) {
      json row = json::array();
      for (Eigen::Index c = 0; c < ct->table.cols(); ++c)
        row.push_back(ct->table(r, c));
      rows.push_back(std::move(row));
    }
    j["table"] = std::move(rows);
  } else if (const auto* g = std::get_if<GaussianConst>(&dist)) {
    j["type"] = "gaussian";
    j["mean"] = g->mean;
    j["std"] = g->std;
  } else if (const auto* gl = std::get_if<GaussianLinear>(&dist)) {
    j["type"] = "gaussian_linear";
    j["mean_parent"] = gl->mean_parent;
    j["std_const"] = gl->std_const;
    j["std_parent"] = gl->std_parent;
  } else if (const auto* gm = std::get_if<GammaConst>(&dist)) {
    j["type"] = "gamma";
    j["shape"] = gm->shape;
    j["rate"] = gm->rate;
  } else {
    j["type"] = "branch_bernoulli_gaussian";
  }
  return j;
}

ConditionalDist dist_from_json(const json& j) {
  const std::string type = j.at("type").get<std::string>();
  if (type == "categorical_table") {
    const json& rows = j.at("table");
    if (!rows.is_array() || rows.empty())
      throw ValidationError("categorical_table needs a non-empty table");
    const Eigen::Index n_rows = static_cast<Eigen::Index>(rows.size());
    const Eigen::Index n_cols =
        static_cast<Eigen::Index>(rows.front().size());
    Eigen::MatrixXd table(n_rows, n_cols);
    for (Eigen::Index r = 0; r < n_rows; ++r) {
      const json& row = rows[static_cast<std::size_t>(r)];
      if (static_cast<Eigen::Index>(row.size()) != n_cols)
        throw ValidationError("categorical_table rows have unequal lengths");
      for (Eigen::Index c = 0; c < n_cols; ++c)
        table(r, c) = row[static_cast<std::size_t>(c)].get<double>();
    }
    return CategoricalTable{std::move(table)};
  }
  if (type == "gaussian") {
    return GaussianConst{j.at("mean").get<double>(),
                         j.at("std").get<double>()};
  }
  if (type == "gaussian_linear") {
    GaussianLinear gl;
    gl.mean_parent = j.at("mean_parent").get<int>();
    gl.std_const = j.at("std_const").get<double>();
    gl.std_parent = j.value("std_parent", -1);
    return gl;
  }
  if (type == "gamma") {
    return GammaConst{j.at("shape").get<double>(), j.at("rate").get<double>()};
  }
  if (type == "branch_bernoulli_gaussian") return BranchBernoulliGaussian{};
  throw ValidationError("unknown dist type '" + type + "'");
}

}  // namespace

json program_to_json(const ProgramSpec& program) {
  json sites = json::array();
  for (const SiteSpec& site : program.sites) {
    json js;
    js["name"] = site.name;
    js["kind"] =
        site.kind == SiteKind::Categorical ? "categorical" : "continuous";
    if (site.kind == SiteKind::Categorical) js["arity"] = site.arity;
    json parents = json::array();
    for (int p : site.parents) parents.push_back(program.sites[p].name);
    js["parents"] = std::move(parents);
    js["dist"] = dist_to_json(site.dist);
    js["proposable"] = site.proposable;
    sites.push_back(std::move(js));
  }
  return json{{"name", program.name}, {"sites", std::move(sites)}};
}

ProgramSpec program_from_json(const json& j) {
  ProgramSpec program;
  try {
    program.name = j.at("name").get<std::string>();
    std::map<std::string, int> index;
    for (const json& js : j.at("sites")) {
      SiteSpec site;
      site.name = js.at("name").get<std::string>();
      const std::string kind = js.at("kind").get<std::string>();
      if (kind == "categorical") {
        site.kind = SiteKind::Categorical;
        site.arity = js.at("arity").get<int>();
      } else if (kind == "continuous") {
        site.kind = SiteKind::Continuous;
      } else {
        throw ValidationError("unknown site kind '" + kind + "'");
      }
      for (const json& p : js.at("parents")) {
        const std::string pname = p.get<std::string>();
        auto it = index.find(pname);
        if (it == index.end())
          throw ValidationError("site '" + site.name +
                                "' references unknown parent '" + pname + "'");
        site.parents.push_back(it->second);
      }
      site.dist = dist_from_json(js.at("dist"));
      site.proposable = js.value("proposable", true);
      index[site.name] = program.n_sites();
      program.sites.push_back(std::move(site));
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("bad program JSON: ") + e.what());
  }
  validate(program);
  return program;
}

void save_program(const std::string& path, const ProgramSpec& program) {
  write_text_file(path, program_to_json(program).dump(2) + "\n");
}

ProgramSpec load_program(const std::string& path) {
  return program_from_json(parse_json_file(path));
}

Evidence evidence_from_json(const ProgramSpec& program, const json& j) {
  if (!j.is_object())
    throw ValidationError("evidence must be a JSON object of site: value");
  Evidence evidence(program.n_sites());
  for (const auto& [name, value] : j.items()) {
    const int site = site_index(program, name);
    if (!value.is_number())
      throw ValidationError("evidence for site '" + name +
                            "' must be a number");
    const double v = value.get<double>();
    if (program.sites[site].kind == SiteKind::Categorical) {
      // Reuses the state validation path so bad states name the site.
      Assignment probe = Assignment::Zero(program.n_sites());
      site_log_density(program, site, v, probe);
    }
    evidence.set(site, v);
  }
  return evidence;
}

json evidence_to_json(const ProgramSpec& program, const Evidence& evidence) {
  json j = json::object();
  for (int site : evidence.observed_sites())
    j[program.sites[site].name] = evidence.value(site);
  return j;
}

json marginals_to_json(const ProgramSpec& program,
                       const MarginalSet& marginals) {
  json j = json::object();
  for (const auto& [site, probs] : marginals.categorical) {
    json row = json::array();
    for (Eigen::Index k = 0; k < probs.size(); ++k) row.push_back(probs[k]);
    j[program.sites[site].name] = std::move(row);
  }
  for (const auto& [site, mean] : marginals.continuous)
    j[program.sites[site].name] = mean;
  return j;
}

}  // namespace um
