#pragma once

#include <json.hpp>

#include <string>

#include "um/inference.hpp"
#include "um/neural.hpp"
#include "um/program.hpp"

namespace um {

nlohmann::json program_to_json(const ProgramSpec& program);
ProgramSpec program_from_json(const nlohmann::json& j);
void save_program(const std::string& path, const ProgramSpec& program);
ProgramSpec load_program(const std::string& path);

// A trained model travels with its program so inference inputs can be
// validated against site names and kinds.
struct Checkpoint {
  ProgramSpec program;
  UmModel model;
};

// Schema: {"program": ..., "arch": {"h","s","activation","dropout"},
// "mode", "stats", "trunk", "heads", "rng_seed", "steps_trained"}; weights
// as row-major arrays. Optimiser moments are not persisted; loading rebuilds
// fresh states whose step counter continues from steps_trained.
nlohmann::json checkpoint_to_json(const Checkpoint& ckpt);
Checkpoint checkpoint_from_json(const nlohmann::json& j);
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

// {"site_name": value, ...}; categorical values must be integral states.
Evidence evidence_from_json(const ProgramSpec& program,
                            const nlohmann::json& j);
nlohmann::json evidence_to_json(const ProgramSpec& program,
                                const Evidence& evidence);

nlohmann::json marginals_to_json(const ProgramSpec& program,
                                 const MarginalSet& marginals);

// Parse wrapper that turns malformed JSON into ValidationError.
nlohmann::json parse_json_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace um
