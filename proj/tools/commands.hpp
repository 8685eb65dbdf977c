#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "run_dir.hpp"
#include "schema.hpp"
#include "wproj/projection.hpp"

namespace wproj::cli {

struct CommandContext {
  json config;  // validated, defaults filled in
  std::filesystem::path base_dir;  // relative paths in the config resolve here
  unsigned threads = 1;
  std::ostream* out = nullptr;

  std::string resolve(const std::string& path) const;
};

/// Each command writes its artifacts into `dir` and returns true when every
/// numerical solve converged. Errors propagate as exceptions.
using Command = bool (*)(const CommandContext&, RunDirectory&);

bool cmd_project(const CommandContext& ctx, RunDirectory& dir);
bool cmd_synth(const CommandContext& ctx, RunDirectory& dir);
bool cmd_simulate_gaussian(const CommandContext& ctx, RunDirectory& dir);
bool cmd_simulate_mixture(const CommandContext& ctx, RunDirectory& dir);
bool cmd_image_project(const CommandContext& ctx, RunDirectory& dir);
bool cmd_oracle_check(const CommandContext& ctx, RunDirectory& dir);

/// Solver settings from the "solver" and "qp" config blocks.
ProjectOptions project_options(const json& config, unsigned threads);

}  // namespace wproj::cli
