#include "cli.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>

#include "commands.hpp"
#include "run_dir.hpp"
#include "schema.hpp"
#include "wproj/error.hpp"
#include "wproj/log.hpp"

namespace wproj::cli {

namespace fs = std::filesystem;

namespace {

struct GlobalFlags {
  std::string config;
  std::string out = "runs";
  std::optional<std::uint64_t> seed;
  std::optional<std::string> solver;
  std::optional<double> epsilon;
  std::optional<unsigned> threads;
  bool dump_plans = false;
  bool verbose = false;
  // project only
  std::string target;
  std::vector<std::string> controls;
};

json read_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open config '" + path + "'");
  try {
    return json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::Config, "'" + path + "' is not valid JSON: " + e.what());
  }
}

unsigned resolve_threads(const GlobalFlags& flags, const json& config) {
  if (flags.threads) return *flags.threads;
  if (config.contains("threads")) return config["threads"].get<unsigned>();
  if (const char* env = std::getenv("WPROJ_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 1 || v > 1024) {
      throw Error(ErrorCode::Config, "WPROJ_THREADS must be an integer in [1, 1024]");
    }
    return static_cast<unsigned>(v);
  }
  return 1;
}

int execute(const std::string& command, Command fn, const GlobalFlags& flags, std::ostream& out) {
  json config = flags.config.empty() ? json::object() : read_config(flags.config);
  if (!config.is_object()) throw Error(ErrorCode::Config, "config must be a JSON object");
  if (flags.seed) config["seed"] = *flags.seed;
  if (flags.solver) config["solver"]["method"] = *flags.solver;
  if (flags.epsilon) config["solver"]["epsilon"] = *flags.epsilon;
  if (flags.threads) config["threads"] = *flags.threads;
  if (flags.dump_plans) config["dump_plans"] = true;
  if (!flags.target.empty()) config["target"] = {{"csv", fs::absolute(flags.target).string()}};
  if (!flags.controls.empty()) {
    config["controls"] = json::array();
    for (const auto& c : flags.controls) config["controls"].push_back({{"csv", fs::absolute(c).string()}});
  }

  CommandContext ctx;
  ctx.config = validate(config, command);
  ctx.base_dir = flags.config.empty() ? fs::current_path() : fs::absolute(flags.config).parent_path();
  ctx.threads = resolve_threads(flags, ctx.config);
  ctx.out = &out;

  const std::string canonical = json{{"command", command}, {"config", ctx.config}}.dump();
  RunDirectory dir(flags.out, command + "-" + fnv1a_hex(canonical) + "-" + utc_timestamp());
  bool converged = false;
  try {
    {
      std::ofstream cfg(dir.file("config.json"));
      cfg << ctx.config.dump(2) << '\n';
    }
    converged = fn(ctx, dir);
  } catch (const std::exception& e) {
    dir.fail(e.what());
    throw;
  }
  dir.commit();
  out << dir.final_path().string() << '\n';
  if (!converged) {
    log_warning("a numerical solve did not converge; artifacts are in " + dir.final_path().string());
    return kExitNotConverged;
  }
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Tangential Wasserstein projections of a target measure onto control measures", "wproj"};
  app.require_subcommand(1);
  GlobalFlags flags;
  app.add_option("--config", flags.config, "JSON config file")->check(CLI::ExistingFile);
  app.add_option("--out", flags.out, "Parent directory for run directories")->capture_default_str();
  app.add_option("--seed", flags.seed, "RNG seed (overrides the config)");
  app.add_option("--solver", flags.solver, "Transport solver")->check(CLI::IsMember({"exact", "entropic"}));
  app.add_option("--epsilon", flags.epsilon, "Entropic regularisation")->check(CLI::PositiveNumber);
  app.add_option("--threads", flags.threads, "Worker threads (default: WPROJ_THREADS, then 1)")
      ->check(CLI::Range(1, 1024));
  app.add_flag("--dump-plans", flags.dump_plans, "Write every transport plan as plan_<j>.json");
  app.add_flag("-v,--verbose", flags.verbose, "Log solver progress to stderr");

  const std::map<std::string, std::pair<Command, std::string>> commands{
      {"project", {cmd_project, "Project a target CSV sample onto control CSV samples"}},
      {"synth", {cmd_synth, "Distributional synthetic controls on a CSV panel"}},
      {"simulate-gaussian", {cmd_simulate_gaussian, "Gaussian simulation study"}},
      {"simulate-mixture", {cmd_simulate_mixture, "Gaussian-mixture simulation study"}},
      {"image-project", {cmd_image_project, "Project a grayscale image onto control images"}},
      {"oracle-check", {cmd_oracle_check, "Compare the exact solver with permutation enumeration"}},
  };
  std::map<std::string, CLI::App*> subs;
  for (const auto& [name, entry] : commands) {
    CLI::App* sub = app.add_subcommand(name, entry.second);
    sub->fallthrough();
    if (name == "project") {
      sub->add_option("--target", flags.target, "Target CSV file");
      sub->add_option("--controls", flags.controls, "Control CSV files")->expected(1, -1);
    }
    subs[name] = sub;
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return kExitOk;
    }
    err << "error: " << e.what() << '\n';
    return kExitInputError;
  }

  if (flags.verbose) set_verbose(true);
  for (const auto& [name, sub] : subs) {
    if (!sub->parsed()) continue;
    try {
      return execute(name, commands.at(name).first, flags, out);
    } catch (const std::exception& e) {
      err << "error: " << e.what() << '\n';
      return kExitInputError;
    }
  }
  return kExitInputError;
}

}  // namespace wproj::cli
