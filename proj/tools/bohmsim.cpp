// bohmsim: run scenarios from JSON configs or named presets.
//
// Exit codes: 0 ok, 2 invalid config or i/o failure, 3 numerical failure
// (node hit, integration failure, under-resolved truncation), 4 a threshold
// check failed (run --check, or check), 1 anything unexpected.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "bohm/bohm.h"

namespace {

enum Exit { kOk = 0, kInternal = 1, kInvalid = 2, kNumerical = 3, kCheck = 4 };

int exit_code(bohm_status s) {
  switch (s) {
    case BOHM_OK: return kOk;
    case BOHM_ERR_INVALID:
    case BOHM_ERR_IO: return kInvalid;
    case BOHM_ERR_NODE:
    case BOHM_ERR_NUMERICAL:
    case BOHM_ERR_UNDER_RESOLVED: return kNumerical;
    case BOHM_ERR_CHECK: return kCheck;
    case BOHM_ERR_INTERNAL: return kInternal;
  }
  return kInternal;
}

struct Args {
  std::string config;
  std::string preset;
  std::string out;
  unsigned long long seed = 0;
  bool has_seed = false;
  bool check = false;
};

int diagnose(int code, const std::string& msg) {
  std::cerr << "bohmsim: " << msg << "\n";
  return code;
}

// Loads the config text and resolves the output directory:
// --out, then $BOHM_OUT_DIR, then the config's "output", then out/<kind>.
int load(const Args& a, bool write_by_default, std::string& text, std::string& out_dir) {
  if (!a.config.empty() == !a.preset.empty()) return diagnose(kInvalid, "give exactly one of --config or --preset");
  if (!a.preset.empty()) {
    const char* t = bohm_preset_config(a.preset.c_str());
    if (!t) return diagnose(kInvalid, "unknown preset \"" + a.preset + "\" (see list-presets)");
    text = t;
  } else {
    std::ifstream in(a.config, std::ios::binary);
    if (!in) return diagnose(kInvalid, "cannot read config " + a.config);
    std::ostringstream ss;
    ss << in.rdbuf();
    text = ss.str();
  }

  nlohmann::json cfg;
  try {
    cfg = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    return diagnose(kInvalid, std::string("config is not valid JSON: ") + e.what());
  }
  if (!cfg.is_object()) return diagnose(kInvalid, "config must be a JSON object");

  if (!a.out.empty()) {
    out_dir = a.out;
  } else if (!write_by_default) {
    out_dir.clear();
  } else if (const char* env = std::getenv("BOHM_OUT_DIR"); env && *env) {
    out_dir = env;
  } else if (cfg.contains("output") && cfg["output"].is_string() && !cfg["output"].get<std::string>().empty()) {
    out_dir = cfg["output"].get<std::string>();
  } else {
    const auto kind = cfg.value("kind", std::string("scenario"));
    out_dir = "out/" + (kind.empty() ? std::string("scenario") : kind);
  }
  return kOk;
}

int execute(const Args& a, bool write_by_default, bool gate) {
  std::string text, out_dir;
  if (int rc = load(a, write_by_default, text, out_dir); rc != kOk) return rc;

  bohm_run_options opts{};
  opts.has_seed = a.has_seed ? 1 : 0;
  opts.seed = a.seed;
  opts.out_dir = out_dir.empty() ? nullptr : out_dir.c_str();

  bohm_run* run = nullptr;
  const bohm_status s = bohm_run_config(text.c_str(), &opts, &run);
  if (s != BOHM_OK) return diagnose(exit_code(s), std::string(bohm_status_name(s)) + ": " + bohm_last_error());

  std::cout << bohm_run_checks_table(run);
  std::cout.flush();
  const bool passed = bohm_run_passed(run) != 0;
  if (!passed) {
    for (size_t i = 0; i < bohm_run_check_count(run); ++i) {
      const char* name = nullptr;
      double value = 0.0, lo = 0.0, hi = 0.0;
      int ok = 0;
      bohm_run_check(run, i, &name, &value, &lo, &hi, &ok);
      if (!ok) std::cerr << "bohmsim: check " << name << " failed: " << value << " not in [" << lo << ", " << hi << "]\n";
    }
  }
  bohm_run_free(run);
  return gate && !passed ? kCheck : kOk;
}

void add_source_flags(CLI::App* cmd, Args& a) {
  cmd->add_option("--config,-c", a.config, "scenario config (JSON)");
  cmd->add_option("--preset,-p", a.preset, "named preset instead of a config file");
  cmd->add_option("--seed,-s", a.seed, "override the config seed")->each([&a](const std::string&) { a.has_seed = true; });
  cmd->add_option("--out,-o", a.out, "output directory");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bohmian trajectory and lattice-field scenario runner"};
  app.set_version_flag("--version", std::string(bohm_version()));
  app.require_subcommand(1);

  Args a;
  auto* run = app.add_subcommand("run", "run a scenario and write its outputs");
  add_source_flags(run, a);
  run->add_flag("--check", a.check, "exit 4 when a threshold check fails");

  auto* check = app.add_subcommand("check", "evaluate the scenario thresholds (writes outputs only with --out)");
  add_source_flags(check, a);

  auto* list = app.add_subcommand("list-presets", "list the built-in presets");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kInvalid;
  }

  if (list->parsed()) {
    for (size_t i = 0; i < bohm_preset_count(); ++i)
      std::cout << bohm_preset_name(i) << "\t" << bohm_preset_description(i) << "\n";
    return kOk;
  }
  if (run->parsed()) return execute(a, true, a.check);
  return execute(a, false, true);
}
