/*
 * Copyright 2026 The zsbench Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// zsbench command-line entry point. See README.md for commands, exit codes
// and file formats.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "zsbench/config.hpp"
#include "zsbench/pipeline.hpp"

namespace {

struct Command {
  const char* name;
  const char* help;
  const char* positional;  // optional positional argument and the key it sets
  const char* key;
};

constexpr Command kCommands[] = {
    {"ingest", "load and validate every configured input; print counts and warnings", nullptr, nullptr},
    {"build-split", "filter the candidate pool and optimize a high structural-ratio test split", nullptr, nullptr},
    {"train", "fit a model on the training classes", "kind", "model.kind"},
    {"eval", "evaluate a model on the test classes", "setting", "eval.setting"},
    {"analyze", "sweep 100-class sub-splits or run the factorial impact analysis", "sweep", "analyze.sweep"},
    {"count-freq", "count label occurrences in a text corpus", nullptr, nullptr},
    {"hop-split", "write the 1-hop, 2-hops and all test splits", nullptr, nullptr},
    {"synth", "write a synthetic benchmark bundle with a matching config", nullptr, nullptr},
};

}  // namespace

int main(int argc, char** argv) {
  using zsbench::RunConfig;
  CLI::App app{"zsbench: zero-shot learning benchmark construction and evaluation"};
  app.require_subcommand(1, 1);
  app.fallthrough();

  std::string config_path, out_dir;
  std::optional<std::string> seed;
  std::optional<unsigned> threads;
  bool force = false;
  app.add_option("--config", config_path, "key=value config file")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "master seed (run.seed)");
  app.add_option("--out", out_dir, "output directory (run.out)");
  app.add_option("--threads", threads, "evaluation threads (run.threads)")->check(CLI::PositiveNumber);
  app.add_flag("--force", force, "overwrite existing outputs");

  std::map<std::string, std::string> overrides;
  std::map<std::string, CLI::Option*> key_opts;
  for (const auto& k : zsbench::config_keys()) {
    std::string name(k.name);
    key_opts[name] = app.add_option("--" + name, overrides[name], std::string(k.help))->group("Config keys");
  }

  std::map<std::string, std::string> positional;
  for (const auto& c : kCommands) {
    auto* sub = app.add_subcommand(c.name, c.help);
    if (c.positional) sub->add_option(c.positional, positional[c.key], std::string("sets ") + c.key);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    RunConfig cfg;
    bool root_given = cfg.has("paths.root");
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) zsbench::fail(zsbench::ErrorCode::kIo, "cannot open " + config_path);
      zsbench::read_config(in, cfg, config_path);
    }
    for (const auto& [key, opt] : key_opts) {
      if (opt->count()) cfg.set(key, overrides[key]);
    }
    for (const auto& [key, value] : positional) {
      if (!value.empty()) cfg.set(key, value);
    }
    if (seed) cfg.set("run.seed", *seed);
    if (threads) cfg.set("run.threads", std::to_string(*threads));
    if (!out_dir.empty()) cfg.set("run.out", out_dir);
    // Without $ZSBENCH_DATA or an explicit root, relative inputs in a config
    // file resolve against the file's own directory.
    if (!root_given && !cfg.has("paths.root") && !config_path.empty()) {
      auto dir = std::filesystem::path(config_path).parent_path();
      cfg.set("paths.root", dir.empty() ? "." : dir.string());
    }
    cfg.number<std::uint64_t>("run.seed");
    zsbench::pipeline::Session session(std::move(cfg), force, std::cout, std::cerr);
    zsbench::pipeline::run_command(command, session);
    return 0;
  } catch (const zsbench::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return zsbench::pipeline::exit_code(e.code());
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
