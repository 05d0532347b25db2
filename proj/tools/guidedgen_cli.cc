// Copyright 2026 The guidedgen Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


// guidedgen: batch experiment pipeline and control-service launcher.
//
//   guidedgen demo --out DIR
//   guidedgen train --spec PATH [--out DIR] [--lambda L]
//   guidedgen generate --spec PATH --control-set NAME [--seed N] [--out DIR]
//   guidedgen eval --spec PATH [--out DIR] [CANDIDATE_FILE...]
//   guidedgen ablate --spec PATH [--control-set NAME] [--seed N] [--out DIR]
//   guidedgen serve (--spec PATH | --config PATH) [--port N]
//
// Exit status is 0 on success. Failures print one line to stderr,
// "error: <code>: <message>", and exit 1 (2 for usage errors).

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "guidedgen/experiment.h"
#include "guidedgen/http_server.h"

namespace {

namespace fs = std::filesystem;
using guidedgen::ExperimentSpec;

std::string one_line(std::string s) {
  for (char& c : s) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

struct Options {
  std::string spec;
  std::string out;
  std::string control_set;
  std::optional<std::uint64_t> seed;
  std::optional<double> lambda;
  std::vector<std::string> files;
  std::string config;
  std::optional<int> port;
  std::uint64_t demo_seed = 0;
};

ExperimentSpec load_spec(const Options& o) {
  ExperimentSpec spec = ExperimentSpec::load(o.spec);
  if (!o.out.empty()) spec.out = o.out;
  if (o.seed) spec.generation.seed = *o.seed;
  if (o.lambda) {
    spec.loss.lambda = *o.lambda;
    spec.loss.validate();
  }
  return spec;
}

int run(CLI::App& app, const Options& o) {
  if (app.got_subcommand("demo")) {
    guidedgen::SyntheticOptions opts;
    opts.seed = o.demo_seed;
    const fs::path spec = guidedgen::write_demo_workspace(o.out, opts);
    std::cout << "wrote " << spec.string() << "\n";
    return 0;
  }
  if (app.got_subcommand("train")) {
    const auto s = guidedgen::cmd_train(load_spec(o));
    std::cout << "models: " << s.models_dir.string() << "\nreport: " << s.report.string() << "\n";
    return 0;
  }
  if (app.got_subcommand("generate")) {
    const auto s = guidedgen::cmd_generate(load_spec(o), o.control_set);
    std::cout << s.file.string() << "\t" << s.prompts << " prompts\t" << s.candidates
              << " candidates\n";
    return 0;
  }
  if (app.got_subcommand("eval")) {
    std::vector<fs::path> files(o.files.begin(), o.files.end());
    std::cout << guidedgen::cmd_eval(load_spec(o), files).table;
    return 0;
  }
  if (app.got_subcommand("ablate")) {
    std::optional<std::string> set;
    if (!o.control_set.empty()) set = o.control_set;
    std::cout << guidedgen::cmd_ablate(load_spec(o), set).table;
    return 0;
  }
  if (app.got_subcommand("serve")) {
    guidedgen::ServiceConfig config;
    if (!o.config.empty()) {
      config = guidedgen::ServiceConfig::load(o.config);
    } else if (!o.spec.empty()) {
      const ExperimentSpec spec = load_spec(o);
      config.model_dir = spec.models_dir();
      config.log_path = spec.out / "sessions.jsonl";
    }
    config.apply_environment([](const char* name) { return std::getenv(name); });
    if (o.port) config.port = *o.port;
    return guidedgen::run_service(config);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Attribute-controlled counter-speech generation with n-gram discriminators"};
  app.require_subcommand(1);
  Options o;

  auto* demo = app.add_subcommand("demo", "Write a synthetic workspace (data + spec.json)");
  demo->add_option("--out", o.out, "Workspace directory")->required();
  demo->add_option("--seed", o.demo_seed, "Corpus seed");

  auto* train = app.add_subcommand("train", "Train base and attribute models");
  train->add_option("--spec", o.spec, "Experiment spec")->required()->check(CLI::ExistingFile);
  train->add_option("--out", o.out, "Output directory (overrides the experiment file)");
  train->add_option("--lambda", o.lambda, "Generative-loss weight for smoothing selection");

  auto* generate = app.add_subcommand("generate", "Generate candidates for the test prompts");
  generate->add_option("--spec", o.spec, "Experiment spec")->required()->check(CLI::ExistingFile);
  generate->add_option("--control-set", o.control_set, "Control set name")->required();
  generate->add_option("--seed", o.seed, "Generation seed (overrides the experiment file)");
  generate->add_option("--out", o.out, "Output directory (overrides the experiment file)");

  auto* eval = app.add_subcommand("eval", "Compute metric tables for candidate files");
  eval->add_option("--spec", o.spec, "Experiment spec")->required()->check(CLI::ExistingFile);
  eval->add_option("--out", o.out, "Output directory (overrides the experiment file)");
  eval->add_option("files", o.files, "Candidate files (default: all under candidates/)");

  auto* ablate = app.add_subcommand("ablate", "Leave-one-attribute-out ablation");
  ablate->add_option("--spec", o.spec, "Experiment spec")->required()->check(CLI::ExistingFile);
  ablate->add_option("--control-set", o.control_set, "Three-attribute control set");
  ablate->add_option("--seed", o.seed, "Generation seed (overrides the experiment file)");
  ablate->add_option("--out", o.out, "Output directory (overrides the experiment file)");

  auto* serve = app.add_subcommand("serve", "Run the HTTP control service");
  auto* spec_opt = serve->add_option("--spec", o.spec, "Serve the models of this experiment");
  auto* config_opt = serve->add_option("--config", o.config, "Service config file");
  spec_opt->excludes(config_opt);
  serve->add_option("--port", o.port, "Listen port (overrides config and environment)");
  serve->add_option("--out", o.out, "Experiment output directory (with --spec)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: invalid_argument: " << one_line(e.what()) << "\n";
    return 2;
  }
  try {
    return run(app, o);
  } catch (const guidedgen::Error& e) {
    std::cerr << "error: " << guidedgen::to_string(e.code()) << ": " << one_line(e.what()) << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << one_line(e.what()) << "\n";
  }
  return 1;
}
