// Copyright 2026 The jaggedrec Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// Command-line front end: one subcommand per experiment kind plus `report`,
// which runs them all and concatenates the markdown tables.

#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "jaggedrec/errors.h"
#include "jaggedrec/experiment.h"

namespace {

struct Options {
  std::string config_path;
  std::optional<uint64_t> seed;
  std::string out_dir;
  std::string format = "md";
};

jaggedrec::ExperimentConfig Resolve(const Options& o) {
  jaggedrec::ExperimentConfig c;
  if (!o.config_path.empty()) c = jaggedrec::LoadConfig(o.config_path);
  jaggedrec::ApplyEnvOverrides(c);
  if (o.seed) c.seed = *o.seed;
  if (!o.out_dir.empty()) c.out_dir = o.out_dir;
  c.Validate();
  return c;
}

// Returns the number of failed checks.
int RunKinds(const Options& o, const std::vector<jaggedrec::ExperimentKind>& kinds,
             bool combined) {
  const jaggedrec::ExperimentConfig config = Resolve(o);
  int failures = 0;
  std::string all_md;
  for (jaggedrec::ExperimentKind kind : kinds) {
    const jaggedrec::WrittenReport w = jaggedrec::RunAndWrite(config, kind);
    std::cout << (o.format == "csv" ? jaggedrec::RenderCsv(w.report, config)
                                    : jaggedrec::RenderMarkdown(w.report,
                                                                config))
              << "\n";
    std::cerr << "wrote " << w.csv_path << " and " << w.md_path << "\n";
    for (const std::string& f : w.report.failures) {
      std::cerr << "check failed: " << w.report.name << ": " << f << "\n";
    }
    failures += static_cast<int>(w.report.failures.size());
    if (combined) all_md += jaggedrec::RenderMarkdown(w.report, config) + "\n";
  }
  if (combined) {
    const std::string path = config.out_dir + "/report.md";
    std::ofstream(path) << "# jaggedrec experiment report\n\n" << all_md;
    std::cerr << "wrote " << path << "\n";
  }
  return failures;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"jaggedrec experiments"};
  app.require_subcommand(1);
  Options opts;
  app.add_option("--config", opts.config_path, "JSON config file")
      ->check(CLI::ExistingFile);
  app.add_option("--seed", opts.seed, "Override the config seed");
  app.add_option("--out", opts.out_dir, "Output directory");
  app.add_option("--format", opts.format, "Format printed to stdout")
      ->check(CLI::IsMember({"csv", "md"}));
  for (auto* opt : app.get_options()) {
    if (opt->get_name() != "--help") opt->configurable(false);
  }

  std::vector<std::pair<CLI::App*, jaggedrec::ExperimentKind>> subs;
  for (jaggedrec::ExperimentKind kind : jaggedrec::AllExperimentKinds()) {
    const std::string name = jaggedrec::ExperimentKindName(kind);
    CLI::App* sub = app.add_subcommand(name, "Run the " + name + " experiment");
    sub->fallthrough();
    subs.emplace_back(sub, kind);
  }
  CLI::App* report =
      app.add_subcommand("report", "Run every experiment and write report.md");
  report->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // Help prints and exits 0; every usage error exits 2.
    return app.exit(e) == 0 ? 0 : 2;
  }
  try {
    int failures = 0;
    if (report->parsed()) {
      failures = RunKinds(opts, jaggedrec::AllExperimentKinds(), true);
    } else {
      for (const auto& [sub, kind] : subs) {
        if (sub->parsed()) failures += RunKinds(opts, {kind}, false);
      }
    }
    return failures == 0 ? 0 : 1;
  } catch (const jaggedrec::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "fatal: " << e.what() << "\n";
    return 3;
  }
}
