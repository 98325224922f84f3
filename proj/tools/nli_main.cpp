#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "nli/cli.hpp"
#include "nli/corpus.hpp"

namespace {

constexpr const char* kCommands[] = {"train", "finetune", "attack", "craft", "audit", "eval"};

int run(int argc, char** argv) {
  CLI::App app{"adversarial NLI toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::string seed_text;

  std::vector<CLI::App*> subs;
  for (const char* name : kCommands) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "configuration file (key = value lines)");
    sub->add_option("--seed", seed_text, "global random seed");
    sub->add_option("--out", out_dir, "output directory");
    sub->allow_extras();  // --key=value configuration overrides
    subs.push_back(sub);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  CLI::App* sub = app.get_subcommands().front();
  nli::Config cfg;
  try {
    if (!config_path.empty()) cfg = nli::Config::from_file(config_path);
    for (const std::string& extra : sub->remaining()) {
      std::string item = extra;
      if (item.rfind("--", 0) == 0) item = item.substr(2);
      const std::size_t eq = item.find('=');
      if (eq == std::string::npos) {
        std::cerr << "error: expected --key=value override, got '" << extra << "'\n";
        return 1;
      }
      cfg.set(item.substr(0, eq), item.substr(eq + 1));
    }
    if (!seed_text.empty()) cfg.set("seed", seed_text);
    if (!out_dir.empty()) cfg.set("out.dir", out_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  return nli::run_command(sub->get_name(), cfg);
}

}  // namespace

int main(int argc, char** argv) { return run(argc, argv); }
