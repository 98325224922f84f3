#include "nli/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "nli/corpus.hpp"
#include "nli/craft.hpp"
#include "nli/lm.hpp"
#include "nli/model.hpp"
#include "nli/rng.hpp"
#include "nli/rules.hpp"
#include "nli/search.hpp"
#include "nli/train.hpp"

namespace fs = std::filesystem;

namespace nli {

namespace {

// Configuration and command-line mistakes; mapped to exit status 1.
struct user_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "data.train",          "data.dev",          "data.test",
      "rules.path",          "out.dir",           "seed",
      "corpus.lowercase",    "corpus.min_count",  "corpus.max_tokens",
      "corpus.keep_unlabeled",
      "model.embedding_dim", "model.hidden_dim",  "model.init_scale",
      "model.embeddings",
      "lm.order",            "lm.delta",          "lm.path",
      "search.seeds_per_round", "search.pool_size", "search.tau",
      "search.word_candidates", "search.max_sites", "search.kinds",
      "train.eta",           "train.epochs",      "train.batch_size",
      "train.adv_per_batch",
      "finetune.lambdas",    "finetune.base",     "finetune.epochs",
      "attack.data",         "attack.model",
      "craft.data",          "craft.model",       "craft.k",
      "audit.data",          "audit.model",
      "eval.data",           "eval.model",
  };
  return keys;
}

std::string trimmed(const std::string& s) {
  const std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    std::size_t comma = s.find(',', start);
    if (comma == std::string::npos) comma = s.size();
    const std::string item = trimmed(s.substr(start, comma - start));
    if (!item.empty()) out.push_back(item);
    start = comma + 1;
  }
  return out;
}

LoadOptions load_options(const Config& cfg) {
  LoadOptions opts;
  opts.lowercase = cfg.get_bool("corpus.lowercase", true);
  opts.max_tokens = cfg.get_u64("corpus.max_tokens", 64);
  opts.keep_unlabeled = cfg.get_bool("corpus.keep_unlabeled", false);
  return opts;
}

SearchConfig search_config(const Config& cfg, std::uint64_t seed) {
  SearchConfig sc;
  sc.seeds_per_round = cfg.get_u64("search.seeds_per_round", 32);
  sc.pool_size = cfg.get_u64("search.pool_size", 512);
  sc.tau = cfg.get_double("search.tau", 10.0);
  sc.word_candidates_per_site = cfg.get_u64("search.word_candidates", 4);
  sc.max_sites_per_sentence = cfg.get_u64("search.max_sites", 4);
  sc.rng_seed = seed;
  if (cfg.has("search.kinds")) {
    sc.enabled_kinds.clear();
    for (const std::string& name : split_csv(cfg.get("search.kinds"))) {
      if (name == "word_swap") {
        sc.enabled_kinds.insert(PerturbationKind::word_swap);
      } else if (name == "subtree_delete") {
        sc.enabled_kinds.insert(PerturbationKind::subtree_delete);
      } else if (name == "subtree_insert") {
        sc.enabled_kinds.insert(PerturbationKind::subtree_insert);
      } else {
        throw user_error("unknown perturbation kind '" + name + "' in search.kinds");
      }
    }
  }
  return sc;
}

ScorerConfig scorer_config(const Config& cfg, std::size_t vocab_size, std::uint64_t seed) {
  ScorerConfig sc;
  sc.embedding_dim = cfg.get_u64("model.embedding_dim", 32);
  sc.hidden_dim = cfg.get_u64("model.hidden_dim", 64);
  sc.vocab_size = vocab_size;
  sc.rng_seed = seed;
  sc.init_scale = cfg.get_double("model.init_scale", 0.1);
  return sc;
}

Corpus load_corpus_for(const Config& cfg, const std::string& key) {
  return load_snli(cfg.required_path(key), load_options(cfg));
}

Corpus load_optional_corpus(const Config& cfg, const std::string& key) {
  if (!cfg.has(key)) return Corpus{};
  return load_corpus_for(cfg, key);
}

RuleSet load_rules_for(const Config& cfg) {
  return load_rules(cfg.required_path("rules.path"));
}

LanguageModel lm_for(const Config& cfg, const Corpus& train_corpus) {
  if (cfg.has("lm.path")) return load_lm(cfg.required_path("lm.path"));
  const fs::path saved = fs::path(cfg.out_dir()) / "lm.txt";
  if (fs::exists(saved)) return load_lm(saved.string());
  if (train_corpus.empty()) throw user_error("no lm.path and no training corpus to fit one");
  return fit_lm(train_corpus, cfg.get_u64("lm.order", 3), cfg.get_double("lm.delta", 0.1),
                cfg.get_bool("corpus.lowercase", true));
}

std::string model_path_for(const Config& cfg, const std::string& key) {
  if (cfg.has(key)) return cfg.required_path(key);
  const fs::path fallback = fs::path(cfg.out_dir()) / "model.ckpt";
  if (!fs::exists(fallback)) {
    throw user_error("checkpoint not found: set " + key + " or run train first (" +
                     fallback.string() + ")");
  }
  return fallback.string();
}

void ensure_out_dir(const Config& cfg) {
  std::error_code ec;
  fs::create_directories(cfg.out_dir(), ec);
  if (ec) throw io_error("cannot create output directory " + cfg.out_dir());
}

TrainConfig train_config(const Config& cfg, std::uint64_t sgd_seed, std::uint64_t search_seed,
                         std::size_t epochs, double lambda) {
  TrainConfig tc;
  tc.eta = cfg.get_double("train.eta", 0.05);
  tc.epochs = epochs;
  tc.batch_size = cfg.get_u64("train.batch_size", 32);
  tc.lambda = lambda;
  tc.adv_sets_per_batch = cfg.get_u64("train.adv_per_batch", 4);
  tc.rng_seed = sgd_seed;
  tc.search = search_config(cfg, search_seed);
  return tc;
}

}  // namespace

Config Config::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open config file: " + path);
  Config cfg;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line = line.substr(0, hash);
    line = trimmed(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw format_error(path + ":" + std::to_string(line_no) + ": expected key = value");
    }
    cfg.set(trimmed(line.substr(0, eq)), trimmed(line.substr(eq + 1)));
  }
  return cfg;
}

void Config::set(const std::string& key, const std::string& value) {
  if (!known_keys().count(key)) {
    throw format_error("unknown configuration key '" + key + "'");
  }
  values_[key] = value;
}

bool Config::has(const std::string& key) const {
  auto it = values_.find(key);
  return it != values_.end() && !it->second.empty();
}

std::string Config::get(const std::string& key, const std::string& fallback) const {
  auto it = values_.find(key);
  return it == values_.end() || it->second.empty() ? fallback : it->second;
}

std::uint64_t Config::get_u64(const std::string& key, std::uint64_t fallback) const {
  if (!has(key)) return fallback;
  try {
    return std::stoull(get(key));
  } catch (const std::exception&) {
    throw format_error("config key '" + key + "' is not an integer: " + get(key));
  }
}

double Config::get_double(const std::string& key, double fallback) const {
  if (!has(key)) return fallback;
  try {
    return std::stod(get(key));
  } catch (const std::exception&) {
    throw format_error("config key '" + key + "' is not a number: " + get(key));
  }
}

bool Config::get_bool(const std::string& key, bool fallback) const {
  if (!has(key)) return fallback;
  const std::string v = get(key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw format_error("config key '" + key + "' is not a boolean: " + v);
}

std::string Config::required_path(const std::string& key) const {
  if (!has(key)) throw io_error("required config key '" + key + "' is not set");
  const std::string path = get(key);
  if (!fs::exists(path)) {
    throw io_error("config key '" + key + "': path does not exist: " + path);
  }
  return path;
}

int cmd_train(const Config& cfg) {
  ensure_out_dir(cfg);
  const Corpus corpus = load_corpus_for(cfg, "data.train");
  const Corpus dev = load_optional_corpus(cfg, "data.dev");
  const bool lowercase = cfg.get_bool("corpus.lowercase", true);

  Vocab vocab = build_vocab(corpus, cfg.get_u64("corpus.min_count", 1), lowercase);
  const std::uint64_t seed = cfg.seed();
  ScorerParams params =
      init_params(scorer_config(cfg, vocab.size(), derive_seed(seed, "train", "init")), vocab);
  if (cfg.has("model.embeddings")) {
    load_pretrained_embeddings(params, cfg.required_path("model.embeddings"));
  }

  RuleSet rules;
  const RuleSet* audit_rules = nullptr;
  if (cfg.has("rules.path")) {
    rules = load_rules_for(cfg);
    audit_rules = &rules;
  }

  const TrainConfig tc = train_config(cfg, derive_seed(seed, "train", "sgd"),
                                      derive_seed(seed, "train", "search"),
                                      cfg.get_u64("train.epochs", 5), 0.0);
  TrainOutcome outcome = train(std::move(params), corpus, dev, tc, audit_rules);

  const fs::path out = cfg.out_dir();
  save_checkpoint(outcome.params, (out / "model.ckpt").string());
  save_checkpoint(outcome.best_params, (out / "model.best.ckpt").string());
  save_report(outcome.report, (out / "train.tsv").string());

  const LanguageModel lm = fit_lm(corpus, cfg.get_u64("lm.order", 3),
                                  cfg.get_double("lm.delta", 0.1), lowercase);
  save_lm(lm, (out / "lm.txt").string());

  std::cout << "trained " << outcome.report.updates << " updates; final dev accuracy "
            << (outcome.report.epochs.empty() ? 0.0 : outcome.report.epochs.back().dev_accuracy)
            << "\n";
  return 0;
}

int cmd_finetune(const Config& cfg) {
  ensure_out_dir(cfg);
  const Corpus corpus = load_corpus_for(cfg, "data.train");
  const Corpus dev = load_optional_corpus(cfg, "data.dev");
  const RuleSet rules = load_rules_for(cfg);
  const LanguageModel lm = lm_for(cfg, corpus);

  const ScorerParams base = load_checkpoint(model_path_for(cfg, "finetune.base"));

  std::vector<std::string> lambda_texts = split_csv(cfg.get("finetune.lambdas", "0,0.1"));
  if (lambda_texts.empty()) throw user_error("finetune.lambdas is empty");

  const std::uint64_t seed = cfg.seed();
  const std::uint64_t sgd_seed = derive_seed(seed, "finetune", "sgd");
  const std::uint64_t search_seed = derive_seed(seed, "finetune", "search");
  const std::size_t epochs = cfg.get_u64("finetune.epochs", 10);
  const fs::path out = cfg.out_dir();

  std::string curve = "lambda\trule\tbody\tviolations\tpct\n";
  for (const std::string& lambda_text : lambda_texts) {
    double lambda = 0.0;
    try {
      lambda = std::stod(lambda_text);
    } catch (const std::exception&) {
      throw user_error("bad lambda '" + lambda_text + "' in finetune.lambdas");
    }
    if (lambda < 0.0) throw user_error("lambda must be >= 0");

    const TrainConfig tc = train_config(cfg, sgd_seed, search_seed, epochs, lambda);
    TrainOutcome outcome = fine_tune(base, corpus, dev, rules, lm, tc);

    const std::string tag = "finetune_lambda" + lambda_text;
    save_checkpoint(outcome.params, (out / (tag + ".ckpt")).string());
    save_report(outcome.report, (out / (tag + ".tsv")).string());

    const Corpus& audit_corpus = dev.empty() ? corpus : dev;
    ParamScorer scorer(outcome.params);
    char buf[64];
    for (const RuleViolations& row : audit(scorer, audit_corpus, rules).rows) {
      std::snprintf(buf, sizeof(buf), "%.2f", row.percentage());
      curve += lambda_text + '\t' + row.rule + '\t' + std::to_string(row.body_count) + '\t' +
               std::to_string(row.violation_count) + '\t' + buf + '\n';
    }
    std::cout << "lambda " << lambda_text << ": done\n";
  }

  std::ofstream curve_out(out / "curve.tsv");
  if (!curve_out) throw io_error("cannot write curve file");
  curve_out << curve;
  return 0;
}

int cmd_attack(const Config& cfg) {
  ensure_out_dir(cfg);
  const std::string data_key = cfg.has("attack.data") ? "attack.data" : "data.train";
  const Corpus corpus = load_corpus_for(cfg, data_key);
  const RuleSet rules = load_rules_for(cfg);
  const LanguageModel lm = lm_for(cfg, corpus);
  const ScorerParams params = load_checkpoint(model_path_for(cfg, "attack.model"));

  Rng rng(derive_seed(cfg.seed(), "attack", "search"));
  ParamScorer scorer(params);
  const SearchConfig sc = search_config(cfg, 0);
  const SearchResult result = generate_adversarials(scorer, lm, rules, corpus, sc, rng);

  const fs::path out_path = fs::path(cfg.out_dir()) / "adversarial.jsonl";
  save_adversarials(result.sets, out_path.string());
  if (result.sets.empty()) {
    std::cerr << "warning: every candidate failed the language-model gate; wrote empty "
              << out_path.string() << "\n";
  } else {
    std::cout << "wrote " << result.sets.size() << " adversarial sets (top loss "
              << result.sets.front().loss << ")\n";
  }
  return 0;
}

int cmd_craft(const Config& cfg) {
  ensure_out_dir(cfg);
  const std::string data_key = cfg.has("craft.data") ? "craft.data" : "data.test";
  const Corpus corpus = load_corpus_for(cfg, data_key);
  const RuleSet rules = load_rules_for(cfg);
  const std::string model_path = model_path_for(cfg, "craft.model");
  const ScorerParams params = load_checkpoint(model_path);

  const std::uint64_t k = cfg.get_u64("craft.k", 0);
  if (k == 0) throw user_error("craft.k must be >= 1");
  if (k > corpus.size()) {
    throw user_error("craft.k (" + std::to_string(k) + ") exceeds the corpus size (" +
                     std::to_string(corpus.size()) + ")");
  }

  ParamScorer scorer(params);
  const CraftedDataset crafted = craft_dataset(scorer, corpus, rules, k, model_path);
  const fs::path out = cfg.out_dir();
  const std::string tag = "crafted_k" + std::to_string(k);
  save_crafted(crafted, (out / (tag + ".jsonl")).string());
  save_annotation_template(crafted, (out / (tag + ".annotate.tsv")).string());
  std::cout << "wrote " << crafted.instances.size() << " instances to " << tag << ".jsonl\n";
  return 0;
}

int cmd_audit(const Config& cfg) {
  ensure_out_dir(cfg);
  const std::string data_key = cfg.has("audit.data") ? "audit.data" : "data.test";
  const Corpus corpus = load_corpus_for(cfg, data_key);
  const RuleSet rules = load_rules_for(cfg);
  const ScorerParams params = load_checkpoint(model_path_for(cfg, "audit.model"));

  ParamScorer scorer(params);
  const ViolationReport report = audit(scorer, corpus, rules);
  save_violation_report(report, (fs::path(cfg.out_dir()) / "violations.tsv").string());
  std::cout << violation_tsv(report);
  return 0;
}

int cmd_eval(const Config& cfg) {
  const std::string data_key = cfg.has("eval.data") ? "eval.data" : "data.test";
  LoadOptions opts = load_options(cfg);
  opts.keep_unlabeled = true;  // unlabeled instances are skipped and counted
  const Corpus corpus = load_snli(cfg.required_path(data_key), opts);
  const ScorerParams params = load_checkpoint(model_path_for(cfg, "eval.model"));

  ParamScorer scorer(params);
  const EvalResult result = evaluate(scorer, corpus);
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f", result.accuracy);
  std::cout << "accuracy\t" << buf << "\n"
            << "correct\t" << result.correct << "\n"
            << "labeled\t" << result.labeled << "\n"
            << "skipped\t" << result.skipped << "\n";
  return 0;
}

int run_command(const std::string& command, const Config& cfg) {
  try {
    if (command == "train") return cmd_train(cfg);
    if (command == "finetune") return cmd_finetune(cfg);
    if (command == "attack") return cmd_attack(cfg);
    if (command == "craft") return cmd_craft(cfg);
    if (command == "audit") return cmd_audit(cfg);
    if (command == "eval") return cmd_eval(cfg);
    std::cerr << "error: unknown command '" << command << "'\n";
    return 1;
  } catch (const user_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const io_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const format_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const parse_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace nli
