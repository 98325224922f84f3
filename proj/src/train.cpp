#include "nli/train.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "nli/craft.hpp"

namespace nli {

namespace {

void validate_schedule(const Corpus& corpus, const TrainConfig& config) {
  if (corpus.empty()) throw std::invalid_argument("training corpus is empty");
  if (config.epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (config.batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (config.eta <= 0.0) throw std::invalid_argument("eta must be > 0");
  if (config.lambda < 0.0) throw std::invalid_argument("lambda must be >= 0");
  for (const Instance& inst : corpus.instances) {
    if (inst.label == Label::unlabeled) {
      throw std::invalid_argument("training corpus contains unlabeled instances");
    }
  }
}

// Shared mini-batch SGD loop. With adversarial generation disabled (rules ==
// nullptr, lambda == 0, or n_a == 0) the parameter trajectory depends only on
// (initial params, corpus order, config), so train() and fine_tune(lambda=0)
// coincide exactly.
TrainOutcome run_loop(ScorerParams params, const Corpus& corpus, const Corpus& dev,
                      const TrainConfig& config, const RuleSet* rules, const LanguageModel* lm,
                      const RuleSet* audit_rules, const BatchObserver& observer) {
  validate_schedule(corpus, config);
  const bool adversarial =
      rules != nullptr && lm != nullptr && config.lambda != 0.0 && config.adv_sets_per_batch > 0;

  TrainOutcome outcome;
  Rng shuffle_rng(derive_seed(config.rng_seed, "train", "shuffle"));
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);

  double best_acc = -1.0;
  const std::size_t batches_per_epoch =
      (corpus.size() + config.batch_size - 1) / config.batch_size;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    shuffle_rng.shuffle(order);

    EpochStats stats;
    stats.epoch = epoch;

    for (std::size_t b = 0; b < batches_per_epoch; ++b) {
      const std::size_t lo = b * config.batch_size;
      const std::size_t hi = std::min(lo + config.batch_size, corpus.size());
      std::vector<Instance> batch;
      batch.reserve(hi - lo);
      for (std::size_t i = lo; i < hi; ++i) batch.push_back(corpus.instances[order[i]]);

      std::vector<AdversarialSet> used_sets;
      std::vector<RuleGrounding> groundings;
      if (adversarial) {
        Corpus batch_corpus;
        batch_corpus.instances = batch;
        Rng search_rng(derive_seed(config.search.rng_seed, "search",
                                   "epoch" + std::to_string(epoch) + ".batch" +
                                       std::to_string(b)));
        ParamScorer frozen(params);
        SearchResult found =
            generate_adversarials(frozen, *lm, *rules, batch_corpus, config.search, search_rng);
        const std::size_t take = std::min(config.adv_sets_per_batch, found.sets.size());
        used_sets.assign(found.sets.begin(),
                         found.sets.begin() + static_cast<std::ptrdiff_t>(take));
        groundings.reserve(take);
        for (const AdversarialSet& set : used_sets) {
          groundings.push_back(RuleGrounding{rules->find(set.rule_name), &set.substitution});
        }
      }

      auto [loss, grad] = loss_and_grad(params, batch, groundings, config.lambda);
      // Recomputed through the public scorer path while the parameters are
      // still frozen, so observers can audit the objective accounting.
      const double observed_data = observer ? data_loss(params, batch) : 0.0;
      sgd_step(params, grad, config.eta);
      ++outcome.report.updates;

      double adv_sum = 0.0;
      for (const AdversarialSet& set : used_sets) adv_sum += set.loss;
      stats.data_loss += loss - config.lambda * adv_sum;
      stats.adv_loss += adv_sum;

      if (observer) {
        BatchLog log;
        log.epoch = epoch;
        log.batch = b;
        log.data_loss = observed_data;
        log.adv_loss = adv_sum;
        log.total_loss = loss;
        log.adv_sets = std::move(used_sets);
        observer(log);
      }
    }

    ParamScorer frozen(params);
    stats.dev_accuracy = dev.empty() ? 0.0 : evaluate(frozen, dev).accuracy;
    if (audit_rules != nullptr && !dev.empty()) {
      const ViolationReport report = audit(frozen, dev, *audit_rules);
      for (const RuleViolations& row : report.rows) {
        stats.violation_pct.emplace_back(row.rule, row.percentage());
      }
    }
    stats.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    outcome.report.epochs.push_back(std::move(stats));

    if (outcome.report.epochs.back().dev_accuracy > best_acc) {
      best_acc = outcome.report.epochs.back().dev_accuracy;
      outcome.best_params = params;
      outcome.best_epoch = epoch;
    }
  }

  outcome.params = std::move(params);
  return outcome;
}

}  // namespace

TrainOutcome train(ScorerParams initial, const Corpus& corpus, const Corpus& dev,
                   const TrainConfig& config, const RuleSet* audit_rules) {
  if (config.lambda != 0.0) {
    throw std::invalid_argument("train() requires lambda = 0; use fine_tune()");
  }
  return run_loop(std::move(initial), corpus, dev, config, nullptr, nullptr, audit_rules, {});
}

TrainOutcome fine_tune(ScorerParams params, const Corpus& corpus, const Corpus& dev,
                       const RuleSet& rules, const LanguageModel& lm, const TrainConfig& config,
                       const BatchObserver& observer) {
  return run_loop(std::move(params), corpus, dev, config, &rules, &lm, &rules, observer);
}

std::string report_tsv(const TrainReport& report) {
  std::string out = "epoch\tdata_loss\tadv_loss\tdev_acc";
  if (!report.epochs.empty()) {
    for (const auto& [rule, pct] : report.epochs.front().violation_pct) {
      out += "\tviol_" + rule;
    }
  }
  out += "\tseconds\n";
  char buf[128];
  for (const EpochStats& e : report.epochs) {
    std::snprintf(buf, sizeof(buf), "%zu\t%.6f\t%.6f\t%.4f", e.epoch, e.data_loss, e.adv_loss,
                  e.dev_accuracy);
    out += buf;
    for (const auto& [rule, pct] : e.violation_pct) {
      std::snprintf(buf, sizeof(buf), "\t%.2f", pct);
      out += buf;
    }
    std::snprintf(buf, sizeof(buf), "\t%.3f\n", e.seconds);
    out += buf;
  }
  return out;
}

void save_report(const TrainReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot write training report: " + path);
  out << report_tsv(report);
  if (!out) throw io_error("training report write failed: " + path);
}

}  // namespace nli
