#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "nli/corpus.hpp"
#include "nli/lm.hpp"
#include "nli/model.hpp"
#include "nli/rules.hpp"
#include "nli/search.hpp"

namespace nli {

struct TrainConfig {
  double eta = 0.05;
  std::size_t epochs = 5;
  std::size_t batch_size = 32;
  double lambda = 0.0;
  std::size_t adv_sets_per_batch = 4;   // n_a
  std::uint64_t rng_seed = 0;
  SearchConfig search;
};

struct EpochStats {
  std::size_t epoch = 0;            // 1-based
  double data_loss = 0.0;           // summed over the epoch's batches
  double adv_loss = 0.0;            // unweighted sum of inconsistency losses
  double dev_accuracy = 0.0;
  std::vector<std::pair<std::string, double>> violation_pct;  // per audited rule
  double seconds = 0.0;
};

struct TrainReport {
  std::vector<EpochStats> epochs;
  std::size_t updates = 0;
};

struct TrainOutcome {
  ScorerParams params;       // after the last epoch
  ScorerParams best_params;  // best dev accuracy
  std::size_t best_epoch = 0;
  TrainReport report;
};

// Per-batch record handed to the observer; lets callers re-check the
// objective accounting and the LM gate independently.
struct BatchLog {
  std::size_t epoch = 0;
  std::size_t batch = 0;
  double data_loss = 0.0;
  double adv_loss = 0.0;      // unweighted sum over the used sets
  double total_loss = 0.0;    // data_loss + lambda * adv_loss
  std::vector<AdversarialSet> adv_sets;
};

using BatchObserver = std::function<void(const BatchLog&)>;

// Mini-batch SGD on the cross-entropy loss, shuffling each epoch with a
// stream derived from config.rng_seed. When audit_rules is given, the dev
// violation percentages are reported per epoch.
TrainOutcome train(ScorerParams initial, const Corpus& corpus, const Corpus& dev,
                   const TrainConfig& config, const RuleSet* audit_rules = nullptr);

// Adversarially regularised fine-tuning: per batch, generate adversarial
// substitution sets, keep the top n_a, and descend on
// data_loss + lambda * sum inconsistency_loss. With lambda == 0 or n_a == 0
// the generation phase is skipped and the parameter trajectory is identical
// to train() under the same seed and schedule.
TrainOutcome fine_tune(ScorerParams params, const Corpus& corpus, const Corpus& dev,
                       const RuleSet& rules, const LanguageModel& lm, const TrainConfig& config,
                       const BatchObserver& observer = {});

// TSV rendering of the per-epoch report (one row per epoch).
std::string report_tsv(const TrainReport& report);
void save_report(const TrainReport& report, const std::string& path);

}  // namespace nli
