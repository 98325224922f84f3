#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nli/corpus.hpp"
#include "nli/rules.hpp"
#include "nli/scorer.hpp"

namespace nli {

struct RuleViolations {
  std::string rule;
  std::uint64_t body_count = 0;       // groundings where the body holds
  std::uint64_t violation_count = 0;  // body holds, head does not

  double percentage() const {
    return body_count == 0
               ? 0.0
               : 100.0 * static_cast<double>(violation_count) / static_cast<double>(body_count);
  }
};

struct ViolationReport {
  std::vector<RuleViolations> rows;

  const RuleViolations* find(std::string_view rule) const;
};

// "rule<TAB>body<TAB>violations<TAB>pct" with pct at 2 decimals.
std::string violation_tsv(const ViolationReport& report);
void save_violation_report(const ViolationReport& report, const std::string& path);

// Sum over the rules with at most two distinct variables of the
// inconsistency loss under both pair orientations: the rule's first variable
// binds the premise and the second the hypothesis, then swapped. Label-free.
double instance_score(const Scorer& scorer, const Instance& inst, const RuleSet& rules);

// The k highest-inconsistency pairs and their swaps: even positions hold the
// originals (gold labels), odd positions the swapped pairs ("unlabeled").
// scores is parallel to instances; both members of a pair carry the pair's
// score, non-increasing over pairs.
struct CraftedDataset {
  std::vector<Instance> instances;
  std::vector<double> scores;
  std::string origin_model;
  std::size_t k = 0;
};

CraftedDataset craft_dataset(const Scorer& scorer, const Corpus& corpus, const RuleSet& rules,
                             std::size_t k, const std::string& origin_model = "");

// SNLI-compatible JSONL with gold_label "-" on swaps and an extra
// "inconsistency_score" field per line.
void save_crafted(const CraftedDataset& crafted, const std::string& path);

// Annotation template for the swapped pairs (TSV with an empty label column).
void save_annotation_template(const CraftedDataset& crafted, const std::string& path);

// Counts, per rule, how often the body holds under argmax predictions while
// the head does not. Rules with one or two distinct variables ground over
// both orderings of every instance pair; a single-variable rule grounds over
// each distinct sentence paired with itself. Rules with three variables are
// reported with zero counts (triple enumeration is out of scope).
ViolationReport audit(const Scorer& scorer, const Corpus& corpus, const RuleSet& rules);

struct EvalResult {
  double accuracy = 0.0;
  std::size_t correct = 0;
  std::size_t labeled = 0;
  std::size_t skipped = 0;  // unlabeled instances
};

// Fraction of labeled instances whose argmax class matches the gold label.
// Throws std::invalid_argument when the corpus has no labeled instance.
EvalResult evaluate(const Scorer& scorer, const Corpus& corpus);

}  // namespace nli
