#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "nli/corpus.hpp"
#include "nli/lm.hpp"
#include "nli/rng.hpp"
#include "nli/rules.hpp"
#include "nli/scorer.hpp"

namespace nli {

enum class PerturbationKind { word_swap, subtree_delete, subtree_insert };

std::string_view to_string(PerturbationKind kind);

// One edit applied to one sentence. site is a token index (word_swap) or a
// dotted child-index path into the tree (subtree edits, e.g. "0.2");
// payload is the replacement token or the bracketed donor subtree.
struct Perturbation {
  PerturbationKind kind = PerturbationKind::word_swap;
  std::string site;
  std::string payload;
};

struct SearchConfig {
  std::size_t seeds_per_round = 32;
  std::size_t pool_size = 512;
  double tau = 10.0;                        // per-token NLL gate
  std::size_t word_candidates_per_site = 4;
  std::size_t max_sites_per_sentence = 4;
  std::uint64_t rng_seed = 0;
  std::set<PerturbationKind> enabled_kinds = {PerturbationKind::word_swap,
                                              PerturbationKind::subtree_delete,
                                              PerturbationKind::subtree_insert};
};

// A sentence one edit away from its prototype.
struct Edit {
  Sentence sentence;
  Perturbation perturbation;
};

// All single-edit variants of s, deterministically derived from rng:
//   word_swap      -- up to max_sites sites x word_candidates_per_site
//                     replacements, ranked by LM conditional at the site;
//   subtree_delete -- up to max_sites non-root internal nodes removed
//                     (candidates that would empty the sentence are skipped);
//   subtree_insert -- up to max_sites donor constituents (<= 5 leaves)
//                     sampled from corpus parses and grafted at a sampled
//                     internal node.
// Tree perturbations require s.tree; without it only word_swap applies.
std::vector<Edit> enumerate_perturbations(const Sentence& s, const Corpus& corpus,
                                          const LanguageModel& lm, const SearchConfig& config,
                                          Rng& rng);

// A substitution set that made a rule fire, with where it came from.
struct AdversarialSet {
  std::string rule_name;
  Substitution substitution;
  double loss = 0.0;
  std::size_t seed_index = 0;       // instance index in the seed corpus
  std::string perturbed_var;
  Perturbation perturbation;
};

// The full candidate pool is logged so tests can re-rank it independently.
struct PoolEntry {
  std::string rule_name;
  Substitution substitution;
  bool admissible = false;
  double loss = 0.0;                // only meaningful when admissible
  std::size_t seed_index = 0;
  std::string perturbed_var;
  Perturbation perturbation;
};

struct SearchResult {
  std::vector<AdversarialSet> sets;  // admissible candidates, loss descending
  std::vector<PoolEntry> pool;       // every generated candidate, in order
};

// Stochastic perturbation re-ranking: sample seed instances, bind rule
// variables to their sentences (both orientations for 2-variable rules; the
// third variable of a 3-variable rule binds to a perturbation of the second),
// perturb one bound sentence per candidate, drop candidates failing the LM
// gate, score the rest with the inconsistency loss, and return them sorted by
// loss descending (ties: rule name, then generation order).
SearchResult generate_adversarials(const Scorer& scorer, const LanguageModel& lm,
                                   const RuleSet& rules, const Corpus& corpus,
                                   const SearchConfig& config, Rng& rng);

// JSONL serialization of ranked adversarial sets (one set per line).
void save_adversarials(const std::vector<AdversarialSet>& sets, const std::string& path);

}  // namespace nli
