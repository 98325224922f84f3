#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "nli/corpus.hpp"
#include "nli/rules.hpp"

namespace nli {

// Additive-smoothed n-gram language model. Counts are collected over every
// premise and hypothesis sentence, each padded with (order-1) BOS tokens and
// one terminating EOS. Immutable after fit; all queries are pure.
struct LanguageModel {
  std::size_t order = 3;
  double delta = 0.1;
  std::size_t vocab_size = 0;   // distinct predicted tokens, EOS included
  bool lowercase = true;

  // context key (tokens TAB-joined, "" for the unigram context) -> token -> count
  std::map<std::string, std::map<std::string, std::uint64_t>> counts;
  std::map<std::string, std::uint64_t> context_totals;
  // token -> total occurrences; iteration order doubles as the candidate
  // ranking tie-break
  std::map<std::string, std::uint64_t> token_totals;

  // Smoothed p(token | context tokens). context holds up to order-1
  // normalized tokens, most recent last.
  double cond_prob(const std::vector<Token>& context, const Token& token) const;
};

LanguageModel fit_lm(const Corpus& corpus, std::size_t order, double delta,
                     bool lowercase = true);

// Sum of smoothed log-probabilities over the padded positions of s, the EOS
// event included; natural log.
double log_prob(const LanguageModel& lm, const Sentence& s);

// -log_prob / (length + 1): the log of the per-token perplexity.
double per_token_nll(const LanguageModel& lm, const Sentence& s);

// True iff every sentence bound in s clears the perplexity gate.
bool admissible(const LanguageModel& lm, const Substitution& s, double tau);

// Versioned text serialization; round-trips exactly.
void save_lm(const LanguageModel& lm, const std::string& path);
LanguageModel load_lm(const std::string& path);

}  // namespace nli
