#include "nli/lm.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace nli {

namespace {

std::vector<Token> normalized_tokens(const LanguageModel& lm, const Sentence& s) {
  std::vector<Token> out;
  out.reserve(s.tokens.size());
  for (const Token& t : s.tokens) out.push_back(lm.lowercase ? lowercased(t) : t);
  return out;
}

std::string context_key(const std::vector<Token>& padded, std::size_t pos, std::size_t order) {
  // Exactly order-1 tokens precede every position thanks to BOS padding.
  std::string key;
  for (std::size_t i = pos + 1 - order; i < pos; ++i) {
    if (!key.empty()) key += '\t';
    key += padded[i];
  }
  return key;
}

std::vector<Token> padded_events(const LanguageModel& lm, const Sentence& s) {
  std::vector<Token> padded(lm.order - 1, Vocab::kBosText);
  for (Token& t : normalized_tokens(lm, s)) padded.push_back(std::move(t));
  padded.push_back(Vocab::kEosText);
  return padded;
}

}  // namespace

double LanguageModel::cond_prob(const std::vector<Token>& context, const Token& token) const {
  std::string key;
  for (const Token& t : context) {
    if (!key.empty()) key += '\t';
    key += t;
  }
  std::uint64_t total = 0;
  std::uint64_t count = 0;
  if (auto ctx_it = counts.find(key); ctx_it != counts.end()) {
    total = context_totals.at(key);
    if (auto tok_it = ctx_it->second.find(token); tok_it != ctx_it->second.end()) {
      count = tok_it->second;
    }
  }
  return (static_cast<double>(count) + delta) /
         (static_cast<double>(total) + delta * static_cast<double>(vocab_size));
}

LanguageModel fit_lm(const Corpus& corpus, std::size_t order, double delta, bool lowercase) {
  if (order < 1) throw std::invalid_argument("lm order must be >= 1");
  if (delta <= 0.0) throw std::invalid_argument("lm delta must be > 0");

  LanguageModel lm;
  lm.order = order;
  lm.delta = delta;
  lm.lowercase = lowercase;

  std::size_t sentences = 0;
  auto tally = [&](const Sentence& s) {
    if (s.tokens.empty()) return;
    ++sentences;
    const std::vector<Token> padded = padded_events(lm, s);
    for (std::size_t pos = order - 1; pos < padded.size(); ++pos) {
      const std::string key = context_key(padded, pos, order);
      lm.counts[key][padded[pos]] += 1;
      lm.context_totals[key] += 1;
      lm.token_totals[padded[pos]] += 1;
    }
  };
  for (const Instance& inst : corpus.instances) {
    tally(inst.premise);
    tally(inst.hypothesis);
  }
  if (sentences == 0) {
    throw std::invalid_argument("degenerate corpus: no sentences to fit the language model");
  }
  lm.vocab_size = lm.token_totals.size();
  return lm;
}

double log_prob(const LanguageModel& lm, const Sentence& s) {
  const std::vector<Token> padded = padded_events(lm, s);
  double lp = 0.0;
  std::vector<Token> context;
  for (std::size_t pos = lm.order - 1; pos < padded.size(); ++pos) {
    context.assign(padded.begin() + static_cast<std::ptrdiff_t>(pos + 1 - lm.order),
                   padded.begin() + static_cast<std::ptrdiff_t>(pos));
    lp += std::log(lm.cond_prob(context, padded[pos]));
  }
  return lp;
}

double per_token_nll(const LanguageModel& lm, const Sentence& s) {
  return -log_prob(lm, s) / static_cast<double>(s.tokens.size() + 1);
}

bool admissible(const LanguageModel& lm, const Substitution& s, double tau) {
  for (const auto& [var, sentence] : s) {
    if (per_token_nll(lm, sentence) > tau) return false;
  }
  return true;
}

void save_lm(const LanguageModel& lm, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot write language model: " + path);
  char delta_text[64];
  std::snprintf(delta_text, sizeof(delta_text), "%.17g", lm.delta);
  out << "NLILM 1 " << lm.order << ' ' << delta_text << ' ' << lm.vocab_size << '\n';
  for (const auto& [context, tokens] : lm.counts) {
    for (const auto& [token, count] : tokens) {
      if (!context.empty()) out << context << '\t';
      out << token << '\t' << count << '\n';
    }
  }
  if (!out) throw io_error("language model write failed: " + path);
}

LanguageModel load_lm(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open language model: " + path);
  std::string line;
  if (!std::getline(in, line)) throw format_error(path + ": empty language model file");

  LanguageModel lm;
  {
    std::istringstream header(line);
    std::string magic;
    int version = 0;
    header >> magic >> version >> lm.order >> lm.delta >> lm.vocab_size;
    if (magic != "NLILM" || version != 1 || !header || lm.order < 1) {
      throw format_error(path + ": bad language model header '" + line + "'");
    }
  }

  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      const std::size_t tab = line.find('\t', start);
      fields.push_back(line.substr(start, tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (fields.size() != lm.order + 1) {
      throw format_error(path + ":" + std::to_string(line_no) + ": expected " +
                         std::to_string(lm.order + 1) + " fields");
    }
    std::string key;
    for (std::size_t i = 0; i + 2 < fields.size(); ++i) {
      if (!key.empty()) key += '\t';
      key += fields[i];
    }
    const std::string& token = fields[fields.size() - 2];
    const std::uint64_t count = std::stoull(fields.back());
    lm.counts[key][token] += count;
    lm.context_totals[key] += count;
    lm.token_totals[token] += count;
  }
  return lm;
}

}  // namespace nli
