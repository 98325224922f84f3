#include "nli/craft.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>

#include "json.hpp"

namespace nli {

namespace {

std::string sentence_key(const Sentence& s) {
  std::string key;
  for (const Token& t : s.tokens) {
    key += t;
    key += '\n';
  }
  return key;
}

// S = {first var -> premise, second var -> hypothesis}; S' swaps the pair.
std::pair<Substitution, Substitution> pair_substitutions(const Rule& rule,
                                                         const Instance& inst) {
  const std::vector<std::string> vars = rule.variables();
  Substitution s, swapped;
  s[vars[0]] = inst.premise;
  swapped[vars[0]] = inst.hypothesis;
  if (vars.size() > 1) {
    s[vars[1]] = inst.hypothesis;
    swapped[vars[1]] = inst.premise;
  }
  return {std::move(s), std::move(swapped)};
}

bool body_holds(const Scorer& scorer, const Rule& rule, const Substitution& s) {
  for (const Atom& atom : rule.body) {
    if (!atom_holds(scorer, atom, s)) return false;
  }
  return true;  // the tautology body always holds
}

bool head_holds(const Scorer& scorer, const Rule& rule, const Substitution& s) {
  const bool atom = atom_holds(scorer, rule.head.atom, s);
  return rule.head.negated ? !atom : atom;
}

}  // namespace

const RuleViolations* ViolationReport::find(std::string_view rule) const {
  for (const RuleViolations& row : rows) {
    if (row.rule == rule) return &row;
  }
  return nullptr;
}

std::string violation_tsv(const ViolationReport& report) {
  std::string out = "rule\tbody\tviolations\tpct\n";
  char buf[64];
  for (const RuleViolations& row : report.rows) {
    std::snprintf(buf, sizeof(buf), "%.2f", row.percentage());
    out += row.rule + '\t' + std::to_string(row.body_count) + '\t' +
           std::to_string(row.violation_count) + '\t' + buf + '\n';
  }
  return out;
}

void save_violation_report(const ViolationReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot write violation report: " + path);
  out << violation_tsv(report);
  if (!out) throw io_error("violation report write failed: " + path);
}

double instance_score(const Scorer& scorer, const Instance& inst, const RuleSet& rules) {
  double score = 0.0;
  for (const Rule& rule : rules.rules) {
    if (rule.variables().size() > 2) continue;
    const auto [s, swapped] = pair_substitutions(rule, inst);
    score += inconsistency_loss(scorer, rule, s);
    score += inconsistency_loss(scorer, rule, swapped);
  }
  return score;
}

CraftedDataset craft_dataset(const Scorer& scorer, const Corpus& corpus, const RuleSet& rules,
                             std::size_t k, const std::string& origin_model) {
  if (k > corpus.size()) {
    throw std::invalid_argument("craft: k exceeds the corpus size (" +
                                std::to_string(corpus.size()) + ")");
  }
  std::vector<double> scores(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    scores[i] = instance_score(scorer, corpus.instances[i], rules);
  }
  // Highest score first; ties keep corpus order.
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  CraftedDataset crafted;
  crafted.origin_model = origin_model;
  crafted.k = k;
  crafted.instances.reserve(2 * k);
  crafted.scores.reserve(2 * k);
  for (std::size_t rank = 0; rank < k; ++rank) {
    const Instance& original = corpus.instances[order[rank]];
    Instance swapped;
    swapped.premise = original.hypothesis;
    swapped.hypothesis = original.premise;
    swapped.label = Label::unlabeled;
    crafted.instances.push_back(original);
    crafted.instances.push_back(std::move(swapped));
    crafted.scores.push_back(scores[order[rank]]);
    crafted.scores.push_back(scores[order[rank]]);
  }
  return crafted;
}

void save_crafted(const CraftedDataset& crafted, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot write crafted dataset: " + path);
  for (std::size_t i = 0; i < crafted.instances.size(); ++i) {
    const Instance& inst = crafted.instances[i];
    nlohmann::json obj;
    obj["gold_label"] = std::string(to_string(inst.label));
    obj["sentence1"] = inst.premise.text();
    obj["sentence2"] = inst.hypothesis.text();
    if (inst.premise.tree) obj["sentence1_parse"] = to_bracketed(*inst.premise.tree);
    if (inst.hypothesis.tree) obj["sentence2_parse"] = to_bracketed(*inst.hypothesis.tree);
    obj["inconsistency_score"] = crafted.scores[i];
    out << obj.dump() << '\n';
  }
  if (!out) throw io_error("crafted dataset write failed: " + path);
}

void save_annotation_template(const CraftedDataset& crafted, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot write annotation template: " + path);
  out << "# label the swapped pairs: entailment / contradiction / neutral\n";
  out << "pair\tsentence1\tsentence2\tlabel\n";
  for (std::size_t i = 1; i < crafted.instances.size(); i += 2) {
    const Instance& inst = crafted.instances[i];
    out << (i / 2) << '\t' << inst.premise.text() << '\t' << inst.hypothesis.text() << "\t\n";
  }
  if (!out) throw io_error("annotation template write failed: " + path);
}

ViolationReport audit(const Scorer& scorer, const Corpus& corpus, const RuleSet& rules) {
  ViolationReport report;
  for (const Rule& rule : rules.rules) {
    RuleViolations row;
    row.rule = rule.name;
    const std::vector<std::string> vars = rule.variables();

    if (vars.size() == 1) {
      // Each distinct sentence, paired with itself.
      std::set<std::string> seen;
      for (const Instance& inst : corpus.instances) {
        for (const Sentence* s : {&inst.premise, &inst.hypothesis}) {
          if (!seen.insert(sentence_key(*s)).second) continue;
          Substitution subst;
          subst[vars[0]] = *s;
          if (!body_holds(scorer, rule, subst)) continue;
          ++row.body_count;
          if (!head_holds(scorer, rule, subst)) ++row.violation_count;
        }
      }
    } else if (vars.size() == 2) {
      for (const Instance& inst : corpus.instances) {
        const auto [s, swapped] = pair_substitutions(rule, inst);
        for (const Substitution* subst : {&s, &swapped}) {
          if (!body_holds(scorer, rule, *subst)) continue;
          ++row.body_count;
          if (!head_holds(scorer, rule, *subst)) ++row.violation_count;
        }
      }
    }
    // Rules over three variables keep zero counts.
    report.rows.push_back(std::move(row));
  }
  return report;
}

EvalResult evaluate(const Scorer& scorer, const Corpus& corpus) {
  EvalResult result;
  for (const Instance& inst : corpus.instances) {
    if (inst.label == Label::unlabeled) {
      ++result.skipped;
      continue;
    }
    ++result.labeled;
    const Prediction p = scorer.predict(inst.premise, inst.hypothesis);
    if (p.argmax() == class_of_label(inst.label)) ++result.correct;
  }
  if (result.labeled == 0) {
    throw std::invalid_argument("evaluate: corpus has no labeled instances");
  }
  result.accuracy = static_cast<double>(result.correct) / static_cast<double>(result.labeled);
  return result;
}

}  // namespace nli
