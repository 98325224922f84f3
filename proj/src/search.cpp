#include "nli/search.hpp"

#include <algorithm>
#include <fstream>

#include "json.hpp"

namespace nli {

namespace {

// Dotted child-index path of every internal node, depth-first. The root's
// path is "".
void collect_internal(const ParseTree& node, const std::string& path,
                      std::vector<std::pair<std::string, const ParseTree*>>& out) {
  if (node.is_leaf()) return;
  out.emplace_back(path, &node);
  for (std::size_t i = 0; i < node.children.size(); ++i) {
    collect_internal(node.children[i], path.empty() ? std::to_string(i)
                                                    : path + '.' + std::to_string(i),
                     out);
  }
}

std::vector<std::size_t> parse_path(const std::string& path) {
  std::vector<std::size_t> out;
  std::size_t start = 0;
  while (start < path.size()) {
    std::size_t dot = path.find('.', start);
    if (dot == std::string::npos) dot = path.size();
    out.push_back(std::stoul(path.substr(start, dot - start)));
    start = dot + 1;
  }
  return out;
}

// Removes the node at path; empty ancestors collapse upward. Returns false
// when the removal would delete the last leaf (root left childless).
bool remove_subtree(ParseTree& root, const std::vector<std::size_t>& path) {
  ParseTree* node = &root;
  std::vector<ParseTree*> chain{node};
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    node = &node->children[path[i]];
    chain.push_back(node);
  }
  node->children.erase(node->children.begin() + static_cast<std::ptrdiff_t>(path.back()));
  // Collapse ancestors emptied by the removal.
  for (std::size_t i = chain.size(); i-- > 1;) {
    if (!chain[i]->children.empty()) break;
    chain[i - 1]->children.erase(chain[i - 1]->children.begin() +
                                 static_cast<std::ptrdiff_t>(path[i - 1]));
  }
  return !root.children.empty();
}

void replace_leaf(ParseTree& node, std::size_t& leaf_index, std::size_t target,
                  const Token& replacement) {
  if (node.is_leaf()) {
    if (leaf_index == target) node.token = replacement;
    ++leaf_index;
    return;
  }
  for (ParseTree& child : node.children) replace_leaf(child, leaf_index, target, replacement);
}

std::size_t leaf_count(const ParseTree& node) {
  if (node.is_leaf()) return 1;
  std::size_t n = 0;
  for (const ParseTree& child : node.children) n += leaf_count(child);
  return n;
}

void word_swap_edits(const Sentence& s, const LanguageModel& lm, const SearchConfig& config,
                     Rng& rng, std::vector<Edit>& out) {
  const std::size_t len = s.tokens.size();
  std::vector<std::size_t> sites;
  if (len <= config.max_sites_per_sentence) {
    for (std::size_t i = 0; i < len; ++i) sites.push_back(i);
  } else {
    sites = rng.sample_indices(len, config.max_sites_per_sentence);
  }

  std::vector<Token> norm;
  norm.reserve(len);
  for (const Token& t : s.tokens) norm.push_back(lm.lowercase ? lowercased(t) : t);

  for (std::size_t site : sites) {
    // LM context at the site: the previous order-1 tokens, BOS-padded.
    std::vector<Token> context;
    for (std::size_t back = lm.order - 1; back > 0; --back) {
      if (site >= back) {
        context.push_back(norm[site - back]);
      } else {
        context.push_back(Vocab::kBosText);
      }
    }

    // Rank the LM's tokens by conditional probability at the site; ties fall
    // back to lexicographic order (the map iteration order).
    std::vector<std::pair<double, const std::string*>> scored;
    scored.reserve(lm.token_totals.size());
    for (const auto& [token, total] : lm.token_totals) {
      if (token == Vocab::kEosText || token == Vocab::kBosText || token == norm[site]) continue;
      scored.emplace_back(lm.cond_prob(context, token), &token);
    }
    const std::size_t take = std::min(config.word_candidates_per_site, scored.size());
    std::stable_sort(scored.begin(), scored.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });

    for (std::size_t r = 0; r < take; ++r) {
      const Token& replacement = *scored[r].second;
      Sentence edited = s;
      edited.tokens[site] = replacement;
      if (edited.tree) {
        std::size_t leaf = 0;
        replace_leaf(*edited.tree, leaf, site, replacement);
      }
      out.push_back(Edit{std::move(edited),
                         Perturbation{PerturbationKind::word_swap, std::to_string(site),
                                      replacement}});
    }
  }
}

void subtree_delete_edits(const Sentence& s, const SearchConfig& config, Rng& rng,
                          std::vector<Edit>& out) {
  std::vector<std::pair<std::string, const ParseTree*>> internal;
  collect_internal(*s.tree, "", internal);
  // Skip the root: only proper subtrees are removable.
  std::vector<std::size_t> eligible;
  for (std::size_t i = 1; i < internal.size(); ++i) eligible.push_back(i);

  std::vector<std::size_t> chosen;
  if (eligible.size() <= config.max_sites_per_sentence) {
    chosen = eligible;
  } else {
    for (std::size_t pick : rng.sample_indices(eligible.size(), config.max_sites_per_sentence)) {
      chosen.push_back(eligible[pick]);
    }
  }

  for (std::size_t idx : chosen) {
    const std::string& path = internal[idx].first;
    ParseTree edited_tree = *s.tree;
    if (!remove_subtree(edited_tree, parse_path(path))) continue;
    std::vector<Token> tokens = linearize(edited_tree);
    if (tokens.empty()) continue;  // deletion must leave at least one token
    Sentence edited;
    edited.tokens = std::move(tokens);
    edited.tree = std::move(edited_tree);
    out.push_back(Edit{std::move(edited),
                       Perturbation{PerturbationKind::subtree_delete, path, ""}});
  }
}

void subtree_insert_edits(const Sentence& s, const Corpus& corpus, const SearchConfig& config,
                          Rng& rng, std::vector<Edit>& out) {
  std::vector<std::pair<std::string, const ParseTree*>> targets;
  collect_internal(*s.tree, "", targets);
  if (targets.empty()) return;

  const std::size_t max_tries = config.max_sites_per_sentence * 10;
  std::size_t produced = 0;
  for (std::size_t attempt = 0; attempt < max_tries && produced < config.max_sites_per_sentence;
       ++attempt) {
    const Instance& donor_inst = corpus.instances[rng.index(corpus.size())];
    const Sentence& donor_sent = rng.index(2) == 0 ? donor_inst.premise : donor_inst.hypothesis;
    if (!donor_sent.tree) continue;
    std::vector<std::pair<std::string, const ParseTree*>> donor_nodes;
    collect_internal(*donor_sent.tree, "", donor_nodes);
    std::vector<const ParseTree*> small;
    for (const auto& [path, node] : donor_nodes) {
      if (leaf_count(*node) <= 5) small.push_back(node);
    }
    if (small.empty()) continue;
    const ParseTree& donor = *small[rng.index(small.size())];

    const auto& [target_path, target_node] = targets[rng.index(targets.size())];
    const std::size_t position = rng.index(target_node->children.size() + 1);

    ParseTree edited_tree = *s.tree;
    ParseTree* node = &edited_tree;
    for (std::size_t step : parse_path(target_path)) node = &node->children[step];
    node->children.insert(node->children.begin() + static_cast<std::ptrdiff_t>(position), donor);

    Sentence edited;
    edited.tokens = linearize(edited_tree);
    edited.tree = std::move(edited_tree);
    const std::string site = target_path + ':' + std::to_string(position);
    out.push_back(Edit{std::move(edited),
                       Perturbation{PerturbationKind::subtree_insert, site, to_bracketed(donor)}});
    ++produced;
  }
}

}  // namespace

std::string_view to_string(PerturbationKind kind) {
  switch (kind) {
    case PerturbationKind::word_swap: return "word_swap";
    case PerturbationKind::subtree_delete: return "subtree_delete";
    case PerturbationKind::subtree_insert: return "subtree_insert";
  }
  return "word_swap";
}

std::vector<Edit> enumerate_perturbations(const Sentence& s, const Corpus& corpus,
                                          const LanguageModel& lm, const SearchConfig& config,
                                          Rng& rng) {
  std::vector<Edit> out;
  if (config.enabled_kinds.count(PerturbationKind::word_swap)) {
    word_swap_edits(s, lm, config, rng, out);
  }
  if (s.tree) {
    if (config.enabled_kinds.count(PerturbationKind::subtree_delete)) {
      subtree_delete_edits(s, config, rng, out);
    }
    if (config.enabled_kinds.count(PerturbationKind::subtree_insert)) {
      subtree_insert_edits(s, corpus, config, rng, out);
    }
  }
  return out;
}

SearchResult generate_adversarials(const Scorer& scorer, const LanguageModel& lm,
                                   const RuleSet& rules, const Corpus& corpus,
                                   const SearchConfig& config, Rng& rng) {
  if (corpus.empty()) throw std::invalid_argument("cannot search an empty corpus");

  SearchResult result;
  bool pool_full = false;

  auto push_candidate = [&](const Rule& rule, Substitution subst, std::size_t seed_index,
                            const std::string& var, const Perturbation& perturbation) {
    if (result.pool.size() >= config.pool_size) {
      pool_full = true;
      return;
    }
    PoolEntry entry;
    entry.rule_name = rule.name;
    entry.substitution = std::move(subst);
    entry.seed_index = seed_index;
    entry.perturbed_var = var;
    entry.perturbation = perturbation;
    entry.admissible = admissible(lm, entry.substitution, config.tau);
    if (entry.admissible) {
      entry.loss = inconsistency_loss(scorer, rule, entry.substitution);
    }
    result.pool.push_back(std::move(entry));
  };

  for (std::size_t round = 0; round < config.seeds_per_round && !pool_full; ++round) {
    const std::size_t seed_index = rng.index(corpus.size());
    const Instance& seed = corpus.instances[seed_index];

    // One perturbation pool per seed sentence, shared across rules.
    const std::vector<Edit> premise_edits =
        enumerate_perturbations(seed.premise, corpus, lm, config, rng);
    const std::vector<Edit> hypothesis_edits =
        enumerate_perturbations(seed.hypothesis, corpus, lm, config, rng);
    const Sentence* sides[2] = {&seed.premise, &seed.hypothesis};
    const std::vector<Edit>* side_edits[2] = {&premise_edits, &hypothesis_edits};

    for (const Rule& rule : rules.rules) {
      if (pool_full) break;
      const std::vector<std::string> vars = rule.variables();

      if (vars.size() == 3) {
        // The third variable binds to a perturbation of the second binding.
        for (const Edit& edit : hypothesis_edits) {
          Substitution subst;
          subst[vars[0]] = seed.premise;
          subst[vars[1]] = seed.hypothesis;
          subst[vars[2]] = edit.sentence;
          push_candidate(rule, std::move(subst), seed_index, vars[2], edit.perturbation);
          if (pool_full) break;
        }
        continue;
      }

      // 1- and 2-variable rules: both orientations of the pair, one
      // perturbed variable per candidate.
      for (int orient = 0; orient < 2 && !pool_full; ++orient) {
        Substitution base;
        if (vars.size() == 1) {
          base[vars[0]] = *sides[orient];
        } else {
          base[vars[0]] = *sides[orient];
          base[vars[1]] = *sides[1 - orient];
        }
        for (std::size_t vi = 0; vi < vars.size() && !pool_full; ++vi) {
          const bool var_is_premise_side = (vi == 0) == (orient == 0);
          const std::vector<Edit>& edits = *side_edits[var_is_premise_side ? 0 : 1];
          for (const Edit& edit : edits) {
            Substitution subst = base;
            subst[vars[vi]] = edit.sentence;
            push_candidate(rule, std::move(subst), seed_index, vars[vi], edit.perturbation);
            if (pool_full) break;
          }
        }
      }
    }
  }

  // Rank the admissible candidates: loss descending, then rule name, then
  // generation order. The key is total, so the result is deterministic.
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < result.pool.size(); ++i) {
    if (result.pool[i].admissible) order.push_back(i);
  }
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const PoolEntry& ea = result.pool[a];
    const PoolEntry& eb = result.pool[b];
    if (ea.loss != eb.loss) return ea.loss > eb.loss;
    if (ea.rule_name != eb.rule_name) return ea.rule_name < eb.rule_name;
    return a < b;
  });
  result.sets.reserve(order.size());
  for (std::size_t i : order) {
    const PoolEntry& e = result.pool[i];
    AdversarialSet set;
    set.rule_name = e.rule_name;
    set.substitution = e.substitution;
    set.loss = e.loss;
    set.seed_index = e.seed_index;
    set.perturbed_var = e.perturbed_var;
    set.perturbation = e.perturbation;
    result.sets.push_back(std::move(set));
  }
  return result;
}

void save_adversarials(const std::vector<AdversarialSet>& sets, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot write adversarial sets: " + path);
  for (const AdversarialSet& set : sets) {
    nlohmann::json obj;
    obj["rule"] = set.rule_name;
    obj["loss"] = set.loss;
    nlohmann::json sentences = nlohmann::json::object();
    for (const auto& [var, sentence] : set.substitution) {
      sentences[var] = sentence.tokens;
    }
    obj["sentences"] = std::move(sentences);
    obj["provenance"] = {{"seed", set.seed_index},
                         {"var", set.perturbed_var},
                         {"kind", std::string(to_string(set.perturbation.kind))},
                         {"site", set.perturbation.site},
                         {"payload", set.perturbation.payload}};
    out << obj.dump() << '\n';
  }
  if (!out) throw io_error("adversarial set write failed: " + path);
}

}  // namespace nli
