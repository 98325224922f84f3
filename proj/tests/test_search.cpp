#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <set>

#include "nli/lm.hpp"
#include "nli/model.hpp"
#include "nli/search.hpp"
#include "support/stub_scorer.hpp"
#include "support/synth.hpp"

using namespace nli;
using nli::testing::ConsistentStubScorer;
using nli::testing::make_sentence;

namespace {

const char* kTableRules =
    "r1: true => ent(X1,X1)\n"
    "r2: con(X1,X2) => con(X2,X1)\n"
    "r3: ent(X1,X2) => ~con(X2,X1)\n"
    "r4: neu(X1,X2) => ~con(X2,X1)\n"
    "r5: ent(X1,X2) & ent(X2,X3) => ent(X1,X3)\n";

struct Fixture {
  Corpus corpus = nli::testing::make_synth_corpus(60, 13);
  LanguageModel lm = fit_lm(corpus, 2, 0.1);
  RuleSet rules = parse_rules(kTableRules);
  ScorerParams params;

  Fixture() {
    ScorerConfig cfg;
    cfg.embedding_dim = 8;
    cfg.hidden_dim = 12;
    cfg.rng_seed = 5;
    cfg.init_scale = 0.4;
    params = init_params(cfg, build_vocab(corpus, 1));
  }
};

bool is_subsequence(const std::vector<Token>& small, const std::vector<Token>& big) {
  std::size_t i = 0;
  for (const Token& t : big) {
    if (i < small.size() && small[i] == t) ++i;
  }
  return i == small.size();
}

}  // namespace

TEST_CASE("word swaps on a treeless single-token sentence") {
  Fixture fx;
  SearchConfig cfg;
  cfg.enabled_kinds = {PerturbationKind::word_swap};
  cfg.word_candidates_per_site = 3;
  Sentence s = make_sentence("dog");

  Rng rng(1);
  const std::vector<Edit> edits = enumerate_perturbations(s, fx.corpus, fx.lm, cfg, rng);
  CHECK(edits.size() <= 3);
  CHECK(!edits.empty());
  for (const Edit& e : edits) {
    CHECK(e.sentence.tokens.size() == 1);
    CHECK(e.sentence.tokens[0] != "dog");
    CHECK(e.perturbation.kind == PerturbationKind::word_swap);
    CHECK(e.perturbation.site == "0");
  }
}

TEST_CASE("word swap candidates are ranked by LM conditional probability") {
  Fixture fx;
  SearchConfig cfg;
  cfg.enabled_kinds = {PerturbationKind::word_swap};
  cfg.word_candidates_per_site = 4;
  cfg.max_sites_per_sentence = 1;
  Sentence s = make_sentence("the dog");  // single sampled site still deterministic

  Rng rng(3);
  const std::vector<Edit> edits = enumerate_perturbations(s, fx.corpus, fx.lm, cfg, rng);
  REQUIRE(!edits.empty());
  // Recompute the conditional of each replacement at its site and verify the
  // per-site ordering is non-increasing.
  std::map<std::string, std::vector<double>> per_site;
  for (const Edit& e : edits) {
    const std::size_t site = std::stoul(e.perturbation.site);
    std::vector<Token> ctx;
    if (site >= 1) {
      ctx.push_back(lowercased(s.tokens[site - 1]));
    } else {
      ctx.push_back(Vocab::kBosText);
    }
    per_site[e.perturbation.site].push_back(fx.lm.cond_prob(ctx, e.perturbation.payload));
  }
  for (const auto& [site, probs] : per_site) {
    for (std::size_t i = 1; i < probs.size(); ++i) CHECK(probs[i] <= probs[i - 1] + 1e-15);
  }
}

TEST_CASE("subtree deletion removes one constituent and keeps tokens nonempty") {
  Fixture fx;
  SearchConfig cfg;
  cfg.enabled_kinds = {PerturbationKind::subtree_delete};
  cfg.max_sites_per_sentence = 16;

  Sentence s;
  s.tree = parse_tree("(ROOT (NP (DT A) (NN dog)) (VP (VBZ runs)))");
  s.tokens = linearize(*s.tree);

  Rng rng(2);
  const std::vector<Edit> edits = enumerate_perturbations(s, fx.corpus, fx.lm, cfg, rng);
  REQUIRE(!edits.empty());
  bool saw_vp_delete = false;
  for (const Edit& e : edits) {
    CHECK(!e.sentence.tokens.empty());
    CHECK(e.sentence.tokens.size() < s.tokens.size());
    CHECK(is_subsequence(e.sentence.tokens, s.tokens));
    if (e.sentence.tokens == std::vector<Token>{"A", "dog"}) saw_vp_delete = true;
  }
  CHECK(saw_vp_delete);
}

TEST_CASE("deletions that would empty the sentence are skipped") {
  Fixture fx;
  SearchConfig cfg;
  cfg.enabled_kinds = {PerturbationKind::subtree_delete};

  Sentence s;
  s.tree = parse_tree("(ROOT (VP (VBZ runs)))");
  s.tokens = linearize(*s.tree);

  Rng rng(2);
  CHECK(enumerate_perturbations(s, fx.corpus, fx.lm, cfg, rng).empty());
}

TEST_CASE("subtree insertion grafts a donor constituent") {
  Fixture fx;
  SearchConfig cfg;
  cfg.enabled_kinds = {PerturbationKind::subtree_insert};
  cfg.max_sites_per_sentence = 4;

  const Sentence& s = fx.corpus.instances[0].premise;
  Rng rng(4);
  const std::vector<Edit> edits = enumerate_perturbations(s, fx.corpus, fx.lm, cfg, rng);
  REQUIRE(!edits.empty());
  for (const Edit& e : edits) {
    CHECK(e.sentence.tokens.size() > s.tokens.size());
    CHECK(e.sentence.tokens.size() <= s.tokens.size() + 5);
    CHECK(is_subsequence(s.tokens, e.sentence.tokens));
    REQUIRE(e.sentence.tree.has_value());
    CHECK(linearize(*e.sentence.tree) == e.sentence.tokens);
  }
}

TEST_CASE("treeless sentences only get word swaps") {
  Fixture fx;
  SearchConfig cfg;  // all kinds enabled
  Sentence s = make_sentence("the dog runs");
  Rng rng(6);
  for (const Edit& e : enumerate_perturbations(s, fx.corpus, fx.lm, cfg, rng)) {
    CHECK(e.perturbation.kind == PerturbationKind::word_swap);
  }
}

TEST_CASE("enumeration is deterministic given the rng seed") {
  Fixture fx;
  SearchConfig cfg;
  const Sentence& s = fx.corpus.instances[3].premise;
  Rng rng_a(77), rng_b(77);
  const auto a = enumerate_perturbations(s, fx.corpus, fx.lm, cfg, rng_a);
  const auto b = enumerate_perturbations(s, fx.corpus, fx.lm, cfg, rng_b);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].sentence.tokens == b[i].sentence.tokens);
    CHECK(a[i].perturbation.site == b[i].perturbation.site);
    CHECK(a[i].perturbation.payload == b[i].perturbation.payload);
  }
}

TEST_CASE("generated sets pass the gate and match the exhaustive re-rank oracle") {
  Fixture fx;
  ParamScorer scorer(fx.params);
  SearchConfig cfg;
  cfg.seeds_per_round = 6;
  cfg.pool_size = 400;
  cfg.tau = 12.0;

  Rng rng(31);
  const SearchResult result = generate_adversarials(scorer, fx.lm, fx.rules, fx.corpus, cfg, rng);
  REQUIRE(!result.sets.empty());
  REQUIRE(!result.pool.empty());

  // Every returned set passes the LM gate and carries its true loss.
  for (const AdversarialSet& set : result.sets) {
    CHECK(admissible(fx.lm, set.substitution, cfg.tau));
    const Rule* rule = fx.rules.find(set.rule_name);
    REQUIRE(rule != nullptr);
    CHECK(set.loss == doctest::Approx(inconsistency_loss(scorer, *rule, set.substitution))
                          .epsilon(1e-12));
  }

  // Exhaustive re-rank of the logged pool.
  double best = -1.0;
  for (const PoolEntry& entry : result.pool) {
    if (!admissible(fx.lm, entry.substitution, cfg.tau)) continue;
    const Rule* rule = fx.rules.find(entry.rule_name);
    best = std::max(best, inconsistency_loss(scorer, *rule, entry.substitution));
  }
  CHECK(result.sets.front().loss == doctest::Approx(best).epsilon(1e-12));

  // Losses are sorted non-increasing.
  for (std::size_t i = 1; i < result.sets.size(); ++i) {
    CHECK(result.sets[i].loss <= result.sets[i - 1].loss + 1e-15);
  }
}

TEST_CASE("every candidate differs from its prototype by exactly one edit") {
  Fixture fx;
  ParamScorer scorer(fx.params);
  SearchConfig cfg;
  cfg.seeds_per_round = 4;
  cfg.pool_size = 200;

  Rng rng(8);
  const SearchResult result = generate_adversarials(scorer, fx.lm, fx.rules, fx.corpus, cfg, rng);
  for (const PoolEntry& entry : result.pool) {
    const Instance& seed = fx.corpus.instances[entry.seed_index];
    const Sentence& edited = entry.substitution.at(entry.perturbed_var);

    // All other bound sentences equal a seed side verbatim.
    for (const auto& [var, sentence] : entry.substitution) {
      if (var == entry.perturbed_var) continue;
      CHECK((sentence.tokens == seed.premise.tokens ||
             sentence.tokens == seed.hypothesis.tokens));
    }

    switch (entry.perturbation.kind) {
      case PerturbationKind::word_swap: {
        // Same length as one seed side, exactly one differing token.
        auto one_diff = [&](const Sentence& proto) {
          if (proto.tokens.size() != edited.tokens.size()) return false;
          std::size_t diffs = 0;
          for (std::size_t i = 0; i < proto.tokens.size(); ++i) {
            if (proto.tokens[i] != edited.tokens[i]) ++diffs;
          }
          return diffs == 1;
        };
        CHECK((one_diff(seed.premise) || one_diff(seed.hypothesis)));
        break;
      }
      case PerturbationKind::subtree_delete:
        CHECK((is_subsequence(edited.tokens, seed.premise.tokens) ||
               is_subsequence(edited.tokens, seed.hypothesis.tokens)));
        break;
      case PerturbationKind::subtree_insert:
        CHECK((is_subsequence(seed.premise.tokens, edited.tokens) ||
               is_subsequence(seed.hypothesis.tokens, edited.tokens)));
        break;
    }
  }
}

TEST_CASE("a tight gate yields an empty result") {
  Fixture fx;
  ParamScorer scorer(fx.params);
  SearchConfig cfg;
  cfg.seeds_per_round = 3;
  cfg.tau = 1e-6;
  Rng rng(9);
  const SearchResult result = generate_adversarials(scorer, fx.lm, fx.rules, fx.corpus, cfg, rng);
  CHECK(result.sets.empty());
  CHECK(!result.pool.empty());  // candidates were generated, all gated out
}

TEST_CASE("a rule-consistent scorer yields only zero losses") {
  Fixture fx;
  ConsistentStubScorer stub;
  SearchConfig cfg;
  cfg.seeds_per_round = 5;
  Rng rng(12);
  const SearchResult result = generate_adversarials(stub, fx.lm, fx.rules, fx.corpus, cfg, rng);
  REQUIRE(!result.sets.empty());
  for (const AdversarialSet& set : result.sets) CHECK(set.loss == 0.0);
}

TEST_CASE("generation is deterministic end to end") {
  Fixture fx;
  ParamScorer scorer(fx.params);
  SearchConfig cfg;
  cfg.seeds_per_round = 5;
  cfg.pool_size = 300;

  Rng rng_a(42), rng_b(42);
  const SearchResult a = generate_adversarials(scorer, fx.lm, fx.rules, fx.corpus, cfg, rng_a);
  const SearchResult b = generate_adversarials(scorer, fx.lm, fx.rules, fx.corpus, cfg, rng_b);
  REQUIRE(a.sets.size() == b.sets.size());
  for (std::size_t i = 0; i < a.sets.size(); ++i) {
    CHECK(a.sets[i].rule_name == b.sets[i].rule_name);
    CHECK(a.sets[i].loss == b.sets[i].loss);
    CHECK(a.sets[i].seed_index == b.sets[i].seed_index);
    auto ita = a.sets[i].substitution.begin();
    auto itb = b.sets[i].substitution.begin();
    for (; ita != a.sets[i].substitution.end(); ++ita, ++itb) {
      CHECK(ita->first == itb->first);
      CHECK(ita->second.tokens == itb->second.tokens);
    }
  }
}

TEST_CASE("pool size caps generation") {
  Fixture fx;
  ParamScorer scorer(fx.params);
  SearchConfig cfg;
  cfg.seeds_per_round = 10;
  cfg.pool_size = 17;
  Rng rng(50);
  const SearchResult result = generate_adversarials(scorer, fx.lm, fx.rules, fx.corpus, cfg, rng);
  CHECK(result.pool.size() == 17);
  CHECK(result.sets.size() <= 17);
}
