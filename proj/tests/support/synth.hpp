#pragma once

#include <array>
#include <string>
#include <vector>

#include "nli/corpus.hpp"
#include "nli/rng.hpp"

// Deterministic generator of a small templated NLI corpus in SNLI shape,
// with constituency parses. Entailment pairs generalise the premise
// (hypernym subject, hypernym verb, dropped modifier); contradiction pairs
// negate the premise's verb on the hypothesis side; neutral pairs are
// unrelated or run specific-under-general. The asymmetric placement of the
// negation is what gives an unregularised model room to violate symmetry.
namespace nli::testing {

struct VerbClass {
  // (third person singular, base form) pairs plus the class hypernym.
  std::vector<std::pair<std::string, std::string>> members;
  std::pair<std::string, std::string> hypernym;
};

struct SynthGrammar {
  std::vector<std::pair<std::string, std::string>> nouns;  // (specific, hypernym)
  std::vector<VerbClass> verbs;
  std::vector<std::array<std::string, 3>> places;          // prep det noun

  static const SynthGrammar& instance() {
    static const SynthGrammar g = [] {
      SynthGrammar g;
      g.nouns = {{"dog", "animal"},  {"cat", "animal"},  {"bird", "animal"},
                 {"horse", "animal"}, {"puppy", "animal"}, {"fox", "animal"},
                 {"man", "person"},  {"woman", "person"}, {"boy", "person"},
                 {"girl", "person"}, {"lady", "person"},  {"farmer", "person"}};
      g.verbs = {
          VerbClass{{{"runs", "run"},
                     {"walks", "walk"},
                     {"jumps", "jump"},
                     {"swims", "swim"},
                     {"dances", "dance"}},
                    {"moves", "move"}},
          VerbClass{{{"sleeps", "sleep"}, {"naps", "nap"}, {"dozes", "doze"}, {"sits", "sit"}},
                    {"rests", "rest"}},
          VerbClass{{{"munches", "munch"}, {"chews", "chew"}, {"snacks", "snack"}},
                    {"eats", "eat"}},
      };
      g.places = {{"in", "the", "park"},   {"on", "the", "street"}, {"near", "the", "house"},
                  {"by", "the", "river"},  {"at", "the", "beach"},  {"in", "the", "garden"},
                  {"under", "the", "tree"}, {"on", "the", "grass"}};
      return g;
    }();
    return g;
  }
};

struct SynthSentenceSpec {
  std::size_t noun = 0;
  std::size_t verb_class = 0;
  std::size_t verb = 0;        // member index, or npos-like flag via use_hypernym_verb
  bool hypernym_noun = false;
  bool hypernym_verb = false;
  bool negated = false;
  int place = -1;              // -1: none
};

inline Sentence render_sentence(const SynthSentenceSpec& spec) {
  const SynthGrammar& g = SynthGrammar::instance();
  const std::string noun =
      spec.hypernym_noun ? g.nouns[spec.noun].second : g.nouns[spec.noun].first;
  const VerbClass& vc = g.verbs[spec.verb_class];
  const auto& verb_pair = spec.hypernym_verb ? vc.hypernym : vc.members[spec.verb];
  const std::string verb = spec.negated ? verb_pair.second : verb_pair.first;

  std::vector<ParseTree> vp_children;
  if (spec.negated) {
    vp_children.push_back(ParseTree::node("VBZ", {ParseTree::leaf("does")}));
    vp_children.push_back(ParseTree::node("RB", {ParseTree::leaf("not")}));
    vp_children.push_back(ParseTree::node("VB", {ParseTree::leaf(verb)}));
  } else {
    vp_children.push_back(ParseTree::node("VBZ", {ParseTree::leaf(verb)}));
  }
  if (spec.place >= 0) {
    const auto& pl = g.places[static_cast<std::size_t>(spec.place)];
    vp_children.push_back(ParseTree::node(
        "PP", {ParseTree::node("IN", {ParseTree::leaf(pl[0])}),
               ParseTree::node("NP", {ParseTree::node("DT", {ParseTree::leaf(pl[1])}),
                                      ParseTree::node("NN", {ParseTree::leaf(pl[2])})})}));
  }

  ParseTree root = ParseTree::node(
      "ROOT",
      {ParseTree::node(
          "S", {ParseTree::node("NP", {ParseTree::node("DT", {ParseTree::leaf("the")}),
                                       ParseTree::node("NN", {ParseTree::leaf(noun)})}),
                ParseTree::node("VP", std::move(vp_children)),
                ParseTree::node(".", {ParseTree::leaf(".")})})});

  Sentence s;
  s.tokens = linearize(root);
  s.tree = std::move(root);
  return s;
}

inline SynthSentenceSpec random_spec(Rng& rng) {
  const SynthGrammar& g = SynthGrammar::instance();
  SynthSentenceSpec spec;
  spec.noun = rng.index(g.nouns.size());
  spec.verb_class = rng.index(g.verbs.size());
  spec.verb = rng.index(g.verbs[spec.verb_class].members.size());
  spec.place = rng.index(3) == 0 ? -1 : static_cast<int>(rng.index(g.places.size()));
  return spec;
}

inline Instance make_synth_instance(Rng& rng) {
  const SynthGrammar& g = SynthGrammar::instance();
  Instance inst;
  SynthSentenceSpec premise = random_spec(rng);

  switch (rng.index(3)) {
    case 0: {  // entailment: generalise subject and/or verb, drop the place
      SynthSentenceSpec hyp = premise;
      const std::size_t variant = rng.index(3);
      hyp.hypernym_noun = variant != 2;
      hyp.hypernym_verb = variant != 0;
      hyp.place = rng.index(4) == 0 ? hyp.place : -1;
      inst.label = Label::entailment;
      inst.premise = render_sentence(premise);
      inst.hypothesis = render_sentence(hyp);
      break;
    }
    case 1: {  // contradiction: negated verb on the hypothesis side
      SynthSentenceSpec hyp = premise;
      hyp.negated = true;
      hyp.hypernym_verb = rng.index(5) == 0;
      hyp.place = -1;
      inst.label = Label::contradiction;
      inst.premise = render_sentence(premise);
      inst.hypothesis = render_sentence(hyp);
      break;
    }
    default: {  // neutral: unrelated pair, or specific under general
      if (rng.index(2) == 0) {
        SynthSentenceSpec hyp = random_spec(rng);
        hyp.noun = (premise.noun + 1 + rng.index(g.nouns.size() - 1)) % g.nouns.size();
        hyp.verb_class = (premise.verb_class + 1 + rng.index(g.verbs.size() - 1)) %
                         g.verbs.size();
        hyp.verb = rng.index(g.verbs[hyp.verb_class].members.size());
        inst.premise = render_sentence(premise);
        inst.hypothesis = render_sentence(hyp);
      } else {
        SynthSentenceSpec general = premise;
        general.hypernym_noun = true;
        general.hypernym_verb = true;
        general.place = -1;
        inst.premise = render_sentence(general);
        inst.hypothesis = render_sentence(premise);
      }
      inst.label = Label::neutral;
      break;
    }
  }
  return inst;
}

inline Corpus make_synth_corpus(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  Corpus corpus;
  corpus.source = "synthetic";
  corpus.instances.reserve(n);
  for (std::size_t i = 0; i < n; ++i) corpus.instances.push_back(make_synth_instance(rng));
  return corpus;
}

}  // namespace nli::testing
