#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "nli/corpus.hpp"
#include "nli/scorer.hpp"

namespace nli {

// Raised when a rule is evaluated against a substitution that does not bind
// all of its variables.
struct grounding_error : std::logic_error {
  using std::logic_error::logic_error;
};

enum class Predicate { ent, con, neu };

int class_index(Predicate p);
std::string_view to_string(Predicate p);

struct Atom {
  Predicate pred = Predicate::ent;
  std::string arg1;
  std::string arg2;
};

struct Literal {
  Atom atom;
  bool negated = false;
};

// body => head. An empty body encodes the tautology.
struct Rule {
  std::string name;
  std::vector<Atom> body;
  Literal head;

  // Variables in order of first appearance (body atoms, then head).
  std::vector<std::string> variables() const;
};

struct RuleSet {
  std::vector<Rule> rules;

  const Rule* find(std::string_view name) const;
};

// Variable name -> sentence binding. Ordered so that serialization and
// iteration are deterministic.
using Substitution = std::map<std::string, Sentence>;

// Parses the rule DSL, one rule per line, '#' comments:
//   rule := name ":" body "=>" head
//   body := "true" | atom ("&" atom)*
//   head := ["~"] atom
//   atom := ("ent"|"con"|"neu") "(" var "," var ")"
// Throws parse_error (message carries line and column) on bad syntax, unknown
// predicates, head variables absent from a non-tautology body, more than
// three distinct variables, or duplicate rule names.
RuleSet parse_rules(std::string_view text);
RuleSet load_rules(const std::string& path);

// Canonical DSL form; parse_rules(to_dsl(rs)) reproduces rs.
std::string to_dsl(const Rule& rule);
std::string to_dsl(const RuleSet& rules);

// p(class(atom.pred) | s(arg1), s(arg2)) from the scorer.
double atom_probability(const Scorer& scorer, const Atom& atom, const Substitution& s);

// Goedel t-norm: the minimum over body atom probabilities; 1.0 for an empty
// (tautology) body.
double body_probability(const Scorer& scorer, const Rule& rule, const Substitution& s);

// Head atom probability, complemented (1 - p) when the head is negated.
double head_probability(const Scorer& scorer, const Rule& rule, const Substitution& s);

// [p(body) - p(head)]_+ , the degree to which the grounded rule is violated.
double inconsistency_loss(const Scorer& scorer, const Rule& rule, const Substitution& s);

// True iff the atom's class is the argmax of the scorer's distribution for
// the grounded pair (ties resolved toward the lowest class index).
bool atom_holds(const Scorer& scorer, const Atom& atom, const Substitution& s);

}  // namespace nli
