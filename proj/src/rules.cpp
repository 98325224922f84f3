#include "nli/rules.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

namespace nli {

int class_index(Predicate p) {
  switch (p) {
    case Predicate::ent: return kEntailment;
    case Predicate::con: return kContradiction;
    case Predicate::neu: return kNeutral;
  }
  return kEntailment;
}

std::string_view to_string(Predicate p) {
  switch (p) {
    case Predicate::ent: return "ent";
    case Predicate::con: return "con";
    case Predicate::neu: return "neu";
  }
  return "ent";
}

std::vector<std::string> Rule::variables() const {
  std::vector<std::string> vars;
  auto note = [&vars](const std::string& v) {
    if (std::find(vars.begin(), vars.end(), v) == vars.end()) vars.push_back(v);
  };
  for (const Atom& atom : body) {
    note(atom.arg1);
    note(atom.arg2);
  }
  note(head.atom.arg1);
  note(head.atom.arg2);
  return vars;
}

const Rule* RuleSet::find(std::string_view name) const {
  for (const Rule& r : rules) {
    if (r.name == name) return &r;
  }
  return nullptr;
}

namespace {

// Single-line tokenizer/parser for the rule DSL.
struct RuleLineParser {
  std::string_view line;
  std::size_t line_no;
  std::size_t pos = 0;

  [[noreturn]] void fail(const std::string& what) const {
    std::ostringstream msg;
    msg << "rule syntax error at line " << line_no << ", column " << (pos + 1) << ": " << what;
    throw parse_error(msg.str(), pos);
  }

  void skip_space() {
    while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t')) ++pos;
  }

  bool at_end() {
    skip_space();
    return pos >= line.size();
  }

  void expect(std::string_view token) {
    skip_space();
    if (line.substr(pos, token.size()) != token) {
      fail("expected '" + std::string(token) + "'");
    }
    pos += token.size();
  }

  bool try_consume(std::string_view token) {
    skip_space();
    if (line.substr(pos, token.size()) == token) {
      pos += token.size();
      return true;
    }
    return false;
  }

  std::string identifier() {
    skip_space();
    std::size_t start = pos;
    while (pos < line.size() &&
           (std::isalnum(static_cast<unsigned char>(line[pos])) || line[pos] == '_')) {
      ++pos;
    }
    if (pos == start) fail("expected identifier");
    if (!std::isalpha(static_cast<unsigned char>(line[start])) && line[start] != '_') {
      fail("identifier must start with a letter");
    }
    return std::string(line.substr(start, pos - start));
  }

  Atom atom() {
    std::string pred = identifier();
    Atom a;
    if (pred == "ent") {
      a.pred = Predicate::ent;
    } else if (pred == "con") {
      a.pred = Predicate::con;
    } else if (pred == "neu") {
      a.pred = Predicate::neu;
    } else {
      pos -= pred.size();
      fail("unknown predicate '" + pred + "'");
    }
    expect("(");
    a.arg1 = identifier();
    expect(",");
    a.arg2 = identifier();
    expect(")");
    return a;
  }

  Rule rule() {
    Rule r;
    r.name = identifier();
    expect(":");
    if (try_consume("true")) {
      // tautology body
    } else {
      r.body.push_back(atom());
      while (try_consume("&")) r.body.push_back(atom());
    }
    expect("=>");
    r.head.negated = try_consume("~");
    r.head.atom = atom();
    if (!at_end()) fail("trailing input after rule");
    return r;
  }
};

void validate(const Rule& rule, std::size_t line_no) {
  auto fail = [&](const std::string& what) {
    throw parse_error("rule '" + rule.name + "' at line " + std::to_string(line_no) + ": " + what,
                      0);
  };
  if (!rule.body.empty()) {
    std::set<std::string> body_vars;
    for (const Atom& a : rule.body) {
      body_vars.insert(a.arg1);
      body_vars.insert(a.arg2);
    }
    if (!body_vars.count(rule.head.atom.arg1) || !body_vars.count(rule.head.atom.arg2)) {
      fail("head variable not bound by the body");
    }
  }
  if (rule.variables().size() > 3) fail("more than three distinct variables");
}

const Sentence& bound(const Substitution& s, const std::string& var) {
  auto it = s.find(var);
  if (it == s.end()) throw grounding_error("unbound rule variable '" + var + "'");
  return it->second;
}

}  // namespace

RuleSet parse_rules(std::string_view text) {
  RuleSet rs;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    ++line_no;
    start = end + 1;

    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    bool blank = line.find_first_not_of(" \t\r") == std::string_view::npos;
    if (blank) {
      if (end == text.size()) break;
      continue;
    }
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

    RuleLineParser parser{line, line_no};
    Rule rule = parser.rule();
    validate(rule, line_no);
    if (rs.find(rule.name) != nullptr) {
      throw parse_error("duplicate rule name '" + rule.name + "' at line " +
                            std::to_string(line_no),
                        0);
    }
    rs.rules.push_back(std::move(rule));
    if (end == text.size()) break;
  }
  return rs;
}

RuleSet load_rules(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open rules file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_rules(buf.str());
}

namespace {

std::string atom_dsl(const Atom& a) {
  std::string out(to_string(a.pred));
  out += '(' + a.arg1 + ',' + a.arg2 + ')';
  return out;
}

}  // namespace

std::string to_dsl(const Rule& rule) {
  std::string out = rule.name + ": ";
  if (rule.body.empty()) {
    out += "true";
  } else {
    for (std::size_t i = 0; i < rule.body.size(); ++i) {
      if (i > 0) out += " & ";
      out += atom_dsl(rule.body[i]);
    }
  }
  out += " => ";
  if (rule.head.negated) out += '~';
  out += atom_dsl(rule.head.atom);
  return out;
}

std::string to_dsl(const RuleSet& rules) {
  std::string out;
  for (const Rule& r : rules.rules) {
    out += to_dsl(r);
    out += '\n';
  }
  return out;
}

double atom_probability(const Scorer& scorer, const Atom& atom, const Substitution& s) {
  const Sentence& a = bound(s, atom.arg1);
  const Sentence& b = bound(s, atom.arg2);
  return scorer.predict(a, b)[class_index(atom.pred)];
}

double body_probability(const Scorer& scorer, const Rule& rule, const Substitution& s) {
  if (rule.body.empty()) return 1.0;
  double min_p = 1.0;
  for (const Atom& atom : rule.body) {
    min_p = std::min(min_p, atom_probability(scorer, atom, s));
  }
  return min_p;
}

double head_probability(const Scorer& scorer, const Rule& rule, const Substitution& s) {
  double p = atom_probability(scorer, rule.head.atom, s);
  return rule.head.negated ? 1.0 - p : p;
}

double inconsistency_loss(const Scorer& scorer, const Rule& rule, const Substitution& s) {
  double margin = body_probability(scorer, rule, s) - head_probability(scorer, rule, s);
  return margin > 0.0 ? margin : 0.0;
}

bool atom_holds(const Scorer& scorer, const Atom& atom, const Substitution& s) {
  const Sentence& a = bound(s, atom.arg1);
  const Sentence& b = bound(s, atom.arg2);
  return scorer.predict(a, b).argmax() == class_index(atom.pred);
}

}  // namespace nli
