#include "nli/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "json.hpp"

namespace nli {

namespace {

using nlohmann::json;

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }

// Recursive-descent reader over a bracketed tree string.
struct TreeReader {
  std::string_view text;
  std::size_t pos = 0;

  void skip_space() {
    while (pos < text.size() && is_space(text[pos])) ++pos;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw parse_error(what + " at offset " + std::to_string(pos), pos);
  }

  std::string read_word() {
    std::size_t start = pos;
    while (pos < text.size() && !is_space(text[pos]) && text[pos] != '(' && text[pos] != ')') {
      ++pos;
    }
    if (pos == start) fail("expected token");
    return std::string(text.substr(start, pos - start));
  }

  ParseTree read_node() {
    skip_space();
    if (pos >= text.size()) fail("unexpected end of input");
    if (text[pos] != '(') {
      return ParseTree::leaf(read_word());
    }
    ++pos;  // '('
    skip_space();
    if (pos >= text.size() || text[pos] == ')') fail("empty node");
    // Node label may be absent in some banks; treat a missing label as "".
    std::string label;
    if (text[pos] != '(') label = read_word();
    std::vector<ParseTree> children;
    while (true) {
      skip_space();
      if (pos >= text.size()) fail("unbalanced parentheses");
      if (text[pos] == ')') {
        if (children.empty()) fail("node without children");
        ++pos;
        break;
      }
      children.push_back(read_node());
    }
    return ParseTree::node(std::move(label), std::move(children));
  }
};

std::vector<Token> whitespace_split(std::string_view s) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && is_space(s[i])) ++i;
    std::size_t start = i;
    while (i < s.size() && !is_space(s[i])) ++i;
    if (i > start) out.emplace_back(s.substr(start, i - start));
  }
  return out;
}

// Builds a Sentence from the raw text and optional parse field. Tokens come
// from the parse leaves when a parse is usable, else from whitespace
// splitting. Returns false when the sentence has no tokens.
bool make_sentence(const std::string& text, const json* parse_field, Sentence& out,
                   LoadStats* stats) {
  out.tree.reset();
  if (parse_field != nullptr && parse_field->is_string()) {
    const std::string parse_text = parse_field->get<std::string>();
    if (!parse_text.empty()) {
      try {
        ParseTree tree = parse_tree(parse_text);
        out.tokens = linearize(tree);
        out.tree = std::move(tree);
        return !out.tokens.empty();
      } catch (const parse_error&) {
        if (stats != nullptr) ++stats->bad_parses;
      }
    }
  }
  out.tokens = whitespace_split(text);
  return !out.tokens.empty();
}

}  // namespace

ParseTree parse_tree(std::string_view text) {
  TreeReader reader{text};
  reader.skip_space();
  if (reader.pos >= text.size() || text[reader.pos] != '(') reader.fail("expected '('");
  ParseTree root = reader.read_node();
  reader.skip_space();
  if (reader.pos != text.size()) reader.fail("trailing input");
  return root;
}

void linearize(const ParseTree& tree, std::vector<Token>& out) {
  if (tree.is_leaf()) {
    out.push_back(tree.token);
    return;
  }
  for (const ParseTree& child : tree.children) linearize(child, out);
}

std::vector<Token> linearize(const ParseTree& tree) {
  std::vector<Token> out;
  linearize(tree, out);
  return out;
}

std::string to_bracketed(const ParseTree& tree) {
  if (tree.is_leaf()) return tree.token;
  std::string out = "(" + tree.label;
  for (const ParseTree& child : tree.children) {
    out += ' ';
    out += to_bracketed(child);
  }
  out += ')';
  return out;
}

std::string_view to_string(Label label) {
  switch (label) {
    case Label::entailment: return "entailment";
    case Label::contradiction: return "contradiction";
    case Label::neutral: return "neutral";
    case Label::unlabeled: return "-";
  }
  return "-";
}

std::optional<Label> label_from_string(std::string_view s) {
  if (s == "entailment") return Label::entailment;
  if (s == "contradiction") return Label::contradiction;
  if (s == "neutral") return Label::neutral;
  if (s == "-") return Label::unlabeled;
  return std::nullopt;
}

std::string Sentence::text() const {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0) out += ' ';
    out += tokens[i];
  }
  return out;
}

bool operator==(const Sentence& a, const Sentence& b) { return a.tokens == b.tokens; }

Corpus load_snli(const std::string& path, const LoadOptions& opts, LoadStats* stats) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open corpus file: " + path);

  Corpus corpus;
  corpus.source = path;
  LoadStats local;
  LoadStats* st = stats != nullptr ? stats : &local;
  *st = LoadStats{};

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::exception& e) {
      throw format_error(path + ":" + std::to_string(line_no) + ": invalid JSON: " + e.what());
    }
    if (!obj.is_object() || !obj.contains("gold_label") || !obj.contains("sentence1") ||
        !obj.contains("sentence2")) {
      throw format_error(path + ":" + std::to_string(line_no) +
                         ": missing gold_label/sentence1/sentence2");
    }
    const std::string gold = obj["gold_label"].get<std::string>();
    std::optional<Label> label = label_from_string(gold);
    if (!label) {
      throw format_error(path + ":" + std::to_string(line_no) + ": unknown gold_label '" +
                         gold + "'");
    }
    if (*label == Label::unlabeled && !opts.keep_unlabeled) {
      ++st->dropped_unlabeled;
      continue;
    }

    Instance inst;
    inst.label = *label;
    const json* p1 = obj.contains("sentence1_parse") ? &obj["sentence1_parse"] : nullptr;
    const json* p2 = obj.contains("sentence2_parse") ? &obj["sentence2_parse"] : nullptr;
    if (!make_sentence(obj["sentence1"].get<std::string>(), p1, inst.premise, st) ||
        !make_sentence(obj["sentence2"].get<std::string>(), p2, inst.hypothesis, st)) {
      throw format_error(path + ":" + std::to_string(line_no) + ": empty sentence");
    }
    if (inst.premise.tokens.size() > opts.max_tokens ||
        inst.hypothesis.tokens.size() > opts.max_tokens) {
      ++st->dropped_long;
      continue;
    }
    corpus.instances.push_back(std::move(inst));
    ++st->kept;
  }

  if (st->dropped_long > 0) {
    std::cerr << "warning: " << path << ": dropped " << st->dropped_long
              << " instance(s) longer than " << opts.max_tokens << " tokens\n";
  }
  if (st->bad_parses > 0) {
    std::cerr << "warning: " << path << ": " << st->bad_parses
              << " malformed parse field(s) ignored\n";
  }
  return corpus;
}

void save_snli(const Corpus& corpus, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot write corpus file: " + path);
  for (const Instance& inst : corpus.instances) {
    json obj;
    obj["gold_label"] = std::string(to_string(inst.label));
    obj["sentence1"] = inst.premise.text();
    obj["sentence2"] = inst.hypothesis.text();
    if (inst.premise.tree) obj["sentence1_parse"] = to_bracketed(*inst.premise.tree);
    if (inst.hypothesis.tree) obj["sentence2_parse"] = to_bracketed(*inst.hypothesis.tree);
    out << obj.dump() << '\n';
  }
  if (!out) throw io_error("write failed: " + path);
}

std::string lowercased(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

Vocab::Vocab() {
  add(kPadText, 0);
  add(kUnkText, 0);
  add(kBosText, 0);
  add(kEosText, 0);
}

void Vocab::add(Token token, std::uint64_t count) {
  index_.emplace(token, static_cast<int>(tokens_.size()));
  tokens_.push_back(std::move(token));
  counts_.push_back(count);
}

int Vocab::id_of(const Token& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? -1 : it->second;
}

int Vocab::lookup(const Token& token) const {
  int id = lowercase ? id_of(lowercased(token)) : id_of(token);
  return id < 0 ? kUnk : id;
}

Vocab build_vocab(const Corpus& corpus, std::size_t min_count, bool lowercase) {
  std::map<Token, std::uint64_t> counts;
  auto tally = [&](const Sentence& s) {
    for (const Token& t : s.tokens) {
      counts[lowercase ? lowercased(t) : t] += 1;
    }
  };
  for (const Instance& inst : corpus.instances) {
    tally(inst.premise);
    tally(inst.hypothesis);
  }

  // Descending count, ties lexicographic.
  std::vector<std::pair<Token, std::uint64_t>> ordered(counts.begin(), counts.end());
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });

  Vocab vocab;
  vocab.lowercase = lowercase;
  for (auto& [token, count] : ordered) {
    if (count >= min_count) vocab.add(token, count);
  }
  return vocab;
}

}  // namespace nli
