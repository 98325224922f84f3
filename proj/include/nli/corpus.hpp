#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace nli {

struct io_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed input data (bad JSONL line, bad file header, ...).
struct format_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Unparseable bracketed tree or rule DSL text.
struct parse_error : std::runtime_error {
  parse_error(const std::string& msg, std::size_t offset)
      : std::runtime_error(msg), offset(offset) {}
  std::size_t offset;
};

using Token = std::string;

// Constituency tree. A leaf carries exactly one token; an inner node carries
// a label and at least one child.
struct ParseTree {
  std::string label;            // empty for leaves
  Token token;                  // empty for inner nodes
  std::vector<ParseTree> children;

  bool is_leaf() const { return children.empty(); }

  static ParseTree leaf(Token t) {
    ParseTree n;
    n.token = std::move(t);
    return n;
  }
  static ParseTree node(std::string label, std::vector<ParseTree> children) {
    ParseTree n;
    n.label = std::move(label);
    n.children = std::move(children);
    return n;
  }
};

// Parses a PTB-style bracketing "(LABEL child child ...)" with bare-token
// leaves. Throws parse_error with the character offset on malformed input.
ParseTree parse_tree(std::string_view text);

// Left-to-right leaf tokens.
void linearize(const ParseTree& tree, std::vector<Token>& out);
std::vector<Token> linearize(const ParseTree& tree);

// Canonical bracketed form; parse_tree(to_bracketed(t)) reproduces t.
std::string to_bracketed(const ParseTree& tree);

enum class Label { entailment, contradiction, neutral, unlabeled };

std::string_view to_string(Label label);
// Accepts the four SNLI gold_label spellings ("-" means unlabeled).
std::optional<Label> label_from_string(std::string_view s);

struct Sentence {
  std::vector<Token> tokens;           // length >= 1
  std::optional<ParseTree> tree;       // leaves linearize to tokens

  std::string text() const;            // tokens joined with single spaces
};

bool operator==(const Sentence& a, const Sentence& b);

struct Instance {
  Sentence premise;
  Sentence hypothesis;
  Label label = Label::unlabeled;
};

struct Corpus {
  std::vector<Instance> instances;
  std::string source;

  std::size_t size() const { return instances.size(); }
  bool empty() const { return instances.empty(); }
};

struct LoadOptions {
  bool keep_unlabeled = false;
  std::size_t max_tokens = 64;   // instances with a longer sentence are dropped
  bool lowercase = true;         // normalization flag, threaded into Vocab/LM
};

struct LoadStats {
  std::size_t kept = 0;
  std::size_t dropped_unlabeled = 0;
  std::size_t dropped_long = 0;
  std::size_t bad_parses = 0;    // parse fields that degraded to tree=absent
};

// Reads SNLI-format JSONL: one object per line with gold_label, sentence1,
// sentence2 and optional sentence1_parse / sentence2_parse. Lines whose
// gold_label is "-" are dropped unless opts.keep_unlabeled. A malformed parse
// field degrades to tree=absent and is counted in stats. Throws io_error if
// the file cannot be read and format_error (naming the line number) on
// invalid JSON or unknown gold_label.
Corpus load_snli(const std::string& path, const LoadOptions& opts = {},
                 LoadStats* stats = nullptr);

// Inverse of load_snli up to instance identity (order, tokens, labels).
void save_snli(const Corpus& corpus, const std::string& path);

std::string lowercased(std::string_view s);

// Token-id table. Indices are dense and deterministic: the four reserved
// tokens first, then tokens with count >= min_count by descending count,
// ties broken lexicographically.
class Vocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kBos = 2;
  static constexpr int kEos = 3;
  static constexpr const char* kPadText = "<pad>";
  static constexpr const char* kUnkText = "<unk>";
  static constexpr const char* kBosText = "<s>";
  static constexpr const char* kEosText = "</s>";

  Vocab();

  // Appends a token with its count; id is the current size.
  void add(Token token, std::uint64_t count);

  std::size_t size() const { return tokens_.size(); }
  const Token& token_of(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  std::uint64_t count_of(int id) const { return counts_.at(static_cast<std::size_t>(id)); }

  // Exact lookup; -1 when absent.
  int id_of(const Token& token) const;

  // Model-side lookup: applies the normalization and maps misses to UNK.
  int lookup(const Token& token) const;

  bool lowercase = true;

 private:
  std::vector<Token> tokens_;
  std::vector<std::uint64_t> counts_;
  std::unordered_map<Token, int> index_;
};

Vocab build_vocab(const Corpus& corpus, std::size_t min_count = 1, bool lowercase = true);

}  // namespace nli
