#include "nli/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "nli/rng.hpp"

namespace nli {

namespace {

int sign_or_zero(double x) { return x > 0.0 ? 1 : (x < 0.0 ? -1 : 0); }

void check_finite(double x, const char* what) {
  if (!std::isfinite(x)) throw numeric_error(std::string("non-finite ") + what);
}

// Cached activations of one pair, enough to run the backward pass.
struct Forward {
  std::vector<int> prem_ids;
  std::vector<int> hyp_ids;
  std::vector<double> u, v;     // k each
  std::vector<double> f;        // 4k
  std::vector<double> pre;      // hidden, before relu
  std::vector<double> h;        // hidden
  std::array<double, 3> z{};
  Prediction p;
};

std::vector<int> token_ids(const ScorerParams& params, const Sentence& s) {
  if (s.tokens.empty()) throw std::logic_error("encode: empty sentence");
  std::vector<int> ids;
  ids.reserve(s.tokens.size());
  for (const Token& t : s.tokens) ids.push_back(params.vocab.lookup(t));
  return ids;
}

std::vector<double> mean_rows(const ScorerParams& params, const std::vector<int>& ids) {
  const std::size_t k = params.embedding_dim();
  std::vector<double> out(k, 0.0);
  for (int id : ids) {
    const double* row = params.embeddings.row(static_cast<std::size_t>(id));
    for (std::size_t d = 0; d < k; ++d) out[d] += row[d];
  }
  const double inv = 1.0 / static_cast<double>(ids.size());
  for (double& x : out) x *= inv;
  return out;
}

Forward run_forward(const ScorerParams& params, const Sentence& premise,
                    const Sentence& hypothesis) {
  const std::size_t k = params.embedding_dim();
  const std::size_t hidden = params.hidden_dim();

  Forward fwd;
  fwd.prem_ids = token_ids(params, premise);
  fwd.hyp_ids = token_ids(params, hypothesis);
  fwd.u = mean_rows(params, fwd.prem_ids);
  fwd.v = mean_rows(params, fwd.hyp_ids);

  fwd.f.resize(4 * k);
  for (std::size_t d = 0; d < k; ++d) {
    fwd.f[d] = fwd.u[d];
    fwd.f[k + d] = fwd.v[d];
    fwd.f[2 * k + d] = fwd.u[d] * fwd.v[d];
    fwd.f[3 * k + d] = std::abs(fwd.u[d] - fwd.v[d]);
  }

  fwd.pre.assign(params.b1.begin(), params.b1.end());
  for (std::size_t i = 0; i < 4 * k; ++i) {
    const double fi = fwd.f[i];
    if (fi == 0.0) continue;
    const double* w = params.w1.row(i);
    for (std::size_t j = 0; j < hidden; ++j) fwd.pre[j] += fi * w[j];
  }
  fwd.h.resize(hidden);
  for (std::size_t j = 0; j < hidden; ++j) fwd.h[j] = fwd.pre[j] > 0.0 ? fwd.pre[j] : 0.0;

  fwd.z = {params.b2[0], params.b2[1], params.b2[2]};
  for (std::size_t j = 0; j < hidden; ++j) {
    const double hj = fwd.h[j];
    if (hj == 0.0) continue;
    const double* w = params.w2.row(j);
    for (std::size_t c = 0; c < 3; ++c) fwd.z[c] += hj * w[c];
  }
  for (double zc : fwd.z) check_finite(zc, "logit");
  fwd.p.probs = softmax3(fwd.z);
  return fwd;
}

// Accumulates d(loss)/d(params) into grad given d(loss)/d(logits).
void run_backward(const ScorerParams& params, const Forward& fwd,
                  const std::array<double, 3>& dz, Gradient& grad) {
  const std::size_t k = params.embedding_dim();
  const std::size_t hidden = params.hidden_dim();

  for (std::size_t c = 0; c < 3; ++c) grad.b2[c] += dz[c];
  std::vector<double> dh(hidden, 0.0);
  for (std::size_t j = 0; j < hidden; ++j) {
    double* gw = grad.w2.row(j);
    const double* w = params.w2.row(j);
    const double hj = fwd.h[j];
    double acc = 0.0;
    for (std::size_t c = 0; c < 3; ++c) {
      gw[c] += hj * dz[c];
      acc += w[c] * dz[c];
    }
    dh[j] = acc;
  }

  // relu' is 0 at and below the kink.
  std::vector<double> dpre(hidden);
  for (std::size_t j = 0; j < hidden; ++j) dpre[j] = fwd.pre[j] > 0.0 ? dh[j] : 0.0;

  std::vector<double> df(4 * k, 0.0);
  for (std::size_t i = 0; i < 4 * k; ++i) {
    double* gw = grad.w1.row(i);
    const double* w = params.w1.row(i);
    const double fi = fwd.f[i];
    double acc = 0.0;
    for (std::size_t j = 0; j < hidden; ++j) {
      gw[j] += fi * dpre[j];
      acc += w[j] * dpre[j];
    }
    df[i] = acc;
  }
  for (std::size_t j = 0; j < hidden; ++j) grad.b1[j] += dpre[j];

  std::vector<double> du(k), dv(k);
  for (std::size_t d = 0; d < k; ++d) {
    const int sg = sign_or_zero(fwd.u[d] - fwd.v[d]);
    du[d] = df[d] + df[2 * k + d] * fwd.v[d] + df[3 * k + d] * sg;
    dv[d] = df[k + d] + df[2 * k + d] * fwd.u[d] - df[3 * k + d] * sg;
  }

  const double inv_a = 1.0 / static_cast<double>(fwd.prem_ids.size());
  for (int id : fwd.prem_ids) {
    double* row = grad.embeddings.row(static_cast<std::size_t>(id));
    for (std::size_t d = 0; d < k; ++d) row[d] += du[d] * inv_a;
  }
  const double inv_b = 1.0 / static_cast<double>(fwd.hyp_ids.size());
  for (int id : fwd.hyp_ids) {
    double* row = grad.embeddings.row(static_cast<std::size_t>(id));
    for (std::size_t d = 0; d < k; ++d) row[d] += dv[d] * inv_b;
  }
}

// d(loss)/d(logits) for a term of the form weight * p[cls].
std::array<double, 3> dz_for_prob_term(const Prediction& p, int cls, double weight) {
  std::array<double, 3> dz{};
  const double pc = p[cls];
  for (int j = 0; j < 3; ++j) {
    dz[static_cast<std::size_t>(j)] = weight * pc * ((j == cls ? 1.0 : 0.0) - p[j]);
  }
  return dz;
}

struct AtomEval {
  Forward fwd;
  int cls = 0;
};

AtomEval eval_atom(const ScorerParams& params, const Atom& atom, const Substitution& s) {
  auto it1 = s.find(atom.arg1);
  auto it2 = s.find(atom.arg2);
  if (it1 == s.end() || it2 == s.end()) {
    throw grounding_error("unbound rule variable in adversarial term");
  }
  AtomEval ev;
  ev.fwd = run_forward(params, it1->second, it2->second);
  ev.cls = class_index(atom.pred);
  return ev;
}

}  // namespace

Gradient zero_gradient(const ScorerParams& params) {
  Gradient g;
  g.embeddings = Matrix(params.embeddings.rows, params.embeddings.cols);
  g.w1 = Matrix(params.w1.rows, params.w1.cols);
  g.b1.assign(params.b1.size(), 0.0);
  g.w2 = Matrix(params.w2.rows, params.w2.cols);
  g.b2.assign(params.b2.size(), 0.0);
  return g;
}

std::array<BlockRef, 5> param_blocks(ScorerParams& p) {
  return {BlockRef{"embeddings", &p.embeddings.data, p.embeddings.rows, p.embeddings.cols},
          BlockRef{"W1", &p.w1.data, p.w1.rows, p.w1.cols},
          BlockRef{"b1", &p.b1, p.b1.size(), 1},
          BlockRef{"W2", &p.w2.data, p.w2.rows, p.w2.cols},
          BlockRef{"b2", &p.b2, p.b2.size(), 1}};
}

std::array<BlockRef, 5> grad_blocks(Gradient& g) {
  return {BlockRef{"embeddings", &g.embeddings.data, g.embeddings.rows, g.embeddings.cols},
          BlockRef{"W1", &g.w1.data, g.w1.rows, g.w1.cols},
          BlockRef{"b1", &g.b1, g.b1.size(), 1},
          BlockRef{"W2", &g.w2.data, g.w2.rows, g.w2.cols},
          BlockRef{"b2", &g.b2, g.b2.size(), 1}};
}

ScorerParams init_params(const ScorerConfig& config, Vocab vocab) {
  if (config.embedding_dim < 1 || config.hidden_dim < 1) {
    throw std::invalid_argument("scorer dimensions must be >= 1");
  }
  if (config.vocab_size != 0 && config.vocab_size != vocab.size()) {
    throw std::invalid_argument("config.vocab_size does not match the vocab");
  }
  ScorerParams params;
  params.vocab = std::move(vocab);
  const std::size_t v = params.vocab.size();
  const std::size_t k = config.embedding_dim;
  const std::size_t hidden = config.hidden_dim;
  params.embeddings = Matrix(v, k);
  params.w1 = Matrix(4 * k, hidden);
  params.b1.assign(hidden, 0.0);
  params.w2 = Matrix(hidden, 3);
  params.b2.assign(3, 0.0);

  Rng rng(config.rng_seed);
  const double s = config.init_scale;
  for (BlockRef block : param_blocks(params)) {
    for (double& x : *block.data) x = rng.real(-s, s);
  }
  // PAD row stays zero.
  std::fill(params.embeddings.row(Vocab::kPad), params.embeddings.row(Vocab::kPad) + k, 0.0);
  return params;
}

std::vector<double> encode(const ScorerParams& params, const Sentence& s) {
  return mean_rows(params, token_ids(params, s));
}

std::array<double, 3> softmax3(const std::array<double, 3>& logits) {
  const double m = std::max({logits[0], logits[1], logits[2]});
  std::array<double, 3> e{std::exp(logits[0] - m), std::exp(logits[1] - m),
                          std::exp(logits[2] - m)};
  const double sum = e[0] + e[1] + e[2];
  return {e[0] / sum, e[1] / sum, e[2] / sum};
}

Prediction predict(const ScorerParams& params, const Sentence& premise,
                   const Sentence& hypothesis) {
  return run_forward(params, premise, hypothesis).p;
}

double data_loss(const ScorerParams& params, const std::vector<Instance>& batch) {
  double loss = 0.0;
  for (const Instance& inst : batch) {
    const int gold = class_of_label(inst.label);
    const Prediction p = predict(params, inst.premise, inst.hypothesis);
    loss -= std::log(p[gold]);
  }
  check_finite(loss, "data loss");
  return loss;
}

std::pair<double, Gradient> loss_and_grad(const ScorerParams& params,
                                          const std::vector<Instance>& batch,
                                          const std::vector<RuleGrounding>& groundings,
                                          double lambda) {
  Gradient grad = zero_gradient(params);
  double loss = 0.0;

  for (const Instance& inst : batch) {
    const int gold = class_of_label(inst.label);
    Forward fwd = run_forward(params, inst.premise, inst.hypothesis);
    loss -= std::log(fwd.p[gold]);
    std::array<double, 3> dz{};
    for (int c = 0; c < 3; ++c) {
      dz[static_cast<std::size_t>(c)] = fwd.p[c] - (c == gold ? 1.0 : 0.0);
    }
    run_backward(params, fwd, dz, grad);
  }

  if (lambda != 0.0) {
    for (const RuleGrounding& g : groundings) {
      const Rule& rule = *g.rule;
      const Substitution& subst = *g.subst;

      // Body: Goedel min over atom probabilities, 1.0 for the tautology.
      // The subgradient of the min goes entirely to the first minimal atom.
      std::vector<AtomEval> body;
      body.reserve(rule.body.size());
      double body_p = 1.0;
      std::size_t argmin = 0;
      for (std::size_t i = 0; i < rule.body.size(); ++i) {
        body.push_back(eval_atom(params, rule.body[i], subst));
        const double pi = body.back().fwd.p[body.back().cls];
        if (pi < body_p) {
          body_p = pi;
          argmin = i;
        }
      }

      AtomEval head = eval_atom(params, rule.head.atom, subst);
      const double head_atom_p = head.fwd.p[head.cls];
      const double head_p = rule.head.negated ? 1.0 - head_atom_p : head_atom_p;

      const double margin = body_p - head_p;
      if (margin <= 0.0) continue;  // hinge inactive; derivative at 0 is 0
      loss += lambda * margin;

      if (!rule.body.empty()) {
        const AtomEval& m = body[argmin];
        run_backward(params, m.fwd, dz_for_prob_term(m.fwd.p, m.cls, lambda), grad);
      }
      const double head_weight = rule.head.negated ? lambda : -lambda;
      run_backward(params, head.fwd, dz_for_prob_term(head.fwd.p, head.cls, head_weight), grad);
    }
  }

  check_finite(loss, "loss");
  return {loss, std::move(grad)};
}

namespace {

void axpy_into(std::vector<double>& x, const std::vector<double>& g, double scale) {
  if (x.size() != g.size()) throw std::logic_error("gradient shape mismatch");
  for (std::size_t i = 0; i < x.size(); ++i) x[i] += scale * g[i];
}

}  // namespace

void sgd_step(ScorerParams& params, const Gradient& grad, double eta) {
  axpy_into(params.embeddings.data, grad.embeddings.data, -eta);
  axpy_into(params.w1.data, grad.w1.data, -eta);
  axpy_into(params.b1, grad.b1, -eta);
  axpy_into(params.w2.data, grad.w2.data, -eta);
  axpy_into(params.b2, grad.b2, -eta);
  const std::size_t k = params.embedding_dim();
  std::fill(params.embeddings.row(Vocab::kPad), params.embeddings.row(Vocab::kPad) + k, 0.0);
}

namespace {

void write_doubles(std::ostream& out, const std::vector<double>& values) {
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(values.data()),
              static_cast<std::streamsize>(values.size() * sizeof(double)));
  } else {
    for (double v : values) {
      std::uint64_t bits;
      std::memcpy(&bits, &v, 8);
      char bytes[8];
      for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
      out.write(bytes, 8);
    }
  }
}

void read_doubles(std::istream& in, std::vector<double>& values) {
  if constexpr (std::endian::native == std::endian::little) {
    in.read(reinterpret_cast<char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(double)));
  } else {
    char bytes[8];
    for (double& v : values) {
      in.read(bytes, 8);
      std::uint64_t bits = 0;
      for (int i = 0; i < 8; ++i) {
        bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[i])) << (8 * i);
      }
      std::memcpy(&v, &bits, 8);
    }
  }
}

}  // namespace

void save_checkpoint(const ScorerParams& params, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot write checkpoint: " + path);
  out << "NLICKPT 1 " << params.vocab.size() << ' ' << params.embedding_dim() << ' '
      << params.hidden_dim() << '\n';
  for (std::size_t i = 0; i < params.vocab.size(); ++i) {
    out << params.vocab.token_of(static_cast<int>(i)) << '\t'
        << params.vocab.count_of(static_cast<int>(i)) << '\n';
  }
  const struct {
    const char* name;
    const std::vector<double>* data;
    std::size_t rows, cols;
  } blocks[] = {
      {"embeddings", &params.embeddings.data, params.embeddings.rows, params.embeddings.cols},
      {"W1", &params.w1.data, params.w1.rows, params.w1.cols},
      {"b1", &params.b1, params.b1.size(), 1},
      {"W2", &params.w2.data, params.w2.rows, params.w2.cols},
      {"b2", &params.b2, params.b2.size(), 1},
  };
  for (const auto& block : blocks) {
    out << "BLOCK " << block.name << ' ' << block.rows << ' ' << block.cols << '\n';
    write_doubles(out, *block.data);
    out << '\n';
  }
  if (!out) throw io_error("checkpoint write failed: " + path);
}

ScorerParams load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open checkpoint: " + path);

  std::string line;
  if (!std::getline(in, line)) throw format_error(path + ": empty checkpoint");
  std::istringstream header(line);
  std::string magic;
  int version = 0;
  std::size_t vocab_size = 0, k = 0, hidden = 0;
  header >> magic >> version >> vocab_size >> k >> hidden;
  if (magic != "NLICKPT" || version != 1 || !header || vocab_size < 4) {
    throw format_error(path + ": bad checkpoint header '" + line + "'");
  }

  Vocab vocab;
  for (std::size_t i = 0; i < vocab_size; ++i) {
    if (!std::getline(in, line)) throw format_error(path + ": truncated vocab");
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos) throw format_error(path + ": bad vocab line '" + line + "'");
    const std::string token = line.substr(0, tab);
    const std::uint64_t count = std::stoull(line.substr(tab + 1));
    if (i < 4) {
      // Reserved rows already exist; verify the stored text matches.
      if (token != vocab.token_of(static_cast<int>(i))) {
        throw format_error(path + ": reserved vocab entry mismatch at index " +
                           std::to_string(i));
      }
    } else {
      vocab.add(token, count);
    }
  }

  ScorerParams params;
  params.vocab = std::move(vocab);
  params.embeddings = Matrix(vocab_size, k);
  params.w1 = Matrix(4 * k, hidden);
  params.b1.assign(hidden, 0.0);
  params.w2 = Matrix(hidden, 3);
  params.b2.assign(3, 0.0);

  for (BlockRef block : param_blocks(params)) {
    if (!std::getline(in, line)) throw format_error(path + ": truncated checkpoint");
    std::istringstream bh(line);
    std::string tag, name;
    std::size_t rows = 0, cols = 0;
    bh >> tag >> name >> rows >> cols;
    if (tag != "BLOCK" || name != block.name || rows != block.rows || cols != block.cols) {
      throw format_error(path + ": unexpected block line '" + line + "'");
    }
    read_doubles(in, *block.data);
    if (!in) throw format_error(path + ": truncated block " + name);
    in.get();  // separator newline
  }
  for (BlockRef block : param_blocks(params)) {
    for (double x : *block.data) {
      if (!std::isfinite(x)) throw format_error(path + ": non-finite parameter");
    }
  }
  return params;
}

std::size_t load_pretrained_embeddings(ScorerParams& params, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open embeddings file: " + path);
  const std::size_t k = params.embedding_dim();
  std::string line;
  std::size_t loaded = 0, line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string token;
    ls >> token;
    const int id = params.vocab.lookup(token);
    std::vector<double> row(k);
    for (std::size_t d = 0; d < k; ++d) {
      if (!(ls >> row[d])) {
        throw format_error(path + ":" + std::to_string(line_no) + ": expected " +
                           std::to_string(k) + " values");
      }
    }
    if (id == Vocab::kUnk && params.vocab.token_of(Vocab::kUnk) != token) continue;
    std::copy(row.begin(), row.end(), params.embeddings.row(static_cast<std::size_t>(id)));
    ++loaded;
  }
  return loaded;
}

}  // namespace nli
