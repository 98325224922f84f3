#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "nli/corpus.hpp"
#include "nli/rules.hpp"
#include "nli/scorer.hpp"

namespace nli {

// Non-finite values encountered during scoring or optimisation.
struct numeric_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  double* row(std::size_t r) { return data.data() + r * cols; }
  const double* row(std::size_t r) const { return data.data() + r * cols; }
};

struct ScorerConfig {
  std::size_t embedding_dim = 32;
  std::size_t hidden_dim = 64;
  std::size_t vocab_size = 0;      // must match the vocab passed to init_params
  std::uint64_t rng_seed = 0;
  double init_scale = 0.1;
};

// Parameters of the built-in scorer: mean-of-embeddings encoder, the
// [u; v; u*v; |u-v|] pair feature, one relu hidden layer, and a 3-way
// softmax readout.
struct ScorerParams {
  Vocab vocab;
  Matrix embeddings;            // |V| x k
  Matrix w1;                    // 4k x hidden
  std::vector<double> b1;       // hidden
  Matrix w2;                    // hidden x 3
  std::vector<double> b2;       // 3

  std::size_t embedding_dim() const { return embeddings.cols; }
  std::size_t hidden_dim() const { return w1.cols; }
};

// Gradient with respect to every parameter; shapes mirror ScorerParams.
struct Gradient {
  Matrix embeddings;
  Matrix w1;
  std::vector<double> b1;
  Matrix w2;
  std::vector<double> b2;
};

Gradient zero_gradient(const ScorerParams& params);

// Named view over the five parameter arrays in checkpoint order.
struct BlockRef {
  const char* name;
  std::vector<double>* data;
  std::size_t rows;
  std::size_t cols;
};
std::array<BlockRef, 5> param_blocks(ScorerParams& params);
std::array<BlockRef, 5> grad_blocks(Gradient& grad);

// Uniform [-init_scale, +init_scale] entries drawn deterministically from
// config.rng_seed, in block order; the PAD embedding row is zeroed.
ScorerParams init_params(const ScorerConfig& config, Vocab vocab);

// Mean of the embedding rows of the sentence's tokens (normalized and
// UNK-mapped by the vocab). The sentence must be non-empty.
std::vector<double> encode(const ScorerParams& params, const Sentence& s);

// Softmax with max-subtraction; exposed for the shift-invariance tests.
std::array<double, 3> softmax3(const std::array<double, 3>& logits);

Prediction predict(const ScorerParams& params, const Sentence& premise,
                   const Sentence& hypothesis);

// Scorer adapter over frozen parameters (non-owning).
class ParamScorer : public Scorer {
 public:
  explicit ParamScorer(const ScorerParams& params) : params_(&params) {}
  Prediction predict(const Sentence& premise, const Sentence& hypothesis) const override {
    return nli::predict(*params_, premise, hypothesis);
  }

 private:
  const ScorerParams* params_;
};

// Sum over the batch of -log p(gold class); natural log. Every instance must
// carry one of the three gold labels.
double data_loss(const ScorerParams& params, const std::vector<Instance>& batch);

// One grounded rule used as an adversarial regularisation term.
struct RuleGrounding {
  const Rule* rule;
  const Substitution* subst;
};

// L = data_loss(batch) + lambda * sum_k inconsistency_loss(groundings[k]) and
// its exact gradient. Subgradient conventions: the Goedel min routes entirely
// to the first minimal body atom, the hinge derivative at 0 is 0, and
// d|x|/dx at 0 is 0.
std::pair<double, Gradient> loss_and_grad(const ScorerParams& params,
                                          const std::vector<Instance>& batch,
                                          const std::vector<RuleGrounding>& groundings,
                                          double lambda);

// params -= eta * grad, then the PAD embedding row is re-zeroed.
void sgd_step(ScorerParams& params, const Gradient& grad, double eta);

// Checkpoint: text header and vocab, then raw little-endian doubles per
// block. Round-trips bit-exactly.
void save_checkpoint(const ScorerParams& params, const std::string& path);
ScorerParams load_checkpoint(const std::string& path);

// Optional pretrained embeddings, one line per token: "token v1 ... vk".
// Rows for tokens absent from the file keep their current values. Returns
// the number of rows loaded.
std::size_t load_pretrained_embeddings(ScorerParams& params, const std::string& path);

}  // namespace nli
