#pragma once

#include <array>
#include <cstddef>

#include "nli/corpus.hpp"

namespace nli {

// Class indices shared by predictions, labels, and rule predicates.
inline constexpr int kEntailment = 0;
inline constexpr int kContradiction = 1;
inline constexpr int kNeutral = 2;
inline constexpr int kNumClasses = 3;

// 3-class probability distribution (entailment, contradiction, neutral).
// Components are non-negative and sum to 1 within 1e-9.
struct Prediction {
  std::array<double, kNumClasses> probs{};

  double operator[](int cls) const { return probs[static_cast<std::size_t>(cls)]; }

  // Tie-break: the lowest class index among tied maxima.
  int argmax() const {
    int best = 0;
    for (int c = 1; c < kNumClasses; ++c) {
      if (probs[static_cast<std::size_t>(c)] > probs[static_cast<std::size_t>(best)]) best = c;
    }
    return best;
  }
};

// Behavioral contract for anything that can score a premise/hypothesis pair.
// Implementations must be safe for concurrent read-only use.
class Scorer {
 public:
  virtual ~Scorer() = default;
  virtual Prediction predict(const Sentence& premise, const Sentence& hypothesis) const = 0;
};

inline int class_of_label(Label label) {
  switch (label) {
    case Label::entailment: return kEntailment;
    case Label::contradiction: return kContradiction;
    case Label::neutral: return kNeutral;
    case Label::unlabeled: break;
  }
  throw std::logic_error("unlabeled instance has no class");
}

}  // namespace nli
