#pragma once

// Scalar objectives of the three-player game, built as graph expressions so
// each one can be differentiated and gradient-checked on its own.

#include <cstddef>

#include "triplegan/autodiff.hpp"

namespace triplegan::loss {

inline constexpr double kLogFloor = 1e-7;

struct LossWeights {
  double alpha = 0.5;     // weight of the classifier's fake pairs in D's negatives
  double alpha_p = 0.03;  // pseudo discriminative loss
  double alpha_b = 0.01;  // class balance inside the confidence loss

  void validate() const;
};

// (1/m_d)Σ log D(x_d,y_d) + (α/m_c)Σ log(1−D(x_c,y_c)) + ((1−α)/m_g)Σ log(1−D(x_g,y_g)).
// D ascends this quantity.
ad::Var discriminator_objective(ad::Graph& g, ad::Var scores_real, ad::Var scores_c, ad::Var scores_g,
                                const LossWeights& w);

// (α/m_c) Σ p_c(y*|x)·log(1−D(x, y*)). `scores_c` enters as a constant.
ad::Var classifier_adversarial_term(ad::Graph& g, ad::Var p_star, const ad::Tensor& scores_c, const LossWeights& w);

// Exact expectation over labels: (α/m_c) Σ_x Σ_y p_c(y|x)·log(1−D(x,y)) with
// `scores_all` holding D(x, y) for every class, [m_c, K].
ad::Var classifier_adversarial_expectation(ad::Graph& g, ad::Var probs, const ad::Tensor& scores_all,
                                           const LossWeights& w);

// Mean of −log p_c(y|x) over the batch; probs and labels are [m, K].
ad::Var cross_entropy(ad::Graph& g, ad::Var probs, const ad::Tensor& labels);
// Supervised loss on labeled pairs.
ad::Var cross_entropy_RL(ad::Graph& g, ad::Var probs, const ad::Tensor& labels);
// Cross-entropy of C on generated pairs with their conditioning labels.
ad::Var pseudo_discriminative_RP(ad::Graph& g, ad::Var probs_on_generated, const ad::Tensor& generator_labels);

// Batch-mean H(p_c(y|x)) + α_B · CE(uniform, batch-mean p_c(y)).
ad::Var confidence_loss_RU(ad::Graph& g, ad::Var probs_unlabeled, const LossWeights& w);

// Batch-mean ||p1 − p2||².
ad::Var consistency_loss(ad::Graph& g, ad::Var probs_pass1, ad::Var probs_pass2);

// ((1−α)/m_g) Σ log(1−D(x_g, y_g)); G descends it.
ad::Var generator_objective(ad::Graph& g, ad::Var scores_g, const LossWeights& w);

// Unit-weight two-player terms: mean log D(real) + mean log(1 − D(fake)), and
// the generator's mean log(1 − D(fake)).
ad::Var two_player_discriminator_objective(ad::Graph& g, ad::Var scores_real, ad::Var scores_fake);
ad::Var two_player_generator_objective(ad::Graph& g, ad::Var scores_fake);

}  // namespace triplegan::loss
