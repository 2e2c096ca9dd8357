#include "triplegan/losses.hpp"

#include <algorithm>
#include <cmath>

#include "triplegan/error.hpp"

namespace triplegan::loss {

using ad::Graph;
using ad::Tensor;
using ad::Var;

void LossWeights::validate() const {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ContractError("alpha must lie strictly inside (0, 1)");
  if (!(alpha_p >= 0.0)) throw ContractError("alpha_P must be non-negative");
  if (!(alpha_b >= 0.0)) throw ContractError("alpha_B must be non-negative");
}

namespace {

Var flat(Graph& g, Var v) {
  const auto& t = g.value(v);
  if (t.rank() == 1) return v;
  return ad::reshape(g, v, {t.size()});
}

// Tensors cannot have zero extents, so an empty batch shows up as a missing
// variable.
void require_batch(Var v, const char* what) {
  if (!v.valid()) throw ContractError(std::string("empty ") + what + " batch");
}

// (weight/m) Σ log(s) or (weight/m) Σ log(1 − s)
Var weighted_log_mean(Graph& g, Var scores, double weight, bool complement) {
  Var s = flat(g, scores);
  Var arg = complement ? ad::one_minus(g, s) : s;
  return ad::scale(g, ad::mean(g, ad::log(g, arg, kLogFloor)), weight);
}

}  // namespace

Var discriminator_objective(Graph& g, Var scores_real, Var scores_c, Var scores_g, const LossWeights& w) {
  w.validate();
  require_batch(scores_real, "real");
  require_batch(scores_c, "classifier");
  require_batch(scores_g, "generator");
  Var real = weighted_log_mean(g, scores_real, 1.0, false);
  Var from_c = weighted_log_mean(g, scores_c, w.alpha, true);
  Var from_g = weighted_log_mean(g, scores_g, 1.0 - w.alpha, true);
  return ad::add(g, ad::add(g, real, from_c), from_g);
}

Var classifier_adversarial_term(Graph& g, Var p_star, const Tensor& scores_c, const LossWeights& w) {
  w.validate();
  Var p = flat(g, p_star);
  if (g.value(p).size() != scores_c.size()) {
    throw DimensionError("classifier_adversarial_term: " + std::to_string(g.value(p).size()) + " probabilities vs " +
                         std::to_string(scores_c.size()) + " scores");
  }
  Tensor log_fake({scores_c.size()});
  for (std::size_t i = 0; i < scores_c.size(); ++i) {
    log_fake[i] = std::log(std::max(1.0 - scores_c[i], kLogFloor));
  }
  Var weighted = ad::mul(g, p, g.constant(std::move(log_fake)));
  return ad::scale(g, ad::mean(g, weighted), w.alpha);
}

Var classifier_adversarial_expectation(Graph& g, Var probs, const Tensor& scores_all, const LossWeights& w) {
  w.validate();
  if (g.value(probs).shape() != scores_all.shape()) {
    throw DimensionError("classifier_adversarial_expectation: probs " + ad::shape_string(g.value(probs).shape()) +
                         " vs scores " + ad::shape_string(scores_all.shape()));
  }
  Tensor log_fake(scores_all.shape());
  for (std::size_t i = 0; i < scores_all.size(); ++i) {
    log_fake[i] = std::log(std::max(1.0 - scores_all[i], kLogFloor));
  }
  Var per_row = ad::row_sum(g, ad::mul(g, probs, g.constant(std::move(log_fake))));
  return ad::scale(g, ad::mean(g, per_row), w.alpha);
}

Var cross_entropy(Graph& g, Var probs, const Tensor& labels) {
  if (g.value(probs).shape() != labels.shape()) {
    throw DimensionError("cross_entropy: probs " + ad::shape_string(g.value(probs).shape()) + " vs labels " +
                         ad::shape_string(labels.shape()));
  }
  Var picked = ad::row_sum(g, ad::mul(g, probs, g.constant(labels)));
  return ad::scale(g, ad::mean(g, ad::log(g, picked, kLogFloor)), -1.0);
}

Var cross_entropy_RL(Graph& g, Var probs, const Tensor& labels) { return cross_entropy(g, probs, labels); }

Var pseudo_discriminative_RP(Graph& g, Var probs_on_generated, const Tensor& generator_labels) {
  return cross_entropy(g, probs_on_generated, generator_labels);
}

Var confidence_loss_RU(Graph& g, Var probs_unlabeled, const LossWeights& w) {
  w.validate();
  const Tensor& p = g.value(probs_unlabeled);
  if (p.rank() != 2) throw DimensionError("confidence_loss_RU expects [batch, K] probabilities");
  const double k = static_cast<double>(p.cols());
  // H(p_c(y|x)) averaged over the batch.
  Var plogp = ad::mul(g, probs_unlabeled, ad::log(g, probs_unlabeled, kLogFloor));
  Var entropy = ad::scale(g, ad::mean(g, ad::row_sum(g, plogp)), -1.0);
  // −Σ_y (1/K) log p̄_c(y)
  Var marginal = ad::col_mean(g, probs_unlabeled);
  Var balance = ad::scale(g, ad::sum(g, ad::log(g, marginal, kLogFloor)), -1.0 / k);
  return ad::add(g, entropy, ad::scale(g, balance, w.alpha_b));
}

Var consistency_loss(Graph& g, Var probs_pass1, Var probs_pass2) {
  const Tensor& a = g.value(probs_pass1);
  if (a.rank() != 2 || a.shape() != g.value(probs_pass2).shape()) {
    throw DimensionError("consistency_loss: shapes " + ad::shape_string(a.shape()) + " and " +
                         ad::shape_string(g.value(probs_pass2).shape()));
  }
  Var d2 = ad::square(g, ad::sub(g, probs_pass1, probs_pass2));
  return ad::mean(g, ad::row_sum(g, d2));
}

Var generator_objective(Graph& g, Var scores_g, const LossWeights& w) {
  w.validate();
  return weighted_log_mean(g, scores_g, 1.0 - w.alpha, true);
}

Var two_player_discriminator_objective(Graph& g, Var scores_real, Var scores_fake) {
  require_batch(scores_real, "real");
  require_batch(scores_fake, "generator");
  return ad::add(g, weighted_log_mean(g, scores_real, 1.0, false), weighted_log_mean(g, scores_fake, 1.0, true));
}

Var two_player_generator_objective(Graph& g, Var scores_fake) {
  return weighted_log_mean(g, scores_fake, 1.0, true);
}

}  // namespace triplegan::loss
