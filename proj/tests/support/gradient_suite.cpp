#include "gradient_suite.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "triplegan/losses.hpp"

namespace triplegan::testing {

using ad::Graph;
using ad::Shape;
using ad::Tensor;
using ad::Var;
using nn::Binding;

namespace {

Tensor uniform(Shape shape, double lo, double hi, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = u(rng);
  return t;
}

// Magnitudes in [gap, hi] with random signs: keeps kinked ops off their kink.
Tensor away_from_zero(Shape shape, double gap, double hi, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(gap, hi);
  std::bernoulli_distribution sign(0.5);
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = sign(rng) ? u(rng) : -u(rng);
  return t;
}

Tensor prob_rows(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  Tensor t = uniform({rows, cols}, 0.05, 1.0, rng);
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < cols; ++c) s += t.at(r, c);
    for (std::size_t c = 0; c < cols; ++c) t.at(r, c) /= s;
  }
  return t;
}

Tensor random_one_hot(std::size_t rows, std::size_t k, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, k - 1);
  std::vector<std::size_t> labels(rows);
  for (auto& l : labels) l = pick(rng);
  return nn::one_hot(labels, k);
}

Var reduce(Graph& g, Var out, const Tensor& weight) {
  if (g.value(out).size() == 1) return out;
  return ad::sum(g, ad::mul(g, out, g.constant(weight)));
}

Tensor reduction_weight(const Tensor& out, std::mt19937_64& rng) {
  if (out.size() == 1) return Tensor::scalar(1.0);
  return uniform(out.shape(), -1.0, 1.0, rng);
}

struct Suite {
  GradSuiteOptions opts;
  std::mt19937_64 rng;
  std::vector<GradCheck> out;

  void inputs(const std::string& name, const std::function<std::vector<Tensor>(std::mt19937_64&)>& sample,
              const InputBuilder& build, std::size_t differentiable = kAllInputs) {
    GradCheck c{name, 0.0, 0};
    for (std::size_t i = 0; i < opts.points; ++i) {
      c.worst = std::max(c.worst, check_inputs(build, sample(rng), rng, differentiable));
      ++c.points;
    }
    out.push_back(c);
  }

  // `make` builds fresh randomized networks for each point and returns the
  // parameters under test plus the scalar builder.
  void params(const std::string& name,
              const std::function<std::pair<std::vector<Tensor*>, ParamBuilder>(std::mt19937_64&)>& make) {
    GradCheck c{name, 0.0, 0};
    for (std::size_t i = 0; i < opts.points; ++i) {
      auto [ps, build] = make(rng);
      c.worst = std::max(c.worst, check_params(build, ps, rng));
      ++c.points;
    }
    out.push_back(c);
  }
};

// Small randomized players shared by the network-level checks.
struct Players {
  static constexpr std::size_t kDim = 2, kClasses = 3, kBatch = 4;
  nn::ClassifierNet c;
  nn::GeneratorNet g;
  nn::DiscriminatorNet d;
  Tensor x, x2, y, z;

  explicit Players(std::mt19937_64& rng) {
    nn::LatentSpec latent{3, nn::LatentFamily::Uniform};
    c = nn::ClassifierNet::create(kDim, kClasses, {5}, rng);
    g = nn::GeneratorNet::create(kDim, kClasses, latent, {5}, rng);
    d = nn::DiscriminatorNet::create(kDim, kClasses, {5}, rng);
    randomize(c.mlp, rng);
    randomize(g.mlp, rng);
    randomize(d.mlp, rng);
    x = uniform({kBatch, kDim}, -1.0, 1.0, rng);
    x2 = uniform({kBatch, kDim}, -1.0, 1.0, rng);
    y = random_one_hot(kBatch, kClasses, rng);
    z = latent.sample(kBatch, rng);
  }
};

}  // namespace

void randomize(nn::Mlp& mlp, std::mt19937_64& rng, double scale) {
  std::normal_distribution<double> n(0.0, scale);
  for (auto& layer : mlp.layers()) {
    for (auto& v : layer.weight.data()) v = n(rng);
    for (auto& v : layer.bias.data()) v = 0.2 * n(rng);
  }
}

double check_inputs(const InputBuilder& build, std::vector<Tensor> inputs, std::mt19937_64& rng,
                    std::size_t differentiable) {
  differentiable = std::min(differentiable, inputs.size());
  Tensor weight;
  {
    Graph probe;
    std::vector<Var> vs;
    for (const auto& t : inputs) vs.push_back(probe.constant(t));
    weight = reduction_weight(probe.value(build(probe, vs)), rng);
  }

  std::vector<double> analytic;
  {
    Graph g;
    std::vector<Var> vs;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      if (i >= differentiable) {
        vs.push_back(g.constant(inputs[i]));
        continue;
      }
      inputs[i].set_requires_grad(true);
      inputs[i].zero_grad();
      vs.push_back(g.parameter(inputs[i]));
    }
    g.backward(reduce(g, build(g, vs), weight));
    for (std::size_t i = 0; i < differentiable; ++i)
      analytic.insert(analytic.end(), inputs[i].grad().begin(), inputs[i].grad().end());
  }

  std::vector<double> theta;
  for (std::size_t i = 0; i < differentiable; ++i)
    theta.insert(theta.end(), inputs[i].data().begin(), inputs[i].data().end());
  auto f = [&](std::span<const double> th) {
    Graph g;
    std::vector<Var> vs;
    std::size_t off = 0;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      const auto& t = inputs[i];
      if (i >= differentiable) {
        vs.push_back(g.constant(t));
        continue;
      }
      std::vector<double> d(th.begin() + static_cast<std::ptrdiff_t>(off),
                            th.begin() + static_cast<std::ptrdiff_t>(off + t.size()));
      off += t.size();
      vs.push_back(g.constant(Tensor(t.shape(), std::move(d))));
    }
    return g.value(reduce(g, build(g, vs), weight))[0];
  };
  auto numeric = ad::finite_difference_gradient(f, theta);
  return ad::max_relative_error(analytic, numeric);
}

double check_params(const ParamBuilder& build, const std::vector<Tensor*>& params, std::mt19937_64& rng) {
  Tensor weight;
  {
    Graph probe;
    weight = reduction_weight(probe.value(build(probe, Binding::Frozen)), rng);
  }
  std::vector<double> analytic;
  {
    for (auto* p : params) {
      p->set_requires_grad(true);
      p->zero_grad();
    }
    Graph g;
    g.backward(reduce(g, build(g, Binding::Trainable), weight));
    for (auto* p : params) analytic.insert(analytic.end(), p->grad().begin(), p->grad().end());
  }
  std::vector<double> theta;
  for (auto* p : params) theta.insert(theta.end(), p->data().begin(), p->data().end());
  auto load = [&](std::span<const double> th) {
    std::size_t off = 0;
    for (auto* p : params) {
      std::copy_n(th.begin() + static_cast<std::ptrdiff_t>(off), p->size(), p->data().begin());
      off += p->size();
    }
  };
  auto f = [&](std::span<const double> th) {
    load(th);
    Graph g;
    return g.value(reduce(g, build(g, Binding::Frozen), weight))[0];
  };
  auto numeric = ad::finite_difference_gradient(f, theta);
  load(theta);
  return ad::max_relative_error(analytic, numeric);
}

std::vector<GradCheck> run_gradient_suite(const GradSuiteOptions& opts) {
  Suite s{opts, std::mt19937_64(opts.seed), {}};
  using V = std::vector<Var>;
  using T = std::vector<Tensor>;
  using R = std::mt19937_64;

  // --- primitives ----------------------------------------------------------
  s.inputs(
      "affine",
      [](R& r) { return T{uniform({3, 4}, -1, 1, r), uniform({4, 2}, -1, 1, r), uniform({2}, -1, 1, r)}; },
      [](Graph& g, const V& v) { return ad::affine(g, v[0], v[1], v[2]); });
  s.inputs(
      "leaky_relu", [](R& r) { return T{away_from_zero({3, 4}, 0.05, 2.0, r)}; },
      [](Graph& g, const V& v) { return ad::leaky_relu(g, v[0], 0.2); });
  s.inputs(
      "softplus", [](R& r) { return T{uniform({3, 4}, -3, 3, r)}; },
      [](Graph& g, const V& v) { return ad::softplus(g, v[0]); });
  s.inputs(
      "sigmoid", [](R& r) { return T{uniform({3, 4}, -3, 3, r)}; },
      [](Graph& g, const V& v) { return ad::sigmoid(g, v[0]); });
  s.inputs(
      "tanh", [](R& r) { return T{uniform({3, 4}, -2, 2, r)}; },
      [](Graph& g, const V& v) { return ad::tanh(g, v[0]); });
  s.inputs(
      "log_softmax", [](R& r) { return T{uniform({3, 4}, -3, 3, r)}; },
      [](Graph& g, const V& v) { return ad::log_softmax(g, v[0]); });
  s.inputs(
      "softmax", [](R& r) { return T{uniform({3, 4}, -3, 3, r)}; },
      [](Graph& g, const V& v) { return ad::softmax(g, v[0]); });
  s.inputs(
      "exp", [](R& r) { return T{uniform({3, 4}, -2, 2, r)}; }, [](Graph& g, const V& v) { return ad::exp(g, v[0]); });
  s.inputs(
      "log", [](R& r) { return T{uniform({3, 4}, 0.1, 3, r)}; }, [](Graph& g, const V& v) { return ad::log(g, v[0]); });
  s.inputs(
      "add", [](R& r) { return T{uniform({3, 4}, -1, 1, r), uniform({3, 4}, -1, 1, r)}; },
      [](Graph& g, const V& v) { return ad::add(g, v[0], v[1]); });
  s.inputs(
      "sub", [](R& r) { return T{uniform({3, 4}, -1, 1, r), uniform({3, 4}, -1, 1, r)}; },
      [](Graph& g, const V& v) { return ad::sub(g, v[0], v[1]); });
  s.inputs(
      "mul", [](R& r) { return T{uniform({3, 4}, -1, 1, r), uniform({3, 4}, -1, 1, r)}; },
      [](Graph& g, const V& v) { return ad::mul(g, v[0], v[1]); });
  s.inputs(
      "scale", [](R& r) { return T{uniform({3, 4}, -1, 1, r)}; },
      [](Graph& g, const V& v) { return ad::scale(g, v[0], -1.7); });
  s.inputs(
      "add_scalar", [](R& r) { return T{uniform({3, 4}, -1, 1, r)}; },
      [](Graph& g, const V& v) { return ad::add_scalar(g, v[0], 0.3); });
  s.inputs(
      "one_minus", [](R& r) { return T{uniform({3, 4}, -1, 1, r)}; },
      [](Graph& g, const V& v) { return ad::one_minus(g, v[0]); });
  s.inputs(
      "square", [](R& r) { return T{uniform({3, 4}, -1, 1, r)}; },
      [](Graph& g, const V& v) { return ad::square(g, v[0]); });
  s.inputs(
      "sum", [](R& r) { return T{uniform({3, 4}, -1, 1, r)}; }, [](Graph& g, const V& v) { return ad::sum(g, v[0]); });
  s.inputs(
      "mean", [](R& r) { return T{uniform({3, 4}, -1, 1, r)}; },
      [](Graph& g, const V& v) { return ad::mean(g, v[0]); });
  s.inputs(
      "row_sum", [](R& r) { return T{uniform({3, 4}, -1, 1, r)}; },
      [](Graph& g, const V& v) { return ad::row_sum(g, v[0]); });
  s.inputs(
      "col_mean", [](R& r) { return T{uniform({3, 4}, -1, 1, r)}; },
      [](Graph& g, const V& v) { return ad::col_mean(g, v[0]); });
  s.inputs(
      "gather", [](R& r) { return T{uniform({3, 4}, -1, 1, r)}; },
      [](Graph& g, const V& v) { return ad::gather(g, v[0], {2, 0, 3}); });
  s.inputs(
      "concat_cols", [](R& r) { return T{uniform({3, 2}, -1, 1, r), uniform({3, 3}, -1, 1, r)}; },
      [](Graph& g, const V& v) { return ad::concat_cols(g, v[0], v[1]); });
  s.inputs(
      "clamp",
      [](R& r) {
        // Stay 0.05 away from both bounds.
        Tensor t = away_from_zero({3, 4}, 0.05, 0.45, r);
        for (auto& x : t.data()) x += x > 0 ? 0.5 : -0.5;
        return T{t};
      },
      [](Graph& g, const V& v) { return ad::clamp(g, v[0], -0.5, 0.5); });
  s.inputs(
      "reshape", [](R& r) { return T{uniform({3, 4}, -1, 1, r)}; },
      [](Graph& g, const V& v) { return ad::reshape(g, v[0], {2, 6}); });

  // --- composite losses on their direct inputs ----------------------------
  const loss::LossWeights w{0.3, 0.1, 0.2};
  s.inputs(
      "discriminator_objective",
      [](R& r) { return T{uniform({4}, 0.05, 0.95, r), uniform({5}, 0.05, 0.95, r), uniform({3}, 0.05, 0.95, r)}; },
      [w](Graph& g, const V& v) { return loss::discriminator_objective(g, v[0], v[1], v[2], w); });
  s.inputs(
      "classifier_adversarial_term", [](R& r) { return T{uniform({4}, 0.05, 1.0, r), uniform({4}, 0.05, 0.95, r)}; },
      [w](Graph& g, const V& v) {
        return loss::classifier_adversarial_term(g, v[0], g.value(v[1]), w);
      },
      1);
  s.inputs(
      "classifier_adversarial_expectation",
      [](R& r) { return T{prob_rows(4, 3, r), uniform({4, 3}, 0.05, 0.95, r)}; },
      [w](Graph& g, const V& v) { return loss::classifier_adversarial_expectation(g, v[0], g.value(v[1]), w); }, 1);
  s.inputs(
      "cross_entropy_RL", [](R& r) { return T{prob_rows(4, 3, r), random_one_hot(4, 3, r)}; },
      [](Graph& g, const V& v) { return loss::cross_entropy_RL(g, v[0], g.value(v[1])); }, 1);
  s.inputs(
      "pseudo_discriminative_RP", [](R& r) { return T{prob_rows(4, 3, r), random_one_hot(4, 3, r)}; },
      [](Graph& g, const V& v) { return loss::pseudo_discriminative_RP(g, v[0], g.value(v[1])); }, 1);
  s.inputs(
      "confidence_loss_RU", [](R& r) { return T{uniform({5, 3}, -2, 2, r)}; },
      [w](Graph& g, const V& v) { return loss::confidence_loss_RU(g, ad::softmax(g, v[0]), w); });
  s.inputs(
      "consistency_loss", [](R& r) { return T{prob_rows(4, 3, r), prob_rows(4, 3, r)}; },
      [](Graph& g, const V& v) { return loss::consistency_loss(g, v[0], v[1]); });
  s.inputs(
      "generator_objective", [](R& r) { return T{uniform({4}, 0.05, 0.95, r)}; },
      [w](Graph& g, const V& v) { return loss::generator_objective(g, v[0], w); });
  s.inputs(
      "two_player_discriminator_objective",
      [](R& r) { return T{uniform({4}, 0.05, 0.95, r), uniform({3}, 0.05, 0.95, r)}; },
      [](Graph& g, const V& v) { return loss::two_player_discriminator_objective(g, v[0], v[1]); });
  s.inputs(
      "two_player_generator_objective", [](R& r) { return T{uniform({4}, 0.05, 0.95, r)}; },
      [](Graph& g, const V& v) { return loss::two_player_generator_objective(g, v[0]); });

  // --- players and losses through their parameters ------------------------
  using Made = std::pair<std::vector<Tensor*>, ParamBuilder>;
  s.params("classifier network", [](R& r) {
    auto p = std::make_shared<Players>(r);
    return Made{p->c.mlp.parameters(),
                [p](Graph& g, Binding b) { return nn::classify_log_probs(g, p->c, g.constant(p->x), b); }};
  });
  s.params("generator network", [](R& r) {
    auto p = std::make_shared<Players>(r);
    return Made{p->g.mlp.parameters(), [p](Graph& g, Binding b) {
                  return nn::generate(g, p->g, g.constant(p->y), g.constant(p->z), b);
                }};
  });
  s.params("discriminator network", [](R& r) {
    auto p = std::make_shared<Players>(r);
    return Made{p->d.mlp.parameters(), [p](Graph& g, Binding b) {
                  return nn::discriminate(g, p->d, g.constant(p->x), g.constant(p->y), b);
                }};
  });
  s.params("discriminator loss in D parameters", [w](R& r) {
    auto p = std::make_shared<Players>(r);
    return Made{p->d.mlp.parameters(), [p, w](Graph& g, Binding b) {
                  Tensor xg = nn::sample_generator(p->g, p->y, p->z);
                  Tensor yc = nn::one_hot({0, 1, 2, 1}, Players::kClasses);
                  Var real = nn::discriminate(g, p->d, g.constant(p->x), g.constant(p->y), b);
                  Var fake_c = nn::discriminate(g, p->d, g.constant(p->x2), g.constant(yc), b);
                  Var fake_g = nn::discriminate(g, p->d, g.constant(xg), g.constant(p->y), b);
                  return loss::discriminator_objective(g, real, fake_c, fake_g, w);
                }};
  });
  s.params("classifier loss in C parameters", [w](R& r) {
    auto p = std::make_shared<Players>(r);
    return Made{p->c.mlp.parameters(), [p, w](Graph& g, Binding b) {
                  auto mp = nn::most_probable_label(g, p->c, g.constant(p->x2), b);
                  Tensor scores = nn::score_pairs(p->d, p->x2, mp.one_hot);
                  Var total = loss::classifier_adversarial_term(g, mp.prob, scores, w);
                  total = ad::add(g, total, loss::cross_entropy_RL(g, nn::classify(g, p->c, g.constant(p->x), b), p->y));
                  Tensor xg = nn::sample_generator(p->g, p->y, p->z);
                  Var rp = loss::pseudo_discriminative_RP(g, nn::classify(g, p->c, g.constant(xg), b), p->y);
                  total = ad::add(g, total, ad::scale(g, rp, w.alpha_p));
                  return ad::add(g, total, loss::confidence_loss_RU(g, nn::classify(g, p->c, g.constant(p->x2), b), w));
                }};
  });
  s.params("consistency loss in C parameters", [](R& r) {
    auto p = std::make_shared<Players>(r);
    return Made{p->c.mlp.parameters(), [p](Graph& g, Binding b) {
                  return loss::consistency_loss(g, nn::classify(g, p->c, g.constant(p->x), b),
                                                nn::classify(g, p->c, g.constant(p->x2), b));
                }};
  });
  s.params("generator loss through frozen D", [w](R& r) {
    auto p = std::make_shared<Players>(r);
    return Made{p->g.mlp.parameters(), [p, w](Graph& g, Binding b) {
                  Var y = g.constant(p->y);
                  Var x = nn::generate(g, p->g, y, g.constant(p->z), b);
                  return loss::generator_objective(g, nn::discriminate(g, p->d, x, y, Binding::Frozen), w);
                }};
  });
  return s.out;
}

}  // namespace triplegan::testing
