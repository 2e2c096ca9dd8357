#include "triplegan/training.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>

#include "json.hpp"
#include "triplegan/error.hpp"

namespace triplegan::train {

using ad::Graph;
using ad::Tensor;
using ad::Var;
using nn::Binding;

// --- config ----------------------------------------------------------------

void TrainConfig::validate() const {
  weights().validate();
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ContractError("learning rate must be positive and finite");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw ContractError("Adam betas must lie in [0, 1)");
  }
  if (!(adam_eps > 0.0)) throw ContractError("Adam epsilon must be positive");
  if (m_d == 0 || m_c == 0 || m_g == 0 || m_u == 0) throw ContractError("batch sizes must be at least 1");
  if (epochs < 0) throw ContractError("epochs must be non-negative");
  if (rp_activation_epoch < 0 || rp_activation_epoch > epochs) {
    throw ContractError("rp_activation_epoch must lie in [0, epochs]");
  }
  if (!(pseudo_label_fraction >= 0.0 && pseudo_label_fraction <= 1.0)) {
    throw ContractError("pseudo_label_fraction must lie in [0, 1]");
  }
  if (!(consistency_sigma >= 0.0)) throw ContractError("consistency noise scale must be non-negative");
  if (latent.dim == 0) throw ContractError("latent dimension must be at least 1");
  if (eval_samples == 0) throw ContractError("eval_samples must be at least 1");
}

std::string to_string(UnlabeledReg v) {
  switch (v) {
    case UnlabeledReg::None:
      return "none";
    case UnlabeledReg::Confidence:
      return "confidence";
    case UnlabeledReg::Consistency:
      return "consistency";
  }
  return "?";
}

std::string to_string(AdvEstimator v) {
  switch (v) {
    case AdvEstimator::MostProbable:
      return "most_probable";
    case AdvEstimator::ReinforceSample:
      return "reinforce_sample";
    case AdvEstimator::ExactEnum:
      return "exact_enum";
  }
  return "?";
}

std::string to_string(GameMode v) {
  switch (v) {
    case GameMode::Triple:
      return "triple";
    case GameMode::TwoPlayer:
      return "two_player";
    case GameMode::SupervisedOnly:
      return "supervised_only";
  }
  return "?";
}

UnlabeledReg unlabeled_reg_from(std::string_view s) {
  if (s == "none") return UnlabeledReg::None;
  if (s == "confidence") return UnlabeledReg::Confidence;
  if (s == "consistency") return UnlabeledReg::Consistency;
  throw ValidationError("unknown unlabeled_reg '" + std::string(s) + "'");
}

AdvEstimator adv_estimator_from(std::string_view s) {
  if (s == "most_probable") return AdvEstimator::MostProbable;
  if (s == "reinforce_sample") return AdvEstimator::ReinforceSample;
  if (s == "exact_enum") return AdvEstimator::ExactEnum;
  throw ValidationError("unknown c_adv_estimator '" + std::string(s) + "'");
}

GameMode game_mode_from(std::string_view s) {
  if (s == "triple") return GameMode::Triple;
  if (s == "two_player") return GameMode::TwoPlayer;
  if (s == "supervised_only") return GameMode::SupervisedOnly;
  throw ValidationError("unknown mode '" + std::string(s) + "'");
}

// --- Adam ------------------------------------------------------------------

void adam_update(std::span<Tensor* const> params, AdamState& state, const AdamHyper& hp, std::string_view owner) {
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto g = params[p]->grad();
    for (double v : g) {
      if (!std::isfinite(v)) {
        throw NumericalError("non-finite gradient in " + std::string(owner) + " parameter " + std::to_string(p) +
                             " (shape " + ad::shape_string(params[p]->shape()) + ")");
      }
    }
  }
  if (state.m.size() != params.size()) {
    state.m.clear();
    state.v.clear();
    for (auto* t : params) {
      state.m.emplace_back(t->size(), 0.0);
      state.v.emplace_back(t->size(), 0.0);
    }
  }
  ++state.t;
  const double t = static_cast<double>(state.t);
  const double c1 = 1.0 - std::pow(hp.beta1, t);
  const double c2 = 1.0 - std::pow(hp.beta2, t);
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto w = params[p]->data();
    auto g = params[p]->grad();
    auto& m = state.m[p];
    auto& v = state.v[p];
    if (m.size() != w.size()) throw ContractError("Adam state does not match parameter shapes");
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = hp.beta1 * m[i] + (1.0 - hp.beta1) * g[i];
      v[i] = hp.beta2 * v[i] + (1.0 - hp.beta2) * g[i] * g[i];
      double mhat = m[i] / c1;
      double vhat = v[i] / c2;
      w[i] -= hp.lr * mhat / (std::sqrt(vhat) + hp.eps);
    }
  }
}

namespace {

AdamHyper hyper(const TrainConfig& cfg) { return {cfg.lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps}; }

void zero_grads(const std::vector<Tensor*>& params) {
  for (auto* p : params) {
    if (!p->requires_grad()) p->set_requires_grad(true);
    p->zero_grad();
  }
}

double checked(double v, const char* what) {
  if (!std::isfinite(v)) throw NumericalError(std::string("non-finite ") + what);
  return v;
}

std::vector<std::size_t> argmax_rows(const Tensor& probs) {
  std::vector<std::size_t> out(probs.rows());
  for (std::size_t r = 0; r < probs.rows(); ++r)
    out[r] = nn::argmax_lowest(probs.data().subspan(r * probs.cols(), probs.cols()));
  return out;
}

Tensor take_rows(const Tensor& t, std::size_t begin, std::size_t count) {
  std::size_t c = t.cols();
  std::vector<double> data(t.data().begin() + static_cast<std::ptrdiff_t>(begin * c),
                           t.data().begin() + static_cast<std::ptrdiff_t>((begin + count) * c));
  return Tensor({count, c}, std::move(data));
}

Tensor stack_rows(const Tensor& a, const Tensor& b) {
  std::vector<double> data(a.data().begin(), a.data().end());
  data.insert(data.end(), b.data().begin(), b.data().end());
  return Tensor({a.rows() + b.rows(), a.cols()}, std::move(data));
}

Tensor with_noise(const Tensor& x, double sigma, std::mt19937_64& rng) {
  Tensor out = x;
  if (sigma > 0.0) {
    std::normal_distribution<double> n(0.0, sigma);
    for (auto& v : out.data()) v += n(rng);
  }
  return out;
}

}  // namespace

// --- one step --------------------------------------------------------------

DiscriminatorBatch prepare_discriminator_batch(const nn::TripleModel& model, const StepBatches& b,
                                               const TrainConfig& cfg) {
  const std::size_t k = model.classes();
  if (b.y_labeled.empty()) throw ContractError("training step needs a non-empty labeled batch");
  DiscriminatorBatch out;
  out.y_g = nn::one_hot(b.y_gen, k);
  out.x_g = nn::sample_generator(model.g, out.y_g, b.z);

  if (cfg.mode == GameMode::TwoPlayer) {
    out.x_real = b.x_labeled;
    out.y_real = nn::one_hot(b.y_labeled, k);
    out.has_classifier_pairs = false;
    return out;
  }

  Tensor pc = nn::predict_probs(model.c, b.x_unlabeled);
  out.x_c = b.x_unlabeled;
  out.y_c = nn::one_hot(argmax_rows(pc), k);

  const std::size_t m_real = b.x_labeled.rows();
  std::size_t n_pseudo = static_cast<std::size_t>(std::llround(cfg.pseudo_label_fraction * static_cast<double>(m_real)));
  n_pseudo = std::min(n_pseudo, b.x_extra.rows());
  const std::size_t n_true = m_real - n_pseudo;
  std::vector<std::size_t> labels;
  Tensor x_real;
  if (n_true > 0) {
    x_real = take_rows(b.x_labeled, 0, n_true);
    labels.assign(b.y_labeled.begin(), b.y_labeled.begin() + static_cast<std::ptrdiff_t>(n_true));
  }
  if (n_pseudo > 0) {
    Tensor x_pseudo = take_rows(b.x_extra, 0, n_pseudo);
    auto pseudo = argmax_rows(nn::predict_probs(model.c, x_pseudo));
    x_real = n_true > 0 ? stack_rows(x_real, x_pseudo) : x_pseudo;
    labels.insert(labels.end(), pseudo.begin(), pseudo.end());
  }
  out.x_real = std::move(x_real);
  out.y_real = nn::one_hot(labels, k);
  return out;
}

namespace {

Var discriminator_objective_graph(Graph& g, nn::DiscriminatorNet& d, const DiscriminatorBatch& batch,
                                  const TrainConfig& cfg, Binding binding) {
  Var real = nn::discriminate(g, d, g.constant(batch.x_real), g.constant(batch.y_real), binding);
  Var fake_g = nn::discriminate(g, d, g.constant(batch.x_g), g.constant(batch.y_g), binding);
  if (!batch.has_classifier_pairs) return loss::two_player_discriminator_objective(g, real, fake_g);
  Var fake_c = nn::discriminate(g, d, g.constant(batch.x_c), g.constant(batch.y_c), binding);
  return loss::discriminator_objective(g, real, fake_c, fake_g, cfg.weights());
}

}  // namespace

double discriminator_objective_value(const nn::TripleModel& model, const DiscriminatorBatch& batch,
                                     const TrainConfig& cfg) {
  Graph g;
  nn::DiscriminatorNet d = model.d;
  return g.value(discriminator_objective_graph(g, d, batch, cfg, Binding::Frozen))[0];
}

double update_discriminator(nn::TripleModel& model, const DiscriminatorBatch& batch, const TrainConfig& cfg,
                            AdamState& state) {
  Graph g;
  Var objective = discriminator_objective_graph(g, model.d, batch, cfg, Binding::Trainable);
  double value = checked(g.value(objective)[0], "discriminator objective");
  auto params = model.d.mlp.parameters();
  zero_grads(params);
  g.backward(ad::scale(g, objective, -1.0));
  adam_update(params, state, hyper(cfg), "discriminator");
  return value;
}

double update_classifier(nn::TripleModel& model, const StepBatches& b, const TrainConfig& cfg, int epoch,
                         AdamState& state, std::mt19937_64& rng) {
  if (cfg.mode == GameMode::TwoPlayer) return 0.0;
  if (b.y_labeled.empty()) throw ContractError("training step needs a non-empty labeled batch");
  const std::size_t k = model.classes();
  const auto w = cfg.weights();
  Graph g;

  Var labeled_probs = nn::classify(g, model.c, g.constant(b.x_labeled), Binding::Trainable);
  Var total = loss::cross_entropy_RL(g, labeled_probs, nn::one_hot(b.y_labeled, k));

  if (cfg.mode == GameMode::Triple) {
    Var xc = g.constant(b.x_unlabeled);
    Var adversarial;
    switch (cfg.c_adv_estimator) {
      case AdvEstimator::MostProbable: {
        auto mp = nn::most_probable_label(g, model.c, xc, Binding::Trainable);
        Tensor scores = nn::score_pairs(model.d, b.x_unlabeled, mp.one_hot);
        adversarial = loss::classifier_adversarial_term(g, mp.prob, scores, w);
        break;
      }
      case AdvEstimator::ReinforceSample: {
        Var log_probs = nn::classify_log_probs(g, model.c, xc, Binding::Trainable);
        const Tensor& lp = g.value(log_probs);
        std::vector<std::size_t> sampled(lp.rows());
        for (std::size_t r = 0; r < lp.rows(); ++r) {
          std::vector<double> p(k);
          for (std::size_t j = 0; j < k; ++j) p[j] = std::exp(lp.at(r, j));
          std::discrete_distribution<std::size_t> pick(p.begin(), p.end());
          sampled[r] = pick(rng);
        }
        Tensor scores = nn::score_pairs(model.d, b.x_unlabeled, nn::one_hot(sampled, k));
        adversarial = loss::classifier_adversarial_term(g, ad::gather(g, log_probs, sampled), scores, w);
        break;
      }
      case AdvEstimator::ExactEnum: {
        Var probs = nn::classify(g, model.c, xc, Binding::Trainable);
        const std::size_t m = b.x_unlabeled.rows();
        Tensor all({m, k});
        for (std::size_t j = 0; j < k; ++j) {
          Tensor s = nn::score_pairs(model.d, b.x_unlabeled, nn::one_hot(std::vector<std::size_t>(m, j), k));
          for (std::size_t r = 0; r < m; ++r) all.at(r, j) = s[r];
        }
        adversarial = loss::classifier_adversarial_expectation(g, probs, all, w);
        break;
      }
    }
    total = ad::add(g, total, adversarial);

    if (epoch >= cfg.rp_activation_epoch && cfg.alpha_p > 0.0) {
      Tensor y_g = nn::one_hot(b.y_gen, k);
      Tensor x_g = nn::sample_generator(model.g, y_g, b.z);
      Var probs_g = nn::classify(g, model.c, g.constant(std::move(x_g)), Binding::Trainable);
      total = ad::add(g, total, ad::scale(g, loss::pseudo_discriminative_RP(g, probs_g, y_g), cfg.alpha_p));
    }

    switch (cfg.unlabeled_reg) {
      case UnlabeledReg::None:
        break;
      case UnlabeledReg::Confidence: {
        Var probs_u = nn::classify(g, model.c, g.constant(b.x_extra), Binding::Trainable);
        total = ad::add(g, total, loss::confidence_loss_RU(g, probs_u, w));
        break;
      }
      case UnlabeledReg::Consistency: {
        Var p1 = nn::classify(g, model.c, g.constant(with_noise(b.x_extra, cfg.consistency_sigma, rng)),
                              Binding::Trainable);
        Var p2 = nn::classify(g, model.c, g.constant(with_noise(b.x_extra, cfg.consistency_sigma, rng)),
                              Binding::Trainable);
        total = ad::add(g, total, loss::consistency_loss(g, p1, p2));
        break;
      }
    }
  }

  double value = checked(g.value(total)[0], "classifier loss");
  auto params = model.c.mlp.parameters();
  zero_grads(params);
  g.backward(total);
  adam_update(params, state, hyper(cfg), "classifier");
  return value;
}

double update_generator(nn::TripleModel& model, const StepBatches& b, const TrainConfig& cfg, AdamState& state) {
  if (cfg.mode == GameMode::SupervisedOnly) return 0.0;
  Graph g;
  Var y = g.constant(nn::one_hot(b.y_gen, model.classes()));
  Var x = nn::generate(g, model.g, y, g.constant(b.z), Binding::Trainable);
  Var scores = nn::discriminate(g, model.d, x, y, Binding::Frozen);
  Var objective = cfg.mode == GameMode::TwoPlayer ? loss::two_player_generator_objective(g, scores)
                                                  : loss::generator_objective(g, scores, cfg.weights());
  double value = checked(g.value(objective)[0], "generator objective");
  auto params = model.g.mlp.parameters();
  zero_grads(params);
  g.backward(objective);
  adam_update(params, state, hyper(cfg), "generator");
  return value;
}

StepLosses train_step(nn::TripleModel& model, const StepBatches& batches, const TrainConfig& cfg,
                      OptimizerStates& states, int epoch, std::mt19937_64& rng) {
  StepLosses out;
  if (cfg.mode != GameMode::SupervisedOnly) {
    DiscriminatorBatch db = prepare_discriminator_batch(model, batches, cfg);
    out.loss_d = -update_discriminator(model, db, cfg, states.d);
  }
  out.loss_c = update_classifier(model, batches, cfg, epoch, states.c, rng);
  out.loss_g = update_generator(model, batches, cfg, states.g);
  return out;
}

// --- evaluation ------------------------------------------------------------

bool MetricsRecord::finite() const {
  for (double v : {loss_d, loss_c, loss_g, labeled_error, test_error, cond_fidelity, est_jsd})
    if (!std::isfinite(v)) return false;
  return true;
}

double histogram_jsd(std::span<const double> real, std::span<const double> generated, std::size_t dim,
                     std::size_t bins) {
  if (dim == 0 || real.empty() || generated.empty() || real.size() % dim || generated.size() % dim) {
    throw DimensionError("histogram_jsd: point buffers do not match the dimension");
  }
  if (bins == 0) throw ContractError("histogram_jsd needs at least one bin");
  const std::size_t axes = std::min<std::size_t>(dim, 2);
  double lo[2] = {0.0, 0.0}, hi[2] = {0.0, 0.0};
  for (std::size_t a = 0; a < axes; ++a) {
    lo[a] = hi[a] = real[a];
    for (std::size_t i = 0; i < real.size(); i += dim) {
      lo[a] = std::min(lo[a], real[i + a]);
      hi[a] = std::max(hi[a], real[i + a]);
    }
  }
  auto cell = [&](std::span<const double> pts, std::size_t i) {
    std::size_t idx = 0;
    for (std::size_t a = 0; a < axes; ++a) {
      double width = hi[a] - lo[a];
      double u = width > 0.0 ? (pts[i + a] - lo[a]) / width : 0.0;
      auto b = static_cast<std::ptrdiff_t>(std::floor(u * static_cast<double>(bins)));
      b = std::clamp<std::ptrdiff_t>(b, 0, static_cast<std::ptrdiff_t>(bins) - 1);
      idx = idx * bins + static_cast<std::size_t>(b);
    }
    return idx;
  };
  std::size_t cells = axes == 2 ? bins * bins : bins;
  std::vector<double> p(cells, 0.0), q(cells, 0.0);
  for (std::size_t i = 0; i < real.size(); i += dim) p[cell(real, i)] += 1.0;
  for (std::size_t i = 0; i < generated.size(); i += dim) q[cell(generated, i)] += 1.0;
  const double np = static_cast<double>(real.size() / dim), nq = static_cast<double>(generated.size() / dim);
  double js = 0.0;
  for (std::size_t c = 0; c < cells; ++c) {
    double a = p[c] / np, b = q[c] / nq, m = 0.5 * (a + b);
    if (a > 0.0) js += 0.5 * a * std::log(a / m);
    if (b > 0.0) js += 0.5 * b * std::log(b / m);
  }
  return js;
}

double classification_error(const nn::ClassifierNet& c, const data::Dataset& ds, std::span<const std::size_t> rows) {
  if (rows.empty()) return 0.0;
  Tensor probs = nn::predict_probs(c, data::gather_rows(ds, rows));
  auto pred = argmax_rows(probs);
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < rows.size(); ++i)
    if (pred[i] != ds.y[rows[i]]) ++wrong;
  return static_cast<double>(wrong) / static_cast<double>(rows.size());
}

double conditional_fidelity(const nn::GeneratorNet& g, const data::Oracle& oracle, std::size_t samples,
                            std::mt19937_64& rng) {
  if (samples == 0) throw ContractError("conditional_fidelity needs at least one sample");
  std::vector<std::size_t> labels(samples);
  for (std::size_t i = 0; i < samples; ++i) labels[i] = i % g.classes;
  Tensor x = nn::sample_generator(g, nn::one_hot(labels, g.classes), g.latent.sample(samples, rng));
  std::size_t agree = 0;
  for (std::size_t i = 0; i < samples; ++i)
    if (oracle.predict(x.data().subspan(i * g.data_dim, g.data_dim)) == labels[i]) ++agree;
  return static_cast<double>(agree) / static_cast<double>(samples);
}

MetricsRecord evaluate(const nn::TripleModel& model, const data::Dataset& ds, std::size_t eval_samples,
                       std::uint64_t seed) {
  auto test = ds.test_indices();
  if (test.empty()) throw ContractError("evaluation needs a held-out test split");
  std::mt19937_64 rng(seed);
  MetricsRecord r;
  r.test_error = classification_error(model.c, ds, test);
  auto labeled = ds.labeled_indices();
  r.labeled_error = classification_error(model.c, ds, labeled);
  r.cond_fidelity = conditional_fidelity(model.g, ds.oracle, eval_samples, rng);

  auto train = ds.train_indices();
  Tensor real = data::gather_rows(ds, train);
  Tensor y = nn::one_hot(data::gather_labels(ds, train), model.classes());
  Tensor fake = nn::sample_generator(model.g, y, model.g.latent.sample(train.size(), rng));
  r.est_jsd = histogram_jsd(real.data(), fake.data(), ds.dim);
  return r;
}

Tensor interpolate_latent(const nn::GeneratorNet& g, std::size_t y, std::span<const double> z0,
                          std::span<const double> z1, std::size_t steps) {
  if (steps < 2) throw ContractError("interpolation needs at least two steps");
  if (y >= g.classes) throw ContractError("class index out of range");
  if (z0.size() != g.latent.dim || z1.size() != g.latent.dim) {
    throw DimensionError("interpolation endpoints must have the latent dimension");
  }
  Tensor z({steps, g.latent.dim});
  for (std::size_t i = 0; i < steps; ++i) {
    double t = static_cast<double>(i) / static_cast<double>(steps - 1);
    for (std::size_t j = 0; j < g.latent.dim; ++j) z.at(i, j) = (1.0 - t) * z0[j] + t * z1[j];
  }
  return nn::sample_generator(g, nn::one_hot(std::vector<std::size_t>(steps, y), g.classes), z);
}

// --- metrics I/O -----------------------------------------------------------

std::string metrics_csv_header() {
  return "epoch,loss_d,loss_c,loss_g,labeled_error,test_error,cond_fidelity,est_jsd";
}

std::string metrics_csv_row(const MetricsRecord& r) {
  std::string out = std::to_string(r.epoch);
  for (double v : {r.loss_d, r.loss_c, r.loss_g, r.labeled_error, r.test_error, r.cond_fidelity, r.est_jsd}) {
    char buf[40];
    auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 9);
    out += ',';
    out.append(buf, res.ptr);
  }
  return out;
}

std::string metrics_to_json(const MetricsRecord& r) {
  nlohmann::json j{{"epoch", r.epoch},
                   {"loss_d", r.loss_d},
                   {"loss_c", r.loss_c},
                   {"loss_g", r.loss_g},
                   {"labeled_error", r.labeled_error},
                   {"test_error", r.test_error},
                   {"cond_fidelity", r.cond_fidelity},
                   {"est_jsd", r.est_jsd}};
  return j.dump(2);
}

MetricsRecord metrics_from_json(const std::string& text) {
  try {
    auto j = nlohmann::json::parse(text);
    MetricsRecord r;
    r.epoch = j.at("epoch").get<int>();
    r.loss_d = j.at("loss_d").get<double>();
    r.loss_c = j.at("loss_c").get<double>();
    r.loss_g = j.at("loss_g").get<double>();
    r.labeled_error = j.at("labeled_error").get<double>();
    r.test_error = j.at("test_error").get<double>();
    r.cond_fidelity = j.at("cond_fidelity").get<double>();
    r.est_jsd = j.at("est_jsd").get<double>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed metrics JSON: ") + e.what());
  }
}

// --- full runs -------------------------------------------------------------

namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) { return splitmix(seed ^ splitmix(stream)); }

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw ValidationError("failed writing '" + path.string() + "'");
}

}  // namespace

TrainResult run_training(const TrainConfig& cfg, const data::Dataset& ds, const RunOptions& opts) {
  cfg.validate();
  ds.validate();
  auto labeled = ds.labeled_indices();
  if (labeled.empty()) throw ContractError("training needs labeled examples");

  TrainResult result{nn::TripleModel::create(ds.dim, ds.classes, cfg.latent, cfg.arch, stream_seed(cfg.seed, 1)), {}};
  nn::TripleModel& model = result.model;

  std::ofstream csv;
  auto save_checkpoint = [&](const std::string& name) {
    if (opts.out_dir.empty()) return;
    write_file(opts.out_dir / name, nn::checkpoint_to_json({model, opts.config_hash, opts.dataset_hash}));
  };
  if (!opts.out_dir.empty()) {
    std::filesystem::create_directories(opts.out_dir);
    csv.open(opts.out_dir / "metrics.csv", std::ios::binary | std::ios::trunc);
    if (!csv) throw ValidationError("cannot write metrics.csv in '" + opts.out_dir.string() + "'");
    csv << metrics_csv_header() << '\n';
    csv.flush();
  }

  data::BatchIterator inputs(ds, cfg.m_c, data::Source::All, stream_seed(cfg.seed, 2));
  data::BatchIterator labeled_stream(ds, cfg.m_d, data::Source::Labeled, stream_seed(cfg.seed, 3));
  data::BatchIterator extra_stream(ds, cfg.m_u, data::Source::All, stream_seed(cfg.seed, 4));
  std::mt19937_64 rng(stream_seed(cfg.seed, 5));
  std::uniform_int_distribution<std::size_t> pick_class(0, ds.classes - 1);
  OptimizerStates states;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<std::vector<std::size_t>> batches;
    if (cfg.iters_per_epoch == 0) {
      batches = inputs.epoch();
    } else {
      for (std::size_t i = 0; i < cfg.iters_per_epoch; ++i) batches.push_back(inputs.next());
    }

    double sum_d = 0.0, sum_c = 0.0, sum_g = 0.0;
    try {
      for (const auto& rows : batches) {
        StepBatches b;
        auto lab = labeled_stream.next();
        b.x_labeled = data::gather_rows(ds, lab);
        b.y_labeled = data::gather_labels(ds, lab);
        b.x_unlabeled = data::gather_rows(ds, rows);
        b.x_extra = data::gather_rows(ds, extra_stream.next());
        b.y_gen.resize(cfg.m_g);
        for (auto& y : b.y_gen) y = pick_class(rng);
        b.z = cfg.latent.sample(cfg.m_g, rng);
        StepLosses l = train_step(model, b, cfg, states, epoch, rng);
        sum_d += l.loss_d;
        sum_c += l.loss_c;
        sum_g += l.loss_g;
      }
    } catch (const NumericalError& e) {
      throw TrainingAborted(std::string("numerical abort in epoch ") + std::to_string(epoch + 1) + ": " + e.what(),
                            result.history);
    }

    const double n = static_cast<double>(batches.size());
    MetricsRecord rec = evaluate(model, ds, cfg.eval_samples, stream_seed(cfg.seed, 1000 + static_cast<std::uint64_t>(epoch)));
    rec.epoch = epoch + 1;
    rec.loss_d = sum_d / n;
    rec.loss_c = sum_c / n;
    rec.loss_g = sum_g / n;
    if (!rec.finite()) {
      throw TrainingAborted("non-finite metrics in epoch " + std::to_string(epoch + 1), result.history);
    }
    result.history.push_back(rec);
    if (csv.is_open()) {
      csv << metrics_csv_row(rec) << '\n';
      csv.flush();
    }
    if (opts.on_epoch) opts.on_epoch(rec);
    if (opts.checkpoint_every > 0 && (epoch + 1) % opts.checkpoint_every == 0 && epoch + 1 < cfg.epochs) {
      save_checkpoint("epoch_" + std::to_string(epoch + 1) + ".ckpt");
    }
  }
  save_checkpoint("final.ckpt");
  return result;
}

}  // namespace triplegan::train
