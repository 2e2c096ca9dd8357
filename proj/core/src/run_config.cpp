#include "triplegan/run_config.hpp"

#include <functional>
#include <map>

#include "json.hpp"
#include "triplegan/error.hpp"

namespace triplegan {

using nlohmann::json;

void RunConfig::validate() const {
  train.validate();
  if (dataset.classes < 2) throw ValidationError("dataset.classes must be at least 2");
  if (n_labeled == 0 || n_labeled % dataset.classes != 0) {
    throw ValidationError("n_labeled must be a positive multiple of the class count");
  }
  if (checkpoint_every < 0) throw ValidationError("checkpoint_every must be non-negative");
}

namespace {

json train_to_json(const train::TrainConfig& t) {
  return json{{"alpha", t.alpha},
              {"alpha_p", t.alpha_p},
              {"alpha_b", t.alpha_b},
              {"lr", t.lr},
              {"adam_beta1", t.adam_beta1},
              {"adam_beta2", t.adam_beta2},
              {"adam_eps", t.adam_eps},
              {"m_d", t.m_d},
              {"m_c", t.m_c},
              {"m_g", t.m_g},
              {"m_u", t.m_u},
              {"epochs", t.epochs},
              {"rp_activation_epoch", t.rp_activation_epoch},
              {"iters_per_epoch", t.iters_per_epoch},
              {"pseudo_label_fraction", t.pseudo_label_fraction},
              {"unlabeled_reg", train::to_string(t.unlabeled_reg)},
              {"consistency_sigma", t.consistency_sigma},
              {"c_adv_estimator", train::to_string(t.c_adv_estimator)},
              {"mode", train::to_string(t.mode)},
              {"latent_dim", t.latent.dim},
              {"latent_family", t.latent.family == nn::LatentFamily::Uniform ? "uniform" : "normal"},
              {"classifier_hidden", t.arch.classifier_hidden},
              {"generator_hidden", t.arch.generator_hidden},
              {"discriminator_hidden", t.arch.discriminator_hidden},
              {"eval_samples", t.eval_samples},
              {"seed", t.seed}};
}

json dataset_to_json(const data::GeneratorParams& p) {
  return json{{"kind", data::kind_name(p.kind)},
              {"classes", p.classes},
              {"n_per_class", p.n_per_class},
              {"n_test_per_class", p.n_test_per_class},
              {"radius", p.radius},
              {"radii", p.radii},
              {"sigma", p.sigma},
              {"dim", p.dim},
              {"seed", p.seed}};
}

using Setters = std::map<std::string, std::function<void(const json&)>>;

void apply(const json& obj, const Setters& setters, const std::string& where) {
  if (!obj.is_object()) throw ValidationError(where + " must be a JSON object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    auto s = setters.find(it.key());
    if (s == setters.end()) throw ValidationError("unknown config key '" + where + "." + it.key() + "'");
    s->second(it.value());
  }
}

template <class T>
std::function<void(const json&)> into(T& field) {
  return [&field](const json& v) { field = v.get<T>(); };
}

}  // namespace

std::string run_config_to_json(const RunConfig& cfg) {
  json j{{"train", train_to_json(cfg.train)},
         {"dataset", dataset_to_json(cfg.dataset)},
         {"n_labeled", cfg.n_labeled},
         {"out_dir", cfg.out_dir},
         {"checkpoint_every", cfg.checkpoint_every}};
  return j.dump(2);
}

RunConfig run_config_from_json(const std::string& text, RunConfig base) {
  RunConfig& c = base;
  auto& t = c.train;
  auto& d = c.dataset;
  Setters train_keys{
      {"alpha", into(t.alpha)},
      {"alpha_p", into(t.alpha_p)},
      {"alpha_b", into(t.alpha_b)},
      {"lr", into(t.lr)},
      {"adam_beta1", into(t.adam_beta1)},
      {"adam_beta2", into(t.adam_beta2)},
      {"adam_eps", into(t.adam_eps)},
      {"m_d", into(t.m_d)},
      {"m_c", into(t.m_c)},
      {"m_g", into(t.m_g)},
      {"m_u", into(t.m_u)},
      {"epochs", into(t.epochs)},
      {"rp_activation_epoch", into(t.rp_activation_epoch)},
      {"iters_per_epoch", into(t.iters_per_epoch)},
      {"pseudo_label_fraction", into(t.pseudo_label_fraction)},
      {"unlabeled_reg", [&](const json& v) { t.unlabeled_reg = train::unlabeled_reg_from(v.get<std::string>()); }},
      {"consistency_sigma", into(t.consistency_sigma)},
      {"c_adv_estimator", [&](const json& v) { t.c_adv_estimator = train::adv_estimator_from(v.get<std::string>()); }},
      {"mode", [&](const json& v) { t.mode = train::game_mode_from(v.get<std::string>()); }},
      {"latent_dim", into(t.latent.dim)},
      {"latent_family",
       [&](const json& v) {
         auto s = v.get<std::string>();
         if (s == "uniform") {
           t.latent.family = nn::LatentFamily::Uniform;
         } else if (s == "normal") {
           t.latent.family = nn::LatentFamily::Normal;
         } else {
           throw ValidationError("unknown latent_family '" + s + "'");
         }
       }},
      {"classifier_hidden", into(t.arch.classifier_hidden)},
      {"generator_hidden", into(t.arch.generator_hidden)},
      {"discriminator_hidden", into(t.arch.discriminator_hidden)},
      {"eval_samples", into(t.eval_samples)},
      {"seed", into(t.seed)},
  };
  Setters dataset_keys{
      {"kind", [&](const json& v) { d.kind = data::kind_from_name(v.get<std::string>()); }},
      {"classes", into(d.classes)},
      {"n_per_class", into(d.n_per_class)},
      {"n_test_per_class", into(d.n_test_per_class)},
      {"radius", into(d.radius)},
      {"radii", into(d.radii)},
      {"sigma", into(d.sigma)},
      {"dim", into(d.dim)},
      {"seed", into(d.seed)},
  };
  Setters top{
      {"train", [&](const json& v) { apply(v, train_keys, "train"); }},
      {"dataset", [&](const json& v) { apply(v, dataset_keys, "dataset"); }},
      {"n_labeled", into(c.n_labeled)},
      {"out_dir", into(c.out_dir)},
      {"checkpoint_every", into(c.checkpoint_every)},
  };
  try {
    apply(json::parse(text), top, "config");
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed config: ") + e.what());
  }
  return base;
}

std::string config_hash(const RunConfig& cfg) {
  RunConfig copy = cfg;
  copy.out_dir.clear();
  return data::hex64(data::fnv1a64(run_config_to_json(copy)));
}

}  // namespace triplegan
