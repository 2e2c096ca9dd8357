#include "triplegan/models.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

#include "json.hpp"
#include "triplegan/error.hpp"

namespace triplegan::nn {

using ad::Graph;
using ad::Tensor;
using ad::Var;

Mlp::Mlp(std::size_t input_dim, const std::vector<std::size_t>& hidden, std::size_t output_dim, bool zero_last,
         std::mt19937_64& rng, double leaky_slope)
    : slope_(leaky_slope) {
  if (input_dim == 0 || output_dim == 0) throw ContractError("MLP widths must be positive");
  std::vector<std::size_t> widths{input_dim};
  widths.insert(widths.end(), hidden.begin(), hidden.end());
  widths.push_back(output_dim);
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    std::size_t in = widths[l], out = widths[l + 1];
    if (in == 0 || out == 0) throw ContractError("MLP widths must be positive");
    Dense layer{Tensor({in, out}), Tensor({out})};
    bool last = l + 2 == widths.size();
    if (!(last && zero_last)) {
      double bound = std::sqrt(6.0 / static_cast<double>(in + out));
      std::uniform_real_distribution<double> u(-bound, bound);
      for (auto& w : layer.weight.data()) w = u(rng);
    }
    layers_.push_back(std::move(layer));
  }
}

Var Mlp::forward(Graph& g, Var input, Binding binding) {
  Var h = input;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Var w, b;
    if (binding == Binding::Trainable) {
      w = g.parameter(layers_[l].weight);
      b = g.parameter(layers_[l].bias);
    } else {
      w = g.constant(layers_[l].weight);
      b = g.constant(layers_[l].bias);
    }
    h = ad::affine(g, h, w, b);
    if (l + 1 < layers_.size()) h = ad::leaky_relu(g, h, slope_);
  }
  return h;
}

std::size_t Mlp::input_dim() const { return layers_.empty() ? 0 : layers_.front().weight.rows(); }
std::size_t Mlp::output_dim() const { return layers_.empty() ? 0 : layers_.back().weight.cols(); }

std::vector<Tensor*> Mlp::parameters() {
  std::vector<Tensor*> out;
  for (auto& l : layers_) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  }
  return out;
}

Tensor LatentSpec::sample(std::size_t batch, std::mt19937_64& rng) const {
  if (dim == 0) throw ContractError("latent dimension must be at least 1");
  Tensor z({batch, dim});
  if (family == LatentFamily::Uniform) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (auto& v : z.data()) v = u(rng);
  } else {
    std::normal_distribution<double> n(0.0, 1.0);
    for (auto& v : z.data()) v = n(rng);
  }
  return z;
}

ClassifierNet ClassifierNet::create(std::size_t data_dim, std::size_t classes, const std::vector<std::size_t>& hidden,
                                    std::mt19937_64& rng) {
  if (classes < 2) throw ContractError("classifier needs at least two classes");
  return ClassifierNet{Mlp(data_dim, hidden, classes, true, rng), classes};
}

GeneratorNet GeneratorNet::create(std::size_t data_dim, std::size_t classes, LatentSpec latent,
                                  const std::vector<std::size_t>& hidden, std::mt19937_64& rng) {
  if (classes < 2) throw ContractError("generator needs at least two classes");
  return GeneratorNet{Mlp(latent.dim + classes, hidden, data_dim, false, rng), classes, data_dim, latent};
}

DiscriminatorNet DiscriminatorNet::create(std::size_t data_dim, std::size_t classes,
                                          const std::vector<std::size_t>& hidden, std::mt19937_64& rng) {
  if (classes < 2) throw ContractError("discriminator needs at least two classes");
  return DiscriminatorNet{Mlp(data_dim + classes, hidden, 1, true, rng), classes, data_dim};
}

Tensor one_hot(const std::vector<std::size_t>& labels, std::size_t classes) {
  if (labels.empty()) throw ContractError("one_hot: empty label list");
  Tensor y({labels.size(), classes});
  for (std::size_t r = 0; r < labels.size(); ++r) {
    if (labels[r] >= classes) throw ContractError("one_hot: label out of range");
    y.at(r, labels[r]) = 1.0;
  }
  return y;
}

std::vector<std::size_t> labels_from_one_hot(const Tensor& y) {
  if (y.rank() != 2) throw ContractError("labels must be a [batch, K] one-hot matrix");
  std::vector<std::size_t> out(y.rows());
  for (std::size_t r = 0; r < y.rows(); ++r) {
    std::size_t ones = 0;
    for (std::size_t k = 0; k < y.cols(); ++k) {
      double v = y.at(r, k);
      if (v == 1.0) {
        ++ones;
        out[r] = k;
      } else if (v != 0.0) {
        throw ContractError("row " + std::to_string(r) + " of the label matrix is not one-hot");
      }
    }
    if (ones != 1) throw ContractError("row " + std::to_string(r) + " of the label matrix is not one-hot");
  }
  return out;
}

Var classify_log_probs(Graph& g, ClassifierNet& c, Var x, Binding binding) {
  return ad::log_softmax(g, c.mlp.forward(g, x, binding));
}

Var classify(Graph& g, ClassifierNet& c, Var x, Binding binding) {
  return ad::exp(g, classify_log_probs(g, c, x, binding));
}

Var generate(Graph& g, GeneratorNet& gen, Var y, Var z, Binding binding) {
  const Tensor& yv = g.value(y);
  labels_from_one_hot(yv);
  if (yv.cols() != gen.classes) throw DimensionError("generate: label width does not match class count");
  if (g.value(z).rank() != 2 || g.value(z).cols() != gen.latent.dim) {
    throw DimensionError("generate: latent batch has shape " + ad::shape_string(g.value(z).shape()));
  }
  Var input = ad::concat_cols(g, z, y);
  return ad::tanh(g, gen.mlp.forward(g, input, binding));
}

Var discriminate(Graph& g, DiscriminatorNet& d, Var x, Var y, Binding binding) {
  if (g.value(x).cols() != d.data_dim || g.value(y).cols() != d.classes) {
    throw DimensionError("discriminate: inputs " + ad::shape_string(g.value(x).shape()) + " and " +
                         ad::shape_string(g.value(y).shape()) + " do not fit the network");
  }
  Var logit = d.mlp.forward(g, ad::concat_cols(g, x, y), binding);
  return ad::clamp(g, ad::sigmoid(g, logit), kScoreEps, 1.0 - kScoreEps);
}

std::size_t argmax_lowest(std::span<const double> row) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < row.size(); ++k)
    if (row[k] > row[best]) best = k;
  return best;
}

MostProbable most_probable_label(Graph& g, Var probs) {
  const Tensor& p = g.value(probs);
  if (p.rank() != 2) throw DimensionError("most_probable_label expects [batch, K] probabilities");
  std::vector<std::size_t> label(p.rows());
  for (std::size_t r = 0; r < p.rows(); ++r) label[r] = argmax_lowest(p.data().subspan(r * p.cols(), p.cols()));
  Tensor oh = one_hot(label, p.cols());
  Var prob = ad::gather(g, probs, label);
  return MostProbable{std::move(oh), std::move(label), prob};
}

MostProbable most_probable_label(Graph& g, ClassifierNet& c, Var x, Binding binding) {
  return most_probable_label(g, classify(g, c, x, binding));
}

Tensor predict_probs(const ClassifierNet& c, const Tensor& x) {
  Graph g;
  ClassifierNet copy = c;
  return g.value(classify(g, copy, g.constant(x), Binding::Frozen));
}

Tensor sample_generator(const GeneratorNet& gen, const Tensor& y, const Tensor& z) {
  Graph g;
  GeneratorNet copy = gen;
  return g.value(generate(g, copy, g.constant(y), g.constant(z), Binding::Frozen));
}

Tensor score_pairs(const DiscriminatorNet& d, const Tensor& x, const Tensor& y) {
  Graph g;
  DiscriminatorNet copy = d;
  return g.value(discriminate(g, copy, g.constant(x), g.constant(y), Binding::Frozen));
}

TripleModel TripleModel::create(std::size_t data_dim, std::size_t classes, LatentSpec latent,
                                const ArchitectureSpec& arch, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  TripleModel m;
  m.c = ClassifierNet::create(data_dim, classes, arch.classifier_hidden, rng);
  m.g = GeneratorNet::create(data_dim, classes, latent, arch.generator_hidden, rng);
  m.d = DiscriminatorNet::create(data_dim, classes, arch.discriminator_hidden, rng);
  return m;
}

std::uint64_t parameter_hash(const Mlp& m) {
  std::uint64_t h = 14695981039346656037ull;
  auto mix = [&h](double v) {
    auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) {
      h ^= (bits >> (8 * i)) & 0xffu;
      h *= 1099511628211ull;
    }
  };
  for (const auto& l : m.layers()) {
    for (double v : l.weight.data()) mix(v);
    for (double v : l.bias.data()) mix(v);
  }
  return h;
}

// --- checkpoints -----------------------------------------------------------

namespace {

using nlohmann::json;

json mlp_to_json(const Mlp& m) {
  json layers = json::array();
  for (const auto& l : m.layers()) {
    json jl;
    jl["in"] = l.weight.rows();
    jl["out"] = l.weight.cols();
    jl["w"] = std::vector<double>(l.weight.data().begin(), l.weight.data().end());
    jl["b"] = std::vector<double>(l.bias.data().begin(), l.bias.data().end());
    layers.push_back(std::move(jl));
  }
  return json{{"leaky_slope", m.leaky_slope()}, {"layers", std::move(layers)}};
}

Mlp mlp_from_json(const json& j) {
  Mlp m;
  m.set_leaky_slope(j.at("leaky_slope").get<double>());
  for (const auto& jl : j.at("layers")) {
    auto in = jl.at("in").get<std::size_t>();
    auto out = jl.at("out").get<std::size_t>();
    Dense d{Tensor({in, out}, jl.at("w").get<std::vector<double>>()), Tensor({out}, jl.at("b").get<std::vector<double>>())};
    if (!m.layers().empty() && m.layers().back().weight.cols() != in) {
      throw ValidationError("checkpoint layers do not chain");
    }
    m.layers().push_back(std::move(d));
  }
  if (m.layers().empty()) throw ValidationError("checkpoint network has no layers");
  return m;
}

}  // namespace

std::string checkpoint_to_json(const Checkpoint& ckpt) {
  const TripleModel& m = ckpt.model;
  json j;
  j["version"] = kCheckpointVersion;
  j["config_hash"] = ckpt.config_hash;
  j["dataset_hash"] = ckpt.dataset_hash;
  j["classes"] = m.classes();
  j["data_dim"] = m.data_dim();
  j["latent_spec"] = {{"dim", m.g.latent.dim},
                      {"family", m.g.latent.family == LatentFamily::Uniform ? "uniform" : "normal"}};
  j["c"] = mlp_to_json(m.c.mlp);
  j["g"] = mlp_to_json(m.g.mlp);
  j["d"] = mlp_to_json(m.d.mlp);
  return j.dump();
}

Checkpoint checkpoint_from_json(const std::string& text) {
  try {
    json j = json::parse(text);
    if (j.at("version").get<int>() != kCheckpointVersion) throw ValidationError("unsupported checkpoint version");
    Checkpoint ck;
    ck.config_hash = j.at("config_hash").get<std::string>();
    ck.dataset_hash = j.at("dataset_hash").get<std::string>();
    auto classes = j.at("classes").get<std::size_t>();
    auto data_dim = j.at("data_dim").get<std::size_t>();
    LatentSpec latent;
    latent.dim = j.at("latent_spec").at("dim").get<std::size_t>();
    auto family = j.at("latent_spec").at("family").get<std::string>();
    if (family == "uniform") {
      latent.family = LatentFamily::Uniform;
    } else if (family == "normal") {
      latent.family = LatentFamily::Normal;
    } else {
      throw ValidationError("unknown latent family '" + family + "'");
    }
    ck.model.c = ClassifierNet{mlp_from_json(j.at("c")), classes};
    ck.model.g = GeneratorNet{mlp_from_json(j.at("g")), classes, data_dim, latent};
    ck.model.d = DiscriminatorNet{mlp_from_json(j.at("d")), classes, data_dim};
    if (ck.model.c.mlp.input_dim() != data_dim || ck.model.c.mlp.output_dim() != classes ||
        ck.model.g.mlp.input_dim() != latent.dim + classes || ck.model.g.mlp.output_dim() != data_dim ||
        ck.model.d.mlp.input_dim() != data_dim + classes || ck.model.d.mlp.output_dim() != 1) {
      throw ValidationError("checkpoint network shapes are inconsistent with classes/data_dim/latent_spec");
    }
    return ck;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed checkpoint: ") + e.what());
  } catch (const DimensionError& e) {
    throw ValidationError(std::string("malformed checkpoint: ") + e.what());
  }
}

}  // namespace triplegan::nn
