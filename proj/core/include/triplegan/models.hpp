#pragma once

// The three players as small MLPs: classifier C(x) -> p_c(y|x), conditional
// generator G(y, z) -> x and joint discriminator D(x, y) -> (0, 1).

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "triplegan/autodiff.hpp"

namespace triplegan::nn {

inline constexpr double kScoreEps = 1e-7;

// Whether a forward pass binds the network's tensors as trainable
// parameters of the graph or copies them in as constants.
enum class Binding { Trainable, Frozen };

struct Dense {
  ad::Tensor weight;  // [in, out]
  ad::Tensor bias;    // [out]
};

class Mlp {
 public:
  Mlp() = default;
  // Glorot-uniform weights, zero biases. With zero_last the final layer's
  // weights start at zero too.
  Mlp(std::size_t input_dim, const std::vector<std::size_t>& hidden, std::size_t output_dim, bool zero_last,
      std::mt19937_64& rng, double leaky_slope = 0.2);

  // Pre-activation output of the last layer; hidden layers use leaky ReLU.
  ad::Var forward(ad::Graph& g, ad::Var input, Binding binding);

  std::size_t input_dim() const;
  std::size_t output_dim() const;
  std::vector<Dense>& layers() { return layers_; }
  const std::vector<Dense>& layers() const { return layers_; }
  std::vector<ad::Tensor*> parameters();
  double leaky_slope() const { return slope_; }
  void set_leaky_slope(double s) { slope_ = s; }

 private:
  std::vector<Dense> layers_;
  double slope_ = 0.2;
};

enum class LatentFamily { Uniform, Normal };

struct LatentSpec {
  std::size_t dim = 8;
  LatentFamily family = LatentFamily::Uniform;

  ad::Tensor sample(std::size_t batch, std::mt19937_64& rng) const;
};

struct ArchitectureSpec {
  std::vector<std::size_t> classifier_hidden{64, 64};
  std::vector<std::size_t> generator_hidden{64, 64};
  std::vector<std::size_t> discriminator_hidden{64, 64};
};

struct ClassifierNet {
  Mlp mlp;
  std::size_t classes = 0;

  static ClassifierNet create(std::size_t data_dim, std::size_t classes, const std::vector<std::size_t>& hidden,
                              std::mt19937_64& rng);
};

struct GeneratorNet {
  Mlp mlp;
  std::size_t classes = 0;
  std::size_t data_dim = 0;
  LatentSpec latent;

  static GeneratorNet create(std::size_t data_dim, std::size_t classes, LatentSpec latent,
                             const std::vector<std::size_t>& hidden, std::mt19937_64& rng);
};

struct DiscriminatorNet {
  Mlp mlp;
  std::size_t classes = 0;
  std::size_t data_dim = 0;

  static DiscriminatorNet create(std::size_t data_dim, std::size_t classes, const std::vector<std::size_t>& hidden,
                                 std::mt19937_64& rng);
};

// Class-index <-> one-hot helpers.
ad::Tensor one_hot(const std::vector<std::size_t>& labels, std::size_t classes);
// Throws ContractError unless every row is a valid one-hot vector.
std::vector<std::size_t> labels_from_one_hot(const ad::Tensor& y);

ad::Var classify_log_probs(ad::Graph& g, ClassifierNet& c, ad::Var x, Binding binding);
ad::Var classify(ad::Graph& g, ClassifierNet& c, ad::Var x, Binding binding);
ad::Var generate(ad::Graph& g, GeneratorNet& gen, ad::Var y, ad::Var z, Binding binding);
ad::Var discriminate(ad::Graph& g, DiscriminatorNet& d, ad::Var x, ad::Var y, Binding binding);

struct MostProbable {
  ad::Tensor one_hot;              // [batch, K]
  std::vector<std::size_t> label;  // argmax, ties to the lowest index
  ad::Var prob;                    // [batch], p_c(y*|x), differentiable
};
MostProbable most_probable_label(ad::Graph& g, ad::Var probs);
MostProbable most_probable_label(ad::Graph& g, ClassifierNet& c, ad::Var x, Binding binding);
std::size_t argmax_lowest(std::span<const double> row);

// Convenience forward passes outside any training graph.
ad::Tensor predict_probs(const ClassifierNet& c, const ad::Tensor& x);
ad::Tensor sample_generator(const GeneratorNet& gen, const ad::Tensor& y, const ad::Tensor& z);
ad::Tensor score_pairs(const DiscriminatorNet& d, const ad::Tensor& x, const ad::Tensor& y);

struct TripleModel {
  ClassifierNet c;
  GeneratorNet g;
  DiscriminatorNet d;

  static TripleModel create(std::size_t data_dim, std::size_t classes, LatentSpec latent,
                            const ArchitectureSpec& arch, std::uint64_t seed);
  std::size_t classes() const { return c.classes; }
  std::size_t data_dim() const { return g.data_dim; }
};

// FNV-1a over the bit patterns of every parameter.
std::uint64_t parameter_hash(const Mlp& m);

struct Checkpoint {
  TripleModel model;
  std::string config_hash;
  std::string dataset_hash;
};

inline constexpr int kCheckpointVersion = 1;

// Single JSON document; doubles survive a round trip bit-exactly.
std::string checkpoint_to_json(const Checkpoint& ckpt);
Checkpoint checkpoint_from_json(const std::string& text);

}  // namespace triplegan::nn
