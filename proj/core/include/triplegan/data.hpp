#pragma once

// Synthetic labeled datasets with closed-form Bayes oracles, class-balanced
// semi-supervised splits, minibatch iteration and the .tgds file format.

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "triplegan/autodiff.hpp"

namespace triplegan::data {

enum class Split : std::uint8_t { Train, Test };
enum class DatasetKind : std::uint8_t { Mixture, Rings };

struct GeneratorParams {
  DatasetKind kind = DatasetKind::Mixture;
  std::size_t classes = 3;
  std::size_t n_per_class = 1000;  // training rows per class
  std::size_t n_test_per_class = 0;
  double radius = 2.0;              // mixture: circle carrying the class means
  std::vector<double> radii;        // rings: one radius per class, increasing
  double sigma = 0.3;
  std::size_t dim = 2;
  std::uint64_t seed = 0;
};

// Isotropic Gaussian classes with a shared scale.
struct MixtureOracle {
  std::size_t classes = 0;
  std::size_t dim = 0;
  std::vector<double> means;  // [classes, dim]
  double sigma = 1.0;
  std::vector<double> priors;
};

// Concentric rings; the likelihood is a Gaussian in the radial distance.
struct RingOracle {
  std::vector<double> radii;
  double sigma = 1.0;
};

class Oracle {
 public:
  Oracle() = default;
  explicit Oracle(MixtureOracle m);
  explicit Oracle(RingOracle r);

  std::size_t classes() const;
  std::vector<double> posterior(std::span<const double> x) const;
  std::size_t predict(std::span<const double> x) const;
  const std::variant<MixtureOracle, RingOracle>& params() const { return params_; }

 private:
  std::variant<MixtureOracle, RingOracle> params_;
};

struct Dataset {
  std::size_t dim = 0;
  std::size_t classes = 0;
  std::vector<double> x;  // [n, dim], every entry in (−1, 1)
  std::vector<std::size_t> y;
  std::vector<std::uint8_t> labeled;
  std::vector<Split> split;
  GeneratorParams params;
  Oracle oracle;

  std::size_t size() const { return y.size(); }
  std::span<const double> row(std::size_t i) const { return {x.data() + i * dim, dim}; }

  std::vector<std::size_t> train_indices() const;
  std::vector<std::size_t> test_indices() const;
  std::vector<std::size_t> labeled_indices() const;
  std::vector<std::size_t> unlabeled_indices() const;

  // Every class has at least one labeled training row and |x| < 1.
  void validate() const;
};

Dataset make_gaussian_mixture(const GeneratorParams& params);
Dataset make_rings(const GeneratorParams& params);
Dataset make_dataset(const GeneratorParams& params);

// Marks exactly n_labeled / K training rows of each class as labeled.
Dataset ssl_split(const Dataset& ds, std::size_t n_labeled, std::uint64_t seed);

double oracle_accuracy(const Dataset& ds, Split split);

enum class Source : std::uint8_t { Labeled, Unlabeled, All };

class BatchIterator {
 public:
  BatchIterator(const Dataset& ds, std::size_t batch_size, Source source, std::uint64_t seed);

  // One shuffled pass; the last batch may be short.
  std::vector<std::vector<std::size_t>> epoch();
  // Endless stream of full batches, reshuffling whenever the pool runs out.
  std::vector<std::size_t> next();
  std::size_t batches_per_epoch() const;
  std::size_t pool_size() const { return pool_.size(); }

 private:
  std::vector<std::size_t> pool_;
  std::size_t batch_size_;
  std::mt19937_64 rng_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
};

ad::Tensor gather_rows(const Dataset& ds, std::span<const std::size_t> indices);
std::vector<std::size_t> gather_labels(const Dataset& ds, std::span<const std::size_t> indices);

// .tgds: one JSON header line, then a CSV body
// x0,...,x{d-1},label,labeled,split
std::string to_tgds(const Dataset& ds);
Dataset from_tgds(std::string_view text);
void write_tgds(const std::string& path, const Dataset& ds);
Dataset read_tgds(const std::string& path);

std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t v);
std::string dataset_fingerprint(const Dataset& ds);

std::string kind_name(DatasetKind kind);
DatasetKind kind_from_name(const std::string& name);

}  // namespace triplegan::data
