#pragma once

// Alternating minibatch training of the three players, with Adam, pseudo
// labels as extra discriminator positives, the unlabeled-data regularizers
// and a delayed pseudo discriminative loss.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "triplegan/autodiff.hpp"
#include "triplegan/data.hpp"
#include "triplegan/losses.hpp"
#include "triplegan/models.hpp"

namespace triplegan::train {

enum class UnlabeledReg : std::uint8_t { None, Confidence, Consistency };
enum class AdvEstimator : std::uint8_t { MostProbable, ReinforceSample, ExactEnum };
// Triple: the full three-player game. TwoPlayer: conditional GAN without a
// classifier (D sees only real and generated pairs, unit weights).
// SupervisedOnly: C trained on the labeled cross-entropy alone.
enum class GameMode : std::uint8_t { Triple, TwoPlayer, SupervisedOnly };

struct TrainConfig {
  double alpha = 0.5;
  double alpha_p = 0.03;
  double alpha_b = 0.01;
  double lr = 3e-4;
  double adam_beta1 = 0.5;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t m_d = 32;
  std::size_t m_c = 32;
  std::size_t m_g = 32;
  std::size_t m_u = 32;
  int epochs = 40;
  int rp_activation_epoch = 4;
  // 0 means one pass over the training inputs per epoch.
  std::size_t iters_per_epoch = 0;
  double pseudo_label_fraction = 0.5;
  UnlabeledReg unlabeled_reg = UnlabeledReg::Confidence;
  double consistency_sigma = 0.1;
  AdvEstimator c_adv_estimator = AdvEstimator::MostProbable;
  GameMode mode = GameMode::Triple;
  nn::LatentSpec latent;
  nn::ArchitectureSpec arch;
  std::size_t eval_samples = 1000;
  std::uint64_t seed = 0;

  void validate() const;
  loss::LossWeights weights() const { return {alpha, alpha_p, alpha_b}; }
};

std::string to_string(UnlabeledReg v);
std::string to_string(AdvEstimator v);
std::string to_string(GameMode v);
UnlabeledReg unlabeled_reg_from(std::string_view s);
AdvEstimator adv_estimator_from(std::string_view s);
GameMode game_mode_from(std::string_view s);

// --- Adam ------------------------------------------------------------------

struct AdamHyper {
  double lr = 3e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::int64_t t = 0;
};

// One bias-corrected Adam step on every parameter, using each tensor's grad
// buffer. Throws NumericalError naming `owner` and the parameter index if a
// gradient is not finite; nothing is modified in that case.
void adam_update(std::span<ad::Tensor* const> params, AdamState& state, const AdamHyper& hp,
                 std::string_view owner = "params");

struct OptimizerStates {
  AdamState c;
  AdamState g;
  AdamState d;
};

// --- one step --------------------------------------------------------------

struct StepBatches {
  ad::Tensor x_labeled;  // [m_d, dim]
  std::vector<std::size_t> y_labeled;
  ad::Tensor x_unlabeled;  // [m_c, dim], the classifier's pairs
  ad::Tensor x_extra;      // [m_u, dim], pseudo-labeled positives and R_U
  std::vector<std::size_t> y_gen;  // [m_g]
  ad::Tensor z;                    // [m_g, latent]
};

// Everything the discriminator sees in one update.
struct DiscriminatorBatch {
  ad::Tensor x_real;
  ad::Tensor y_real;
  ad::Tensor x_c;
  ad::Tensor y_c;
  ad::Tensor x_g;
  ad::Tensor y_g;
  bool has_classifier_pairs = true;
};

struct StepLosses {
  double loss_d = 0.0;  // negated discriminator objective
  double loss_c = 0.0;
  double loss_g = 0.0;
};

DiscriminatorBatch prepare_discriminator_batch(const nn::TripleModel& model, const StepBatches& b,
                                               const TrainConfig& cfg);
// Value of the objective D ascends (for TwoPlayer: mean log D + mean log(1 − D)).
double discriminator_objective_value(const nn::TripleModel& model, const DiscriminatorBatch& batch,
                                     const TrainConfig& cfg);

double update_discriminator(nn::TripleModel& model, const DiscriminatorBatch& batch, const TrainConfig& cfg,
                            AdamState& state);
// `epoch` gates the pseudo discriminative loss; `rng` drives REINFORCE
// sampling and consistency noise.
double update_classifier(nn::TripleModel& model, const StepBatches& b, const TrainConfig& cfg, int epoch,
                         AdamState& state, std::mt19937_64& rng);
double update_generator(nn::TripleModel& model, const StepBatches& b, const TrainConfig& cfg, AdamState& state);

// D, then C, then G, one update each.
StepLosses train_step(nn::TripleModel& model, const StepBatches& batches, const TrainConfig& cfg,
                      OptimizerStates& states, int epoch, std::mt19937_64& rng);

// --- evaluation and runs ---------------------------------------------------

struct MetricsRecord {
  int epoch = 0;
  double loss_d = 0.0;
  double loss_c = 0.0;
  double loss_g = 0.0;
  double labeled_error = 0.0;
  double test_error = 0.0;
  double cond_fidelity = 0.0;
  double est_jsd = 0.0;

  bool finite() const;
};

inline constexpr std::size_t kHistogramBins = 32;

// Histogram JSD (nats) over the first two coordinates, bins spanning the
// bounding box of `real`; points outside fall into the edge bins.
double histogram_jsd(std::span<const double> real, std::span<const double> generated, std::size_t dim,
                     std::size_t bins = kHistogramBins);

double classification_error(const nn::ClassifierNet& c, const data::Dataset& ds,
                            std::span<const std::size_t> rows);

// Fraction of generated samples (balanced over classes) that the oracle
// assigns to their conditioning class.
double conditional_fidelity(const nn::GeneratorNet& g, const data::Oracle& oracle, std::size_t samples,
                            std::mt19937_64& rng);

MetricsRecord evaluate(const nn::TripleModel& model, const data::Dataset& ds, std::size_t eval_samples,
                       std::uint64_t seed);

// G(y, (1 − t)·z0 + t·z1) for t = i / (steps − 1); returns [steps, dim].
ad::Tensor interpolate_latent(const nn::GeneratorNet& g, std::size_t y, std::span<const double> z0,
                              std::span<const double> z1, std::size_t steps);

struct RunOptions {
  std::filesystem::path out_dir;  // empty: keep everything in memory
  int checkpoint_every = 10;      // 0 disables periodic checkpoints
  std::string config_hash;
  std::string dataset_hash;
  std::function<void(const MetricsRecord&)> on_epoch;
};

struct TrainResult {
  nn::TripleModel model;
  std::vector<MetricsRecord> history;
};

class TrainingAborted : public std::runtime_error {
 public:
  TrainingAborted(const std::string& what, std::vector<MetricsRecord> history)
      : std::runtime_error(what), history_(std::move(history)) {}
  const std::vector<MetricsRecord>& history() const { return history_; }

 private:
  std::vector<MetricsRecord> history_;
};

TrainResult run_training(const TrainConfig& cfg, const data::Dataset& ds, const RunOptions& opts = {});

// CSV contract: epoch,loss_d,loss_c,loss_g,labeled_error,test_error,cond_fidelity,est_jsd
std::string metrics_csv_header();
std::string metrics_csv_row(const MetricsRecord& r);
std::string metrics_to_json(const MetricsRecord& r);
MetricsRecord metrics_from_json(const std::string& text);

}  // namespace triplegan::train
