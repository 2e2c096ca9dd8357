#pragma once

// Exact three-player game over finite joint distributions p(x, y).
//
// Every expectation becomes a finite sum over an nx-by-K table, so the
// optimal-discriminator, value-function and equilibrium statements about the
// game can be checked to round-off. All logarithms are natural (nats).

#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace triplegan::game {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();
inline constexpr double kDiscriminatorEps = 1e-12;
inline constexpr double kIdentityTol = 1e-10;
inline constexpr double kRecoveryTol = 1e-8;
inline constexpr double kTableSumTol = 1e-12;

// Non-negative nx-by-ny table summing to one.
class JointTable {
 public:
  JointTable(std::size_t nx, std::size_t ny, std::vector<double> p);
  static JointTable uniform(std::size_t nx, std::size_t ny);
  static JointTable delta(std::size_t nx, std::size_t ny, std::size_t x, std::size_t y);
  // Builds p(x)·q(y|x); `conditional` holds nx rows of ny probabilities.
  static JointTable from_x_conditional(const std::vector<double>& px, const std::vector<double>& conditional);
  // Builds p(y)·q(x|y); `conditional` holds ny columns of nx probabilities,
  // stored column-major (conditional[y * nx + x]).
  static JointTable from_y_conditional(const std::vector<double>& py, const std::vector<double>& conditional);

  std::size_t nx() const { return nx_; }
  std::size_t ny() const { return ny_; }
  double operator()(std::size_t x, std::size_t y) const { return p_[x * ny_ + y]; }
  const std::vector<double>& values() const { return p_; }

 private:
  std::size_t nx_;
  std::size_t ny_;
  std::vector<double> p_;
};

class DiscriminatorTable {
 public:
  // Entries are clamped into [eps, 1 − eps].
  DiscriminatorTable(std::size_t nx, std::size_t ny, std::vector<double> d);

  std::size_t nx() const { return nx_; }
  std::size_t ny() const { return ny_; }
  double operator()(std::size_t x, std::size_t y) const { return d_[x * ny_ + y]; }
  const std::vector<double>& values() const { return d_; }

 private:
  std::size_t nx_;
  std::size_t ny_;
  std::vector<double> d_;
};

class Alpha {
 public:
  explicit Alpha(double value);
  double value() const { return value_; }

 private:
  double value_;
};

JointTable mixture(const JointTable& pg, const JointTable& pc, Alpha a);
DiscriminatorTable optimal_discriminator(const JointTable& p, const JointTable& p_alpha);

// E_p[log D] + α E_pc[log(1 − D)] + (1 − α) E_pg[log(1 − D)]
double utility_U(const JointTable& p, const JointTable& pc, const JointTable& pg, Alpha a,
                 const DiscriminatorTable& d);

// Returns kInfinity when p is not absolutely continuous w.r.t. q.
double kl(const JointTable& p, const JointTable& q);
double kl(const std::vector<double>& p, const std::vector<double>& q);
double jsd(const JointTable& p, const JointTable& q);
// H_p(y|x) in nats.
double conditional_entropy_y_given_x(const JointTable& p);

// max_D U; cross-checked against −log4 + 2·JSD(p || p_α). Throws
// ConsistencyError if the two routes differ by more than kIdentityTol.
double value_V(const JointTable& p, const JointTable& pc, const JointTable& pg, Alpha a);

struct Marginals {
  std::vector<double> x;
  std::vector<double> y;
};
Marginals marginals(const JointTable& p);

struct PseudoLossIdentity {
  double lhs;  // E_pg[−log pc(y|x)]
  double rhs;  // KL(pg || pc) + H_pg(y|x) − KL(pg(x) || p(x))
  double residual;
};
// Requires pc's x-marginal to match p's within kTableSumTol (ContractError
// otherwise). When both sides are infinite the residual is zero.
PseudoLossIdentity pseudo_loss_identity_check(const JointTable& pg, const JointTable& pc, const JointTable& p);

// True iff V(C, G) ≤ −log4 + 1e-10 and KL(p || pc) ≤ 1e-10. When true, also
// requires p ≈ pc ≈ pg in max-norm and throws ConsistencyError otherwise.
bool equilibrium_check(const JointTable& p, const JointTable& pc, const JointTable& pg, Alpha a);

// Equilibrium of Ũ with an added λ·KL(pg || pc): the regularized objective
// V + KL(p||pc) + λ·KL(pg||pc) sits at its global minimum −log4.
bool regularized_equilibrium_check(const JointTable& p, const JointTable& pc, const JointTable& pg, Alpha a,
                                   double lambda);

double max_abs_diff(const JointTable& a, const JointTable& b);
double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b);

// --- random instances ------------------------------------------------------

struct GameInstance {
  JointTable p;
  JointTable pc;  // p(x)·pc(y|x)
  JointTable pg;  // p(y)·pg(x|y)
};

// Random strictly positive p with structurally valid pc and pg.
GameInstance random_instance(std::size_t nx, std::size_t ny, std::mt19937_64& rng);
// Instance with p = (1 − α)pg + α pc exactly but pc ≠ pg, built by moving
// mass along directions with zero row and column sums.
GameInstance balanced_instance(std::size_t nx, std::size_t ny, Alpha a, std::mt19937_64& rng);

// --- verification suite ----------------------------------------------------

struct CheckResult {
  std::string name;
  bool passed = false;
  double worst = 0.0;      // worst residual or margin observed
  double tolerance = 0.0;  // threshold it was compared against
  std::size_t cases = 0;
  std::string detail;
};

struct SuiteOptions {
  std::size_t instances = 100;
  std::size_t nx = 16;
  std::size_t ny = 4;
  double alpha = 0.5;
  std::size_t perturbations = 100;
  double perturbation = 1e-3;
  std::uint64_t seed = 0;
};

std::vector<CheckResult> run_identity_suite(const SuiteOptions& opts);
// The same checks that apply to a single user-supplied (p, pc, pg) triple.
std::vector<CheckResult> check_tables(const JointTable& p, const JointTable& pc, const JointTable& pg, Alpha a,
                                      const SuiteOptions& opts);

// {"nx": .., "ny": .., "p": [row-major]}
std::string table_to_json(const JointTable& t);
JointTable table_from_json(const std::string& text);

}  // namespace triplegan::game
