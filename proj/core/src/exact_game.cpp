#include "triplegan/exact_game.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "triplegan/error.hpp"

namespace triplegan::game {

namespace {

const double kLog4 = std::log(4.0);

void require_same_shape(const JointTable& a, const JointTable& b, const char* op) {
  if (a.nx() != b.nx() || a.ny() != b.ny()) {
    throw DimensionError(std::string(op) + ": table shapes differ (" + std::to_string(a.nx()) + "x" +
                         std::to_string(a.ny()) + " vs " + std::to_string(b.nx()) + "x" + std::to_string(b.ny()) +
                         ")");
  }
}

// 0·log(0/q) = 0; p > 0 with q = 0 diverges.
double kl_sum(const double* p, const double* q, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (p[i] <= 0.0) continue;
    if (q[i] <= 0.0) return kInfinity;
    s += p[i] * std::log(p[i] / q[i]);
  }
  return s;
}

}  // namespace

// --- types -----------------------------------------------------------------

JointTable::JointTable(std::size_t nx, std::size_t ny, std::vector<double> p) : nx_(nx), ny_(ny), p_(std::move(p)) {
  if (nx == 0 || ny == 0) throw ValidationError("joint table needs nx >= 1 and ny >= 1");
  if (p_.size() != nx * ny) {
    throw ValidationError("joint table " + std::to_string(nx) + "x" + std::to_string(ny) + " given " +
                          std::to_string(p_.size()) + " entries");
  }
  double total = 0.0;
  for (double v : p_) {
    if (!std::isfinite(v) || v < 0.0) throw ValidationError("joint table entries must be finite and non-negative");
    total += v;
  }
  if (std::abs(total - 1.0) > kTableSumTol) {
    std::ostringstream os;
    os.precision(17);
    os << "joint table must sum to 1, sums to " << total;
    throw ValidationError(os.str());
  }
}

JointTable JointTable::uniform(std::size_t nx, std::size_t ny) {
  return JointTable(nx, ny, std::vector<double>(nx * ny, 1.0 / static_cast<double>(nx * ny)));
}

JointTable JointTable::delta(std::size_t nx, std::size_t ny, std::size_t x, std::size_t y) {
  std::vector<double> p(nx * ny, 0.0);
  p.at(x * ny + y) = 1.0;
  return JointTable(nx, ny, std::move(p));
}

JointTable JointTable::from_x_conditional(const std::vector<double>& px, const std::vector<double>& conditional) {
  std::size_t nx = px.size();
  if (nx == 0 || conditional.size() % nx != 0) throw DimensionError("from_x_conditional: shape mismatch");
  std::size_t ny = conditional.size() / nx;
  std::vector<double> p(nx * ny);
  for (std::size_t x = 0; x < nx; ++x)
    for (std::size_t y = 0; y < ny; ++y) p[x * ny + y] = px[x] * conditional[x * ny + y];
  return JointTable(nx, ny, std::move(p));
}

JointTable JointTable::from_y_conditional(const std::vector<double>& py, const std::vector<double>& conditional) {
  std::size_t ny = py.size();
  if (ny == 0 || conditional.size() % ny != 0) throw DimensionError("from_y_conditional: shape mismatch");
  std::size_t nx = conditional.size() / ny;
  std::vector<double> p(nx * ny);
  for (std::size_t x = 0; x < nx; ++x)
    for (std::size_t y = 0; y < ny; ++y) p[x * ny + y] = py[y] * conditional[y * nx + x];
  return JointTable(nx, ny, std::move(p));
}

DiscriminatorTable::DiscriminatorTable(std::size_t nx, std::size_t ny, std::vector<double> d)
    : nx_(nx), ny_(ny), d_(std::move(d)) {
  if (d_.size() != nx * ny) throw DimensionError("discriminator table size mismatch");
  for (auto& v : d_) {
    if (!std::isfinite(v)) throw ValidationError("discriminator entries must be finite");
    v = std::clamp(v, kDiscriminatorEps, 1.0 - kDiscriminatorEps);
  }
}

Alpha::Alpha(double value) : value_(value) {
  if (!(value > 0.0 && value < 1.0)) throw ContractError("alpha must lie strictly inside (0, 1)");
}

// --- operations ------------------------------------------------------------

JointTable mixture(const JointTable& pg, const JointTable& pc, Alpha a) {
  require_same_shape(pg, pc, "mixture");
  const double w = a.value();
  std::vector<double> out(pg.values().size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (1.0 - w) * pg.values()[i] + w * pc.values()[i];
  return JointTable(pg.nx(), pg.ny(), std::move(out));
}

DiscriminatorTable optimal_discriminator(const JointTable& p, const JointTable& p_alpha) {
  require_same_shape(p, p_alpha, "optimal_discriminator");
  std::vector<double> d(p.values().size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    double num = p.values()[i];
    double den = num + p_alpha.values()[i];
    d[i] = den > 0.0 ? num / den : 0.5;
  }
  return DiscriminatorTable(p.nx(), p.ny(), std::move(d));
}

double utility_U(const JointTable& p, const JointTable& pc, const JointTable& pg, Alpha a,
                 const DiscriminatorTable& d) {
  require_same_shape(p, pc, "utility_U");
  require_same_shape(p, pg, "utility_U");
  if (d.nx() != p.nx() || d.ny() != p.ny()) throw DimensionError("utility_U: discriminator shape mismatch");
  const double w = a.value();
  double real = 0.0, from_c = 0.0, from_g = 0.0;
  for (std::size_t i = 0; i < p.values().size(); ++i) {
    double di = d.values()[i];
    if (p.values()[i] > 0.0) real += p.values()[i] * std::log(di);
    if (pc.values()[i] > 0.0) from_c += pc.values()[i] * std::log1p(-di);
    if (pg.values()[i] > 0.0) from_g += pg.values()[i] * std::log1p(-di);
  }
  return real + w * from_c + (1.0 - w) * from_g;
}

double kl(const std::vector<double>& p, const std::vector<double>& q) {
  if (p.size() != q.size()) throw DimensionError("kl: length mismatch");
  return kl_sum(p.data(), q.data(), p.size());
}

double kl(const JointTable& p, const JointTable& q) {
  require_same_shape(p, q, "kl");
  return kl(p.values(), q.values());
}

double jsd(const JointTable& p, const JointTable& q) {
  require_same_shape(p, q, "jsd");
  const auto& a = p.values();
  const auto& b = q.values();
  std::vector<double> m(a.size());
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = 0.5 * (a[i] + b[i]);
  return 0.5 * kl(a, m) + 0.5 * kl(b, m);
}

double conditional_entropy_y_given_x(const JointTable& p) {
  auto px = marginals(p).x;
  double h = 0.0;
  for (std::size_t x = 0; x < p.nx(); ++x) {
    for (std::size_t y = 0; y < p.ny(); ++y) {
      double v = p(x, y);
      if (v > 0.0) h -= v * std::log(v / px[x]);
    }
  }
  return h;
}

double value_V(const JointTable& p, const JointTable& pc, const JointTable& pg, Alpha a) {
  JointTable p_alpha = mixture(pg, pc, a);
  double via_discriminator = utility_U(p, pc, pg, a, optimal_discriminator(p, p_alpha));
  double via_divergence = -kLog4 + 2.0 * jsd(p, p_alpha);
  if (!(std::abs(via_discriminator - via_divergence) < kIdentityTol)) {
    std::ostringstream os;
    os.precision(17);
    os << "value identity violated: U(D*) = " << via_discriminator << ", -log4 + 2 JSD = " << via_divergence;
    throw ConsistencyError(os.str());
  }
  return via_discriminator;
}

Marginals marginals(const JointTable& p) {
  Marginals m{std::vector<double>(p.nx(), 0.0), std::vector<double>(p.ny(), 0.0)};
  for (std::size_t x = 0; x < p.nx(); ++x) {
    for (std::size_t y = 0; y < p.ny(); ++y) {
      m.x[x] += p(x, y);
      m.y[y] += p(x, y);
    }
  }
  return m;
}

PseudoLossIdentity pseudo_loss_identity_check(const JointTable& pg, const JointTable& pc, const JointTable& p) {
  require_same_shape(pg, pc, "pseudo_loss_identity_check");
  require_same_shape(pg, p, "pseudo_loss_identity_check");
  Marginals mp = marginals(p);
  Marginals mc = marginals(pc);
  Marginals mg = marginals(pg);
  if (max_abs_diff(mp.x, mc.x) > kTableSumTol) {
    throw ContractError("pseudo-loss identity needs pc(x) = p(x)");
  }

  // Left side straight from the cross-entropy definition.
  double lhs = 0.0;
  for (std::size_t x = 0; x < pg.nx() && std::isfinite(lhs); ++x) {
    for (std::size_t y = 0; y < pg.ny(); ++y) {
      double w = pg(x, y);
      if (w <= 0.0) continue;
      double joint = pc(x, y);
      if (joint <= 0.0) {
        lhs = kInfinity;
        break;
      }
      lhs -= w * std::log(joint / mc.x[x]);
    }
  }

  double rhs;
  double kl_joint = kl(pg, pc);
  if (!std::isfinite(kl_joint)) {
    rhs = kInfinity;
  } else {
    rhs = kl_joint + conditional_entropy_y_given_x(pg) - kl(mg.x, mp.x);
  }

  double residual;
  if (std::isinf(lhs) && std::isinf(rhs)) {
    residual = 0.0;
  } else if (std::isinf(lhs) || std::isinf(rhs)) {
    residual = kInfinity;
  } else {
    residual = std::abs(lhs - rhs);
  }
  return {lhs, rhs, residual};
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw DimensionError("max_abs_diff: length mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

double max_abs_diff(const JointTable& a, const JointTable& b) {
  require_same_shape(a, b, "max_abs_diff");
  return max_abs_diff(a.values(), b.values());
}

bool equilibrium_check(const JointTable& p, const JointTable& pc, const JointTable& pg, Alpha a) {
  double v = value_V(p, pc, pg, a);
  bool at_equilibrium = v <= -kLog4 + kIdentityTol && kl(p, pc) <= kIdentityTol;
  if (at_equilibrium) {
    double dc = max_abs_diff(p, pc);
    double dg = max_abs_diff(p, pg);
    if (!(dc < kRecoveryTol && dg < kRecoveryTol)) {
      std::ostringstream os;
      os << "equilibrium accepted but distributions not recovered: |p-pc| = " << dc << ", |p-pg| = " << dg;
      throw ConsistencyError(os.str());
    }
  }
  return at_equilibrium;
}

bool regularized_equilibrium_check(const JointTable& p, const JointTable& pc, const JointTable& pg, Alpha a,
                                   double lambda) {
  if (!(lambda >= 0.0)) throw ContractError("regularization weight must be non-negative");
  double objective = value_V(p, pc, pg, a) + kl(p, pc) + lambda * kl(pg, pc);
  return objective <= -kLog4 + kIdentityTol;
}

// --- random instances ------------------------------------------------------

namespace {

std::vector<double> random_simplex(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  std::vector<double> v(n);
  for (auto& e : v) e = u(rng);
  double s = std::accumulate(v.begin(), v.end(), 0.0);
  for (auto& e : v) e /= s;
  return v;
}

// nblocks independent simplices of length n, concatenated.
std::vector<double> random_conditionals(std::size_t nblocks, std::size_t n, std::mt19937_64& rng) {
  std::vector<double> out;
  out.reserve(nblocks * n);
  for (std::size_t b = 0; b < nblocks; ++b) {
    auto s = random_simplex(n, rng);
    out.insert(out.end(), s.begin(), s.end());
  }
  return out;
}

}  // namespace

GameInstance random_instance(std::size_t nx, std::size_t ny, std::mt19937_64& rng) {
  JointTable p(nx, ny, random_simplex(nx * ny, rng));
  Marginals m = marginals(p);
  JointTable pc = JointTable::from_x_conditional(m.x, random_conditionals(nx, ny, rng));
  JointTable pg = JointTable::from_y_conditional(m.y, random_conditionals(ny, nx, rng));
  return {std::move(p), std::move(pc), std::move(pg)};
}

GameInstance balanced_instance(std::size_t nx, std::size_t ny, Alpha a, std::mt19937_64& rng) {
  if (nx < 2 || ny < 2) throw ContractError("balanced_instance needs at least a 2x2 table");
  auto base = random_simplex(nx * ny, rng);
  double floor = *std::min_element(base.begin(), base.end());
  constexpr int kMoves = 4;
  std::vector<double> delta(nx * ny, 0.0);
  std::uniform_int_distribution<std::size_t> pick_x(0, nx - 1), pick_y(0, ny - 1);
  std::uniform_real_distribution<double> mag(0.5, 1.0);
  for (int t = 0; t < kMoves; ++t) {
    std::size_t i = pick_x(rng), j = pick_x(rng), k = pick_y(rng), l = pick_y(rng);
    if (i == j) j = (i + 1) % nx;
    if (k == l) l = (k + 1) % ny;
    double eps = mag(rng) * floor / (2.0 * kMoves);
    delta[i * ny + k] += eps;
    delta[i * ny + l] -= eps;
    delta[j * ny + k] -= eps;
    delta[j * ny + l] += eps;
  }
  const double w = a.value();
  std::vector<double> pc(base.size()), pg(base.size());
  for (std::size_t c = 0; c < base.size(); ++c) {
    pc[c] = base[c] + (1.0 - w) * delta[c];
    pg[c] = base[c] - w * delta[c];
  }
  return {JointTable(nx, ny, base), JointTable(nx, ny, std::move(pc)), JointTable(nx, ny, std::move(pg))};
}

// --- verification suite ----------------------------------------------------

namespace {

struct Tracker {
  CheckResult result;
  explicit Tracker(std::string name, double tol) {
    result.name = std::move(name);
    result.tolerance = tol;
    result.passed = true;
  }
  void fail(const std::string& why) {
    if (result.passed) result.detail = why;
    result.passed = false;
  }
};

// Worst U(D*) − U(D') over random perturbations; negative means D* was beaten.
double maximality_margin(const GameInstance& inst, Alpha a, const SuiteOptions& opts, std::mt19937_64& rng) {
  JointTable p_alpha = mixture(inst.pg, inst.pc, a);
  DiscriminatorTable best = optimal_discriminator(inst.p, p_alpha);
  double u_best = utility_U(inst.p, inst.pc, inst.pg, a, best);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double worst = kInfinity;
  for (std::size_t t = 0; t < opts.perturbations; ++t) {
    std::vector<double> d = best.values();
    for (auto& v : d) v += opts.perturbation * u(rng);
    double margin = u_best - utility_U(inst.p, inst.pc, inst.pg, a, DiscriminatorTable(inst.p.nx(), inst.p.ny(), d));
    worst = std::min(worst, margin);
  }
  return worst;
}

double marginal_disagreement(const GameInstance& inst) {
  Marginals mp = marginals(inst.p), mc = marginals(inst.pc), mg = marginals(inst.pg);
  return std::max({max_abs_diff(mp.x, mc.x), max_abs_diff(mp.x, mg.x), max_abs_diff(mp.y, mc.y),
                   max_abs_diff(mp.y, mg.y)});
}

// Constructed cases for the equilibrium characterization: one true
// equilibrium and four kinds of non-equilibria.
std::vector<GameInstance> equilibrium_cases(const GameInstance& random, const GameInstance& balanced) {
  std::vector<GameInstance> cases;
  cases.push_back({random.p, random.p, random.p});
  cases.push_back(balanced);
  cases.push_back({random.p, random.p, random.pg});
  cases.push_back({random.p, random.pc, random.p});
  cases.push_back(random);
  return cases;
}

void check_equilibrium_case(const GameInstance& c, Alpha a, Tracker& thm, Tracker& reg) {
  bool recovered = max_abs_diff(c.p, c.pc) < kRecoveryTol && max_abs_diff(c.p, c.pg) < kRecoveryTol;
  bool accepted = false;
  try {
    accepted = equilibrium_check(c.p, c.pc, c.pg, a);
  } catch (const ConsistencyError& e) {
    thm.fail(e.what());
    return;
  }
  ++thm.result.cases;
  if (accepted != recovered) thm.fail(accepted ? "accepted a non-equilibrium" : "rejected p = pc = pg");
  for (double lambda : {0.1, 1.0, 10.0}) {
    ++reg.result.cases;
    if (regularized_equilibrium_check(c.p, c.pc, c.pg, a, lambda) != accepted) {
      reg.fail("lambda = " + std::to_string(lambda) + " changed the accepted set");
    }
  }
}

}  // namespace

std::vector<CheckResult> run_identity_suite(const SuiteOptions& opts) {
  Alpha a(opts.alpha);
  std::mt19937_64 rng(opts.seed);

  Tracker lemma31("optimal discriminator maximality", 1e-9);
  Tracker identity("value identity V = -log4 + 2 JSD", kIdentityTol);
  Tracker strict("value strictly above -log4 off p = p_alpha", 1e-8);
  Tracker cor31("matching marginals at p = p_alpha", kIdentityTol);
  Tracker thm32("equilibrium iff p = pc = pg", kRecoveryTol);
  Tracker cor33("regularizer leaves equilibrium unchanged", kIdentityTol);
  Tracker pseudo("pseudo discriminative loss identity", kIdentityTol);
  lemma31.result.worst = kInfinity;

  for (std::size_t n = 0; n < opts.instances; ++n) {
    GameInstance inst = random_instance(opts.nx, opts.ny, rng);
    GameInstance bal = balanced_instance(opts.nx, opts.ny, a, rng);

    double margin = maximality_margin(inst, a, opts, rng);
    lemma31.result.worst = std::min(lemma31.result.worst, margin);
    ++lemma31.result.cases;
    if (margin < -1e-9) lemma31.fail("perturbed discriminator beat D*");

    for (const GameInstance* g : {&inst, &bal}) {
      JointTable p_alpha = mixture(g->pg, g->pc, a);
      double route_a = utility_U(g->p, g->pc, g->pg, a, optimal_discriminator(g->p, p_alpha));
      double route_b = -kLog4 + 2.0 * jsd(g->p, p_alpha);
      double res = std::abs(route_a - route_b);
      identity.result.worst = std::max(identity.result.worst, res);
      ++identity.result.cases;
      if (!(res < kIdentityTol)) identity.fail("U(D*) and -log4 + 2 JSD disagree");

      double gap = max_abs_diff(g->p, p_alpha);
      if (gap > 1e-3) {
        ++strict.result.cases;
        double excess = route_a + kLog4;
        if (!(excess > 1e-8)) strict.fail("V not above -log4 although p != p_alpha");
      } else if (gap < 1e-12) {
        ++strict.result.cases;
        double excess = std::abs(route_a + kLog4);
        strict.result.worst = std::max(strict.result.worst, excess);
        if (!(excess < kIdentityTol)) strict.fail("V != -log4 at p = p_alpha");
      }
    }

    double gap = max_abs_diff(bal.p, mixture(bal.pg, bal.pc, a));
    if (gap < 1e-12) {
      double dis = marginal_disagreement(bal);
      cor31.result.worst = std::max(cor31.result.worst, dis);
      ++cor31.result.cases;
      if (!(dis < kIdentityTol)) cor31.fail("marginals differ at p = p_alpha");
    } else {
      cor31.fail("balanced construction drifted from p = p_alpha");
    }

    for (const auto& c : equilibrium_cases(inst, bal)) check_equilibrium_case(c, a, thm32, cor33);

    auto id = pseudo_loss_identity_check(inst.pg, inst.pc, inst.p);
    pseudo.result.worst = std::max(pseudo.result.worst, id.residual);
    ++pseudo.result.cases;
    if (!(id.residual < kIdentityTol)) pseudo.fail("cross-entropy and KL decomposition disagree");
  }
  if (opts.instances == 0) lemma31.result.worst = 0.0;
  if (lemma31.result.passed) lemma31.result.detail = "worst is the smallest margin, must stay above -tol";
  return {lemma31.result, identity.result, strict.result, cor31.result, thm32.result, cor33.result, pseudo.result};
}

std::vector<CheckResult> check_tables(const JointTable& p, const JointTable& pc, const JointTable& pg, Alpha a,
                                      const SuiteOptions& opts) {
  require_same_shape(p, pc, "check_tables");
  require_same_shape(p, pg, "check_tables");
  std::mt19937_64 rng(opts.seed);
  GameInstance inst{p, pc, pg};
  JointTable p_alpha = mixture(pg, pc, a);

  Tracker lemma31("optimal discriminator maximality", 1e-9);
  double margin = maximality_margin(inst, a, opts, rng);
  lemma31.result.worst = margin;
  lemma31.result.cases = 1;
  if (margin < -1e-9) lemma31.fail("perturbed discriminator beat D*");
  if (lemma31.result.passed) lemma31.result.detail = "worst is the smallest margin, must stay above -tol";

  Tracker identity("value identity V = -log4 + 2 JSD", kIdentityTol);
  double route_a = utility_U(p, pc, pg, a, optimal_discriminator(p, p_alpha));
  double route_b = -kLog4 + 2.0 * jsd(p, p_alpha);
  identity.result.worst = std::abs(route_a - route_b);
  identity.result.cases = 1;
  if (!(identity.result.worst < kIdentityTol)) identity.fail("U(D*) and -log4 + 2 JSD disagree");

  Tracker strict("value strictly above -log4 off p = p_alpha", 1e-8);
  double gap = max_abs_diff(p, p_alpha);
  if (gap > 1e-3) {
    strict.result.cases = 1;
    if (!(route_a + kLog4 > 1e-8)) strict.fail("V not above -log4 although p != p_alpha");
  } else {
    strict.result.detail = "not applicable: |p - p_alpha| <= 1e-3";
  }

  Tracker cor31("matching marginals at p = p_alpha", kIdentityTol);
  if (gap < 1e-12) {
    cor31.result.cases = 1;
    cor31.result.worst = marginal_disagreement(inst);
    if (!(cor31.result.worst < kIdentityTol)) cor31.fail("marginals differ at p = p_alpha");
  } else {
    cor31.result.detail = "not applicable: p != p_alpha";
  }

  Tracker thm32("equilibrium iff p = pc = pg", kRecoveryTol);
  Tracker cor33("regularizer leaves equilibrium unchanged", kIdentityTol);
  check_equilibrium_case(inst, a, thm32, cor33);

  Tracker pseudo("pseudo discriminative loss identity", kIdentityTol);
  if (max_abs_diff(marginals(p).x, marginals(pc).x) <= kTableSumTol) {
    auto id = pseudo_loss_identity_check(pg, pc, p);
    pseudo.result.cases = 1;
    pseudo.result.worst = id.residual;
    if (!(id.residual < kIdentityTol)) pseudo.fail("cross-entropy and KL decomposition disagree");
  } else {
    pseudo.result.detail = "not applicable: pc(x) != p(x)";
  }
  return {lemma31.result, identity.result, strict.result, cor31.result, thm32.result, cor33.result, pseudo.result};
}

// --- serialization ---------------------------------------------------------

std::string table_to_json(const JointTable& t) {
  nlohmann::json j;
  j["nx"] = t.nx();
  j["ny"] = t.ny();
  j["p"] = t.values();
  return j.dump();
}

JointTable table_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("table is not valid JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("nx") || !j.contains("ny") || !j.contains("p")) {
    throw ValidationError("table JSON needs keys nx, ny, p");
  }
  for (const auto& [key, _] : j.items()) {
    if (key != "nx" && key != "ny" && key != "p") throw ValidationError("unknown table key '" + key + "'");
  }
  if (!j["nx"].is_number_unsigned() || !j["ny"].is_number_unsigned() || !j["p"].is_array()) {
    throw ValidationError("table JSON: nx, ny must be positive integers and p an array");
  }
  std::vector<double> p;
  for (const auto& v : j["p"]) {
    if (!v.is_number()) throw ValidationError("table JSON: p must hold numbers");
    p.push_back(v.get<double>());
  }
  return JointTable(j["nx"].get<std::size_t>(), j["ny"].get<std::size_t>(), std::move(p));
}

}  // namespace triplegan::game
