#include "cli.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "triplegan/error.hpp"
#include "triplegan/exact_game.hpp"
#include "triplegan/run_config.hpp"

namespace triplegan::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write '" + path.string() + "'");
  out << text;
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// Fields the user may override; set on the command line only when given.
struct TrainFlags {
  std::optional<int> epochs, rp_epoch, checkpoint_every;
  std::optional<std::uint64_t> seed;
  std::optional<double> lr, alpha, alpha_p, alpha_b, pseudo_fraction, consistency_sigma;
  std::optional<std::size_t> batch, iters_per_epoch, eval_samples, latent_dim;
  std::optional<std::string> mode, unlabeled_reg, estimator;
};

struct Commands {
  std::string config_path;

  // dataset
  std::string ds_out;
  std::optional<std::string> ds_kind;
  std::optional<std::size_t> ds_k, ds_n, ds_test, ds_labeled, ds_dim;
  std::optional<std::uint64_t> ds_seed;
  std::optional<double> ds_sigma, ds_radius;
  std::vector<double> ds_radii;

  // train
  std::string tr_data;
  std::optional<std::string> tr_out;
  TrainFlags tf;

  // eval
  std::string ev_checkpoint, ev_data, ev_out;
  std::vector<std::string> ev_aggregate;
  std::uint64_t ev_seed = 0;
  std::size_t ev_samples = 1000;

  // gen
  std::string gn_checkpoint, gn_data, gn_out;
  std::size_t gn_class = 0, gn_count = 100, gn_steps = 20;
  std::uint64_t gn_seed = 0;
  bool gn_interpolate = false;
  std::vector<double> gn_z0, gn_z1;

  // game
  std::size_t gm_instances = 100, gm_nx = 16, gm_ny = 4, gm_perturbations = 100;
  double gm_alpha = 0.5, gm_perturbation = 1e-3;
  std::uint64_t gm_seed = 0;
  std::string gm_p, gm_pc, gm_pg, gm_report;
};

RunConfig load_config(const std::string& path) {
  RunConfig cfg;
  if (!path.empty()) cfg = run_config_from_json(read_file(path), cfg);
  return cfg;
}

bool config_sets(const std::string& path, const char* section, const char* key) {
  if (path.empty()) return false;
  auto j = json::parse(read_file(path));
  return j.contains(section) && j[section].contains(key);
}

// --- dataset ---------------------------------------------------------------

int cmd_dataset(const Commands& c, std::ostream& out) {
  RunConfig cfg = load_config(c.config_path);
  auto& p = cfg.dataset;
  if (c.ds_kind) p.kind = data::kind_from_name(*c.ds_kind);
  if (c.ds_k) p.classes = *c.ds_k;
  if (c.ds_n) p.n_per_class = *c.ds_n;
  if (c.ds_test) p.n_test_per_class = *c.ds_test;
  if (c.ds_dim) p.dim = *c.ds_dim;
  if (c.ds_seed) p.seed = *c.ds_seed;
  if (c.ds_sigma) p.sigma = *c.ds_sigma;
  if (c.ds_radius) p.radius = *c.ds_radius;
  if (!c.ds_radii.empty()) p.radii = c.ds_radii;
  if (c.ds_labeled) cfg.n_labeled = *c.ds_labeled;
  if (cfg.n_labeled == 0 || cfg.n_labeled % p.classes != 0) {
    throw ValidationError("--labeled must be a positive multiple of --k");
  }

  data::Dataset ds = data::ssl_split(data::make_dataset(p), cfg.n_labeled, p.seed);
  data::write_tgds(c.ds_out, ds);
  auto split = ds.test_indices().empty() ? data::Split::Train : data::Split::Test;
  out << "wrote " << c.ds_out << '\n'
      << "n=" << ds.size() << " train=" << ds.train_indices().size() << " test=" << ds.test_indices().size()
      << " K=" << ds.classes << " dim=" << ds.dim << " labeled=" << ds.labeled_indices().size() << '\n'
      << "oracle_accuracy(" << (split == data::Split::Test ? "test" : "train")
      << ")=" << fmt("%.4f", data::oracle_accuracy(ds, split)) << '\n'
      << "hash=" << data::dataset_fingerprint(ds) << '\n';
  return kExitOk;
}

// --- train -----------------------------------------------------------------

json record_json(const train::MetricsRecord& r, const std::string& config, const std::string& dataset) {
  auto j = json::parse(train::metrics_to_json(r));
  j["config_hash"] = config;
  j["dataset_hash"] = dataset;
  return j;
}

int cmd_train(const Commands& c, std::ostream& out, std::ostream& err) {
  RunConfig cfg = load_config(c.config_path);
  auto& t = cfg.train;
  const auto& f = c.tf;
  if (f.epochs) t.epochs = *f.epochs;
  if (f.seed) t.seed = *f.seed;
  if (f.lr) t.lr = *f.lr;
  if (f.alpha) t.alpha = *f.alpha;
  if (f.alpha_p) t.alpha_p = *f.alpha_p;
  if (f.alpha_b) t.alpha_b = *f.alpha_b;
  if (f.pseudo_fraction) t.pseudo_label_fraction = *f.pseudo_fraction;
  if (f.consistency_sigma) t.consistency_sigma = *f.consistency_sigma;
  if (f.batch) t.m_d = t.m_c = t.m_g = t.m_u = *f.batch;
  if (f.iters_per_epoch) t.iters_per_epoch = *f.iters_per_epoch;
  if (f.eval_samples) t.eval_samples = *f.eval_samples;
  if (f.latent_dim) t.latent.dim = *f.latent_dim;
  if (f.mode) t.mode = train::game_mode_from(*f.mode);
  if (f.unlabeled_reg) t.unlabeled_reg = train::unlabeled_reg_from(*f.unlabeled_reg);
  if (f.estimator) t.c_adv_estimator = train::adv_estimator_from(*f.estimator);
  if (f.checkpoint_every) cfg.checkpoint_every = *f.checkpoint_every;
  if (c.tr_out) cfg.out_dir = *c.tr_out;
  // The activation epoch follows the horizon unless someone pinned it.
  if (f.rp_epoch) {
    t.rp_activation_epoch = *f.rp_epoch;
  } else if (!config_sets(c.config_path, "train", "rp_activation_epoch")) {
    t.rp_activation_epoch = t.epochs / 10;
  }

  data::Dataset ds = data::read_tgds(c.tr_data);
  cfg.dataset = ds.params;
  cfg.n_labeled = ds.labeled_indices().size();
  cfg.validate();

  fs::create_directories(cfg.out_dir);
  write_file(fs::path(cfg.out_dir) / "config.json", run_config_to_json(cfg) + "\n");

  train::RunOptions opts;
  opts.out_dir = cfg.out_dir;
  opts.checkpoint_every = cfg.checkpoint_every;
  opts.config_hash = config_hash(cfg);
  opts.dataset_hash = data::dataset_fingerprint(ds);

  train::TrainResult result;
  try {
    result = train::run_training(t, ds, opts);
  } catch (const train::TrainingAborted& e) {
    err << "error: " << e.what() << " (" << e.history().size() << " epochs kept in metrics.csv)\n";
    return kExitNumerical;
  }

  train::MetricsRecord last;
  if (result.history.empty()) {
    last = train::evaluate(result.model, ds, t.eval_samples, t.seed);
  } else {
    last = result.history.back();
  }
  write_file(fs::path(cfg.out_dir) / "metrics.json",
             record_json(last, opts.config_hash, opts.dataset_hash).dump(2) + "\n");
  out << "epochs=" << result.history.size() << " test_error=" << fmt("%.4f", last.test_error)
      << " cond_fidelity=" << fmt("%.4f", last.cond_fidelity) << '\n'
      << "config_hash=" << opts.config_hash << " out=" << cfg.out_dir << '\n';
  return kExitOk;
}

// --- eval ------------------------------------------------------------------

nn::Checkpoint load_checkpoint(const std::string& path) { return nn::checkpoint_from_json(read_file(path)); }

void require_match(const nn::Checkpoint& ckpt, const data::Dataset& ds) {
  std::string fp = data::dataset_fingerprint(ds);
  if (ckpt.dataset_hash != fp) {
    throw ValidationError("checkpoint was trained on dataset " + ckpt.dataset_hash + " but the given dataset is " +
                          fp + "; refusing to evaluate on a different dataset");
  }
  if (ckpt.model.classes() != ds.classes || ckpt.model.data_dim() != ds.dim) {
    throw ValidationError("checkpoint shape does not match the dataset");
  }
}

int cmd_aggregate(const std::vector<std::string>& files, std::ostream& out) {
  if (files.size() < 2) throw ValidationError("--aggregate needs at least two metrics files");
  std::vector<train::MetricsRecord> rs;
  for (const auto& f : files) rs.push_back(train::metrics_from_json(read_file(f)));
  const std::pair<const char*, double train::MetricsRecord::*> fields[] = {
      {"loss_d", &train::MetricsRecord::loss_d},
      {"loss_c", &train::MetricsRecord::loss_c},
      {"loss_g", &train::MetricsRecord::loss_g},
      {"labeled_error", &train::MetricsRecord::labeled_error},
      {"test_error", &train::MetricsRecord::test_error},
      {"cond_fidelity", &train::MetricsRecord::cond_fidelity},
      {"est_jsd", &train::MetricsRecord::est_jsd},
  };
  const double n = static_cast<double>(rs.size());
  out << "files=" << rs.size() << '\n';
  for (const auto& [name, field] : fields) {
    double mean = 0.0;
    for (const auto& r : rs) mean += r.*field;
    mean /= n;
    double ss = 0.0;
    for (const auto& r : rs) ss += (r.*field - mean) * (r.*field - mean);
    double sd = std::sqrt(ss / (n - 1.0));
    out << name << ": " << fmt("%.6f", mean) << " +- " << fmt("%.6f", sd) << '\n';
  }
  return kExitOk;
}

int cmd_eval(const Commands& c, std::ostream& out) {
  if (!c.ev_aggregate.empty()) return cmd_aggregate(c.ev_aggregate, out);
  if (c.ev_checkpoint.empty() || c.ev_data.empty()) {
    throw ValidationError("eval needs --checkpoint and --data (or --aggregate FILES...)");
  }
  nn::Checkpoint ckpt = load_checkpoint(c.ev_checkpoint);
  data::Dataset ds = data::read_tgds(c.ev_data);
  require_match(ckpt, ds);
  train::MetricsRecord r = train::evaluate(ckpt.model, ds, c.ev_samples, c.ev_seed);
  std::string text = record_json(r, ckpt.config_hash, ckpt.dataset_hash).dump(2) + "\n";
  if (!c.ev_out.empty()) write_file(c.ev_out, text);
  out << text;
  return kExitOk;
}

// --- gen -------------------------------------------------------------------

int cmd_gen(const Commands& c, std::ostream& out, std::ostream& err) {
  nn::Checkpoint ckpt = load_checkpoint(c.gn_checkpoint);
  const auto& g = ckpt.model.g;
  if (c.gn_class >= g.classes) {
    throw ValidationError("--class " + std::to_string(c.gn_class) + " is outside [0, " + std::to_string(g.classes) +
                          ")");
  }
  std::optional<data::Dataset> ds;
  if (!c.gn_data.empty()) {
    ds = data::read_tgds(c.gn_data);
    require_match(ckpt, *ds);
  }

  std::mt19937_64 rng(c.gn_seed);
  ad::Tensor x;
  std::vector<double> ts;
  std::size_t rows = 0;
  if (c.gn_interpolate) {
    auto endpoint = [&](const std::vector<double>& given) {
      if (!given.empty()) return given;
      ad::Tensor z = g.latent.sample(1, rng);
      return std::vector<double>(z.data().begin(), z.data().end());
    };
    auto z0 = endpoint(c.gn_z0);
    auto z1 = endpoint(c.gn_z1);
    x = train::interpolate_latent(g, c.gn_class, z0, z1, c.gn_steps);
    rows = c.gn_steps;
    for (std::size_t i = 0; i < rows; ++i) ts.push_back(static_cast<double>(i) / static_cast<double>(rows - 1));
  } else if (c.gn_count > 0) {
    x = nn::sample_generator(g, nn::one_hot(std::vector<std::size_t>(c.gn_count, c.gn_class), g.classes),
                             g.latent.sample(c.gn_count, rng));
    rows = c.gn_count;
  }

  std::ostringstream csv;
  if (c.gn_interpolate) csv << "t,";
  for (std::size_t j = 0; j < g.data_dim; ++j) csv << (j ? "," : "") << 'x' << j;
  csv << '\n';
  std::size_t agree = 0;
  for (std::size_t i = 0; i < rows; ++i) {
    if (c.gn_interpolate) csv << fmt("%.17g", ts[i]) << ',';
    for (std::size_t j = 0; j < g.data_dim; ++j) csv << (j ? "," : "") << fmt("%.17g", x.at(i, j));
    csv << '\n';
    if (ds && ds->oracle.predict(x.data().subspan(i * g.data_dim, g.data_dim)) == c.gn_class) ++agree;
  }

  std::ostream& summary = c.gn_out.empty() ? err : out;
  if (c.gn_out.empty()) {
    out << csv.str();
  } else {
    write_file(c.gn_out, csv.str());
  }
  if (!ds) {
    summary << "oracle_agreement=n/a (pass --data to score samples)\n";
  } else if (rows == 0) {
    summary << "oracle_agreement=n/a (no samples)\n";
  } else {
    summary << "oracle_agreement=" << fmt("%.4f", static_cast<double>(agree) / static_cast<double>(rows)) << " ("
            << agree << "/" << rows << ")\n";
  }
  return kExitOk;
}

// --- game ------------------------------------------------------------------

int cmd_game(const Commands& c, std::ostream& out) {
  game::SuiteOptions opts;
  opts.instances = c.gm_instances;
  opts.nx = c.gm_nx;
  opts.ny = c.gm_ny;
  opts.alpha = c.gm_alpha;
  opts.perturbations = c.gm_perturbations;
  opts.perturbation = c.gm_perturbation;
  opts.seed = c.gm_seed;

  std::vector<game::CheckResult> results;
  const bool user = !c.gm_p.empty() || !c.gm_pc.empty() || !c.gm_pg.empty();
  if (user) {
    if (c.gm_p.empty() || c.gm_pc.empty() || c.gm_pg.empty()) {
      throw ValidationError("--p, --pc and --pg must be given together");
    }
    auto p = game::table_from_json(read_file(c.gm_p));
    auto pc = game::table_from_json(read_file(c.gm_pc));
    auto pg = game::table_from_json(read_file(c.gm_pg));
    results = game::check_tables(p, pc, pg, game::Alpha(opts.alpha), opts);
  } else {
    results = game::run_identity_suite(opts);
  }

  std::size_t failed = 0;
  json report = json::array();
  for (const auto& r : results) {
    if (!r.passed) ++failed;
    char line[256];
    std::snprintf(line, sizeof line, "%-4s %-44s worst=%.3e tol=%.1e cases=%zu", r.passed ? "PASS" : "FAIL",
                  r.name.c_str(), r.worst, r.tolerance, r.cases);
    out << line;
    if (!r.detail.empty()) out << "  " << r.detail;
    out << '\n';
    report.push_back({{"name", r.name},
                      {"passed", r.passed},
                      {"worst", r.worst},
                      {"tolerance", r.tolerance},
                      {"cases", r.cases},
                      {"detail", r.detail}});
  }
  out << (failed == 0 ? "all identities PASS" : std::to_string(failed) + " identities FAILED") << '\n';
  if (!c.gm_report.empty()) write_file(c.gm_report, json{{"checks", report}}.dump(2) + "\n");
  return failed == 0 ? kExitOk : kExitCheckFailed;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  if (const char* threads = std::getenv("TRIPLEGAME_THREADS"); threads && std::string(threads) != "1") {
    err << "error: TRIPLEGAME_THREADS must be 1 (got '" << threads << "')\n";
    return kExitUsage;
  }

  Commands c;
  CLI::App app{"Triple-GAN training, evaluation and exact-game verification"};
  app.name("triplegan");
  app.require_subcommand(1);

  auto* ds = app.add_subcommand("dataset", "generate a synthetic dataset file");
  ds->add_option("--out", c.ds_out, "output .tgds path")->required();
  ds->add_option("--config", c.config_path, "RunConfig JSON");
  ds->add_option("--kind", c.ds_kind, "mixture or rings");
  ds->add_option("--k", c.ds_k, "number of classes");
  ds->add_option("--n", c.ds_n, "training samples per class");
  ds->add_option("--test", c.ds_test, "held-out samples per class");
  ds->add_option("--labeled", c.ds_labeled, "labeled training samples in total");
  ds->add_option("--dim", c.ds_dim, "data dimension (mixture)");
  ds->add_option("--sigma", c.ds_sigma, "class noise scale");
  ds->add_option("--radius", c.ds_radius, "circle carrying the mixture means");
  ds->add_option("--radii", c.ds_radii, "ring radii")->delimiter(',');
  ds->add_option("--seed", c.ds_seed, "generator seed");

  auto* tr = app.add_subcommand("train", "train the three players on a dataset file");
  tr->add_option("--data", c.tr_data, "input .tgds")->required()->check(CLI::ExistingFile);
  tr->add_option("--out", c.tr_out, "output directory");
  tr->add_option("--config", c.config_path, "RunConfig JSON");
  tr->add_option("--epochs", c.tf.epochs);
  tr->add_option("--seed", c.tf.seed);
  tr->add_option("--lr", c.tf.lr);
  tr->add_option("--alpha", c.tf.alpha);
  tr->add_option("--alpha-p", c.tf.alpha_p);
  tr->add_option("--alpha-b", c.tf.alpha_b);
  tr->add_option("--rp-epoch", c.tf.rp_epoch, "epoch at which the pseudo discriminative loss switches on");
  tr->add_option("--pseudo-fraction", c.tf.pseudo_fraction);
  tr->add_option("--consistency-sigma", c.tf.consistency_sigma);
  tr->add_option("--batch", c.tf.batch, "sets every batch size");
  tr->add_option("--iters-per-epoch", c.tf.iters_per_epoch);
  tr->add_option("--eval-samples", c.tf.eval_samples);
  tr->add_option("--latent-dim", c.tf.latent_dim);
  tr->add_option("--mode", c.tf.mode, "triple, two_player or supervised_only");
  tr->add_option("--unlabeled-reg", c.tf.unlabeled_reg, "none, confidence or consistency");
  tr->add_option("--estimator", c.tf.estimator, "most_probable, reinforce_sample or exact_enum");
  tr->add_option("--checkpoint-every", c.tf.checkpoint_every);

  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint or aggregate metrics files");
  ev->add_option("--checkpoint", c.ev_checkpoint);
  ev->add_option("--data", c.ev_data);
  ev->add_option("--out", c.ev_out, "also write the JSON here");
  ev->add_option("--seed", c.ev_seed);
  ev->add_option("--eval-samples", c.ev_samples);
  ev->add_option("--aggregate", c.ev_aggregate, "metrics JSON files")->expected(1, -1);

  auto* gn = app.add_subcommand("gen", "sample the generator as CSV");
  gn->add_option("--checkpoint", c.gn_checkpoint)->required();
  gn->add_option("--class", c.gn_class)->required();
  gn->add_option("--count", c.gn_count);
  gn->add_option("--seed", c.gn_seed);
  gn->add_option("--data", c.gn_data, "dataset whose oracle scores the samples");
  gn->add_option("--out", c.gn_out, "CSV path (default stdout)");
  gn->add_flag("--interpolate", c.gn_interpolate, "walk the latent space between two codes");
  gn->add_option("--z0", c.gn_z0)->delimiter(',');
  gn->add_option("--z1", c.gn_z1)->delimiter(',');
  gn->add_option("--steps", c.gn_steps);

  auto* gm = app.add_subcommand("game", "verify the exact-game identities");
  gm->add_option("--instances", c.gm_instances);
  gm->add_option("--nx", c.gm_nx);
  gm->add_option("--ny", c.gm_ny);
  gm->add_option("--alpha", c.gm_alpha);
  gm->add_option("--perturbations", c.gm_perturbations);
  gm->add_option("--perturbation", c.gm_perturbation);
  gm->add_option("--seed", c.gm_seed);
  gm->add_option("--p", c.gm_p, "true joint table JSON");
  gm->add_option("--pc", c.gm_pc, "classifier joint table JSON");
  gm->add_option("--pg", c.gm_pg, "generator joint table JSON");
  gm->add_option("--report", c.gm_report, "write report.json here");

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (*ds) return cmd_dataset(c, out);
    if (*tr) return cmd_train(c, out, err);
    if (*ev) return cmd_eval(c, out);
    if (*gn) return cmd_gen(c, out, err);
    if (*gm) return cmd_game(c, out);
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace triplegan::cli
