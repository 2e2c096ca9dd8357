#include "triplegan/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "json.hpp"
#include "triplegan/error.hpp"

namespace triplegan::data {

namespace {

std::vector<double> softmax(std::vector<double> logits) {
  double m = *std::max_element(logits.begin(), logits.end());
  double s = 0.0;
  for (auto& v : logits) {
    v = std::exp(v - m);
    s += v;
  }
  for (auto& v : logits) v /= s;
  return logits;
}

}  // namespace

// --- oracle ----------------------------------------------------------------

Oracle::Oracle(MixtureOracle m) : params_(std::move(m)) {
  const auto& o = std::get<MixtureOracle>(params_);
  if (o.classes < 2 || o.means.size() != o.classes * o.dim || o.priors.size() != o.classes) {
    throw ValidationError("mixture oracle parameters are inconsistent");
  }
  if (!(o.sigma > 0.0)) throw ValidationError("mixture oracle needs sigma > 0");
  double total = 0.0;
  for (double p : o.priors) {
    if (!(p > 0.0)) throw ValidationError("mixture oracle priors must be positive");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-12) throw ValidationError("mixture oracle priors must sum to 1");
}

Oracle::Oracle(RingOracle r) : params_(std::move(r)) {
  const auto& o = std::get<RingOracle>(params_);
  if (o.radii.size() < 2) throw ValidationError("ring oracle needs at least two rings");
  for (std::size_t i = 1; i < o.radii.size(); ++i) {
    if (!(o.radii[i] > o.radii[i - 1])) throw ValidationError("ring radii must be strictly increasing");
  }
  if (!(o.sigma > 0.0)) throw ValidationError("ring oracle needs sigma > 0");
}

std::size_t Oracle::classes() const {
  if (const auto* m = std::get_if<MixtureOracle>(&params_)) return m->classes;
  return std::get<RingOracle>(params_).radii.size();
}

std::vector<double> Oracle::posterior(std::span<const double> x) const {
  if (const auto* m = std::get_if<MixtureOracle>(&params_)) {
    if (x.size() != m->dim) throw DimensionError("oracle: point dimension mismatch");
    std::vector<double> logits(m->classes);
    for (std::size_t k = 0; k < m->classes; ++k) {
      double d2 = 0.0;
      for (std::size_t j = 0; j < m->dim; ++j) {
        double diff = x[j] - m->means[k * m->dim + j];
        d2 += diff * diff;
      }
      logits[k] = std::log(m->priors[k]) - d2 / (2.0 * m->sigma * m->sigma);
    }
    return softmax(std::move(logits));
  }
  const auto& r = std::get<RingOracle>(params_);
  if (x.size() < 2) throw DimensionError("ring oracle needs 2D points");
  double rho = std::hypot(x[0], x[1]);
  std::vector<double> logits(r.radii.size());
  for (std::size_t k = 0; k < r.radii.size(); ++k) {
    double d = rho - r.radii[k];
    logits[k] = -d * d / (2.0 * r.sigma * r.sigma);
  }
  return softmax(std::move(logits));
}

std::size_t Oracle::predict(std::span<const double> x) const {
  auto post = posterior(x);
  std::size_t best = 0;
  for (std::size_t k = 1; k < post.size(); ++k)
    if (post[k] > post[best]) best = k;
  return best;
}

// --- dataset ---------------------------------------------------------------

std::vector<std::size_t> Dataset::train_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < size(); ++i)
    if (split[i] == Split::Train) out.push_back(i);
  return out;
}

std::vector<std::size_t> Dataset::test_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < size(); ++i)
    if (split[i] == Split::Test) out.push_back(i);
  return out;
}

std::vector<std::size_t> Dataset::labeled_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < size(); ++i)
    if (split[i] == Split::Train && labeled[i]) out.push_back(i);
  return out;
}

std::vector<std::size_t> Dataset::unlabeled_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < size(); ++i)
    if (split[i] == Split::Train && !labeled[i]) out.push_back(i);
  return out;
}

void Dataset::validate() const {
  const std::size_t n = y.size();
  if (dim == 0 || classes < 2) throw ValidationError("dataset needs dim >= 1 and at least two classes");
  if (x.size() != n * dim || labeled.size() != n || split.size() != n) {
    throw ValidationError("dataset columns have inconsistent lengths");
  }
  for (double v : x) {
    if (!(std::abs(v) < 1.0)) throw ValidationError("dataset features must lie strictly inside (-1, 1)");
  }
  std::vector<bool> seen(classes, false);
  for (std::size_t i = 0; i < n; ++i) {
    if (y[i] >= classes) throw ValidationError("dataset label out of range");
    if (labeled[i] && split[i] == Split::Test) throw ValidationError("test rows cannot be labeled for training");
    if (labeled[i]) seen[y[i]] = true;
  }
  for (std::size_t k = 0; k < classes; ++k) {
    if (!seen[k]) throw ValidationError("class " + std::to_string(k) + " has no labeled training row");
  }
  if (oracle.classes() != classes) throw ValidationError("oracle class count does not match dataset");
}

namespace {

// Rescales raw points into (−1, 1) and returns the factor used.
double rescale_into_unit_box(std::vector<double>& x) {
  double m = 0.0;
  for (double v : x) m = std::max(m, std::abs(v));
  double s = m > 0.0 ? 1.05 * m : 1.0;
  for (auto& v : x) v /= s;
  return s;
}

void append_rows(Dataset& ds, std::size_t k, std::size_t count, Split split) {
  for (std::size_t i = 0; i < count; ++i) {
    ds.y.push_back(k);
    ds.labeled.push_back(1);
    ds.split.push_back(split);
  }
}

}  // namespace

Dataset make_gaussian_mixture(const GeneratorParams& params) {
  const std::size_t k = params.classes;
  if (k < 2) throw ContractError("mixture needs at least two classes");
  if (params.n_per_class == 0) throw ContractError("mixture needs at least one row per class");
  if (params.dim < 2 || params.dim > 64) throw ContractError("mixture dimension must lie in [2, 64]");
  if (!(params.radius > 0.0) || !(params.sigma > 0.0) || !(params.sigma < params.radius / 2.0)) {
    throw ContractError("mixture needs 0 < sigma < radius / 2");
  }
  const std::size_t d = params.dim;
  std::vector<double> means(k * d, 0.0);
  for (std::size_t c = 0; c < k; ++c) {
    double theta = 2.0 * std::numbers::pi * static_cast<double>(c) / static_cast<double>(k);
    means[c * d + 0] = params.radius * std::cos(theta);
    means[c * d + 1] = params.radius * std::sin(theta);
  }

  Dataset ds;
  ds.dim = d;
  ds.classes = k;
  ds.params = params;
  ds.params.kind = DatasetKind::Mixture;
  std::mt19937_64 rng(params.seed);
  std::normal_distribution<double> noise(0.0, params.sigma);
  for (Split split : {Split::Train, Split::Test}) {
    std::size_t count = split == Split::Train ? params.n_per_class : params.n_test_per_class;
    for (std::size_t c = 0; c < k; ++c) {
      for (std::size_t i = 0; i < count; ++i)
        for (std::size_t j = 0; j < d; ++j) ds.x.push_back(means[c * d + j] + noise(rng));
      append_rows(ds, c, count, split);
    }
  }
  for (std::size_t i = 0; i < ds.size(); ++i)
    if (ds.split[i] == Split::Test) ds.labeled[i] = 0;

  double s = rescale_into_unit_box(ds.x);
  MixtureOracle o;
  o.classes = k;
  o.dim = d;
  o.means = means;
  for (auto& m : o.means) m /= s;
  o.sigma = params.sigma / s;
  o.priors.assign(k, 1.0 / static_cast<double>(k));
  ds.oracle = Oracle(std::move(o));
  return ds;
}

Dataset make_rings(const GeneratorParams& params) {
  const std::size_t k = params.classes;
  if (k < 2) throw ContractError("rings need at least two classes");
  if (params.n_per_class == 0) throw ContractError("rings need at least one row per class");
  if (params.dim != 2) throw ContractError("rings are two-dimensional");
  if (!(params.sigma > 0.0)) throw ContractError("rings need sigma > 0");
  std::vector<double> radii = params.radii;
  if (radii.empty()) {
    for (std::size_t c = 0; c < k; ++c) radii.push_back(static_cast<double>(c + 1));
  }
  if (radii.size() != k) throw ContractError("rings need one radius per class");
  if (!(radii[0] > 0.0)) throw ContractError("ring radii must be positive");
  for (std::size_t c = 1; c < k; ++c) {
    if (!(radii[c] > radii[c - 1])) throw ContractError("ring radii must be strictly increasing");
  }

  Dataset ds;
  ds.dim = 2;
  ds.classes = k;
  ds.params = params;
  ds.params.kind = DatasetKind::Rings;
  ds.params.radii = radii;
  std::mt19937_64 rng(params.seed);
  std::normal_distribution<double> noise(0.0, params.sigma);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  for (Split split : {Split::Train, Split::Test}) {
    std::size_t count = split == Split::Train ? params.n_per_class : params.n_test_per_class;
    for (std::size_t c = 0; c < k; ++c) {
      for (std::size_t i = 0; i < count; ++i) {
        double t = angle(rng);
        double px = radii[c] * std::cos(t) + noise(rng);
        double py = radii[c] * std::sin(t) + noise(rng);
        ds.x.push_back(px);
        ds.x.push_back(py);
      }
      append_rows(ds, c, count, split);
    }
  }
  for (std::size_t i = 0; i < ds.size(); ++i)
    if (ds.split[i] == Split::Test) ds.labeled[i] = 0;

  double s = rescale_into_unit_box(ds.x);
  RingOracle o;
  for (double r : radii) o.radii.push_back(r / s);
  o.sigma = params.sigma / s;
  ds.oracle = Oracle(std::move(o));
  return ds;
}

Dataset make_dataset(const GeneratorParams& params) {
  return params.kind == DatasetKind::Mixture ? make_gaussian_mixture(params) : make_rings(params);
}

Dataset ssl_split(const Dataset& ds, std::size_t n_labeled, std::uint64_t seed) {
  const std::size_t k = ds.classes;
  if (n_labeled == 0 || n_labeled % k != 0) {
    throw ContractError("n_labeled = " + std::to_string(n_labeled) + " is not a positive multiple of K = " +
                        std::to_string(k));
  }
  const std::size_t per_class = n_labeled / k;
  std::vector<std::vector<std::size_t>> by_class(k);
  for (std::size_t i : ds.train_indices()) by_class[ds.y[i]].push_back(i);

  Dataset out = ds;
  std::fill(out.labeled.begin(), out.labeled.end(), 0);
  std::mt19937_64 rng(seed);
  for (std::size_t c = 0; c < k; ++c) {
    auto& pool = by_class[c];
    if (pool.size() < per_class) {
      throw ContractError("class " + std::to_string(c) + " has only " + std::to_string(pool.size()) +
                          " training rows, " + std::to_string(per_class) + " requested");
    }
    std::shuffle(pool.begin(), pool.end(), rng);
    for (std::size_t i = 0; i < per_class; ++i) out.labeled[pool[i]] = 1;
  }
  return out;
}

double oracle_accuracy(const Dataset& ds, Split split) {
  std::size_t total = 0, hit = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (ds.split[i] != split) continue;
    ++total;
    if (ds.oracle.predict(ds.row(i)) == ds.y[i]) ++hit;
  }
  return total ? static_cast<double>(hit) / static_cast<double>(total) : 0.0;
}

// --- batching --------------------------------------------------------------

BatchIterator::BatchIterator(const Dataset& ds, std::size_t batch_size, Source source, std::uint64_t seed)
    : batch_size_(batch_size), rng_(seed) {
  if (batch_size == 0) throw ContractError("batch size must be at least 1");
  switch (source) {
    case Source::Labeled:
      pool_ = ds.labeled_indices();
      break;
    case Source::Unlabeled:
      pool_ = ds.unlabeled_indices();
      break;
    case Source::All:
      pool_ = ds.train_indices();
      break;
  }
  if (pool_.empty()) throw ContractError("batch source is empty");
}

std::size_t BatchIterator::batches_per_epoch() const { return (pool_.size() + batch_size_ - 1) / batch_size_; }

std::vector<std::vector<std::size_t>> BatchIterator::epoch() {
  std::vector<std::size_t> order = pool_;
  std::shuffle(order.begin(), order.end(), rng_);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t start = 0; start < order.size(); start += batch_size_) {
    std::size_t end = std::min(order.size(), start + batch_size_);
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start), order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return out;
}

std::vector<std::size_t> BatchIterator::next() {
  std::vector<std::size_t> batch;
  batch.reserve(batch_size_);
  while (batch.size() < batch_size_) {
    if (cursor_ == order_.size()) {
      order_ = pool_;
      std::shuffle(order_.begin(), order_.end(), rng_);
      cursor_ = 0;
    }
    batch.push_back(order_[cursor_++]);
  }
  return batch;
}

ad::Tensor gather_rows(const Dataset& ds, std::span<const std::size_t> indices) {
  if (indices.empty()) throw ContractError("gather_rows: empty index list");
  ad::Tensor out({indices.size(), ds.dim});
  for (std::size_t r = 0; r < indices.size(); ++r) {
    auto row = ds.row(indices[r]);
    std::copy(row.begin(), row.end(), out.data().begin() + static_cast<std::ptrdiff_t>(r * ds.dim));
  }
  return out;
}

std::vector<std::size_t> gather_labels(const Dataset& ds, std::span<const std::size_t> indices) {
  std::vector<std::size_t> out;
  out.reserve(indices.size());
  for (auto i : indices) out.push_back(ds.y[i]);
  return out;
}

// --- file format -----------------------------------------------------------

std::string kind_name(DatasetKind kind) { return kind == DatasetKind::Mixture ? "mixture" : "rings"; }

DatasetKind kind_from_name(const std::string& name) {
  if (name == "mixture") return DatasetKind::Mixture;
  if (name == "rings") return DatasetKind::Rings;
  throw ValidationError("unknown dataset kind '" + name + "' (expected mixture or rings)");
}

namespace {

using nlohmann::json;

void append_double(std::string& out, double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, res.ptr);
}

double parse_double(std::string_view field, std::size_t line) {
  double v = 0.0;
  auto res = std::from_chars(field.data(), field.data() + field.size(), v);
  if (res.ec != std::errc() || res.ptr != field.data() + field.size() || !std::isfinite(v)) {
    throw ValidationError("line " + std::to_string(line) + ": bad number '" + std::string(field) + "'");
  }
  return v;
}

std::size_t parse_index(std::string_view field, std::size_t line) {
  std::size_t v = 0;
  auto res = std::from_chars(field.data(), field.data() + field.size(), v);
  if (res.ec != std::errc() || res.ptr != field.data() + field.size()) {
    throw ValidationError("line " + std::to_string(line) + ": bad integer '" + std::string(field) + "'");
  }
  return v;
}

json params_to_json(const GeneratorParams& p) {
  return json{{"kind", kind_name(p.kind)}, {"classes", p.classes},          {"n_per_class", p.n_per_class},
              {"n_test_per_class", p.n_test_per_class},  {"radius", p.radius},
              {"radii", p.radii},        {"sigma", p.sigma},                {"dim", p.dim},
              {"seed", p.seed}};
}

GeneratorParams params_from_json(const json& j) {
  GeneratorParams p;
  p.kind = kind_from_name(j.at("kind").get<std::string>());
  p.classes = j.at("classes").get<std::size_t>();
  p.n_per_class = j.at("n_per_class").get<std::size_t>();
  p.n_test_per_class = j.at("n_test_per_class").get<std::size_t>();
  p.radius = j.at("radius").get<double>();
  p.radii = j.at("radii").get<std::vector<double>>();
  p.sigma = j.at("sigma").get<double>();
  p.dim = j.at("dim").get<std::size_t>();
  p.seed = j.at("seed").get<std::uint64_t>();
  return p;
}

json oracle_to_json(const Oracle& o) {
  if (const auto* m = std::get_if<MixtureOracle>(&o.params())) {
    return json{{"kind", "mixture"}, {"classes", m->classes}, {"dim", m->dim},
                {"means", m->means},  {"sigma", m->sigma},     {"priors", m->priors}};
  }
  const auto& r = std::get<RingOracle>(o.params());
  return json{{"kind", "rings"}, {"radii", r.radii}, {"sigma", r.sigma}};
}

Oracle oracle_from_json(const json& j) {
  auto kind = j.at("kind").get<std::string>();
  if (kind == "mixture") {
    MixtureOracle m;
    m.classes = j.at("classes").get<std::size_t>();
    m.dim = j.at("dim").get<std::size_t>();
    m.means = j.at("means").get<std::vector<double>>();
    m.sigma = j.at("sigma").get<double>();
    m.priors = j.at("priors").get<std::vector<double>>();
    return Oracle(std::move(m));
  }
  if (kind == "rings") {
    RingOracle r;
    r.radii = j.at("radii").get<std::vector<double>>();
    r.sigma = j.at("sigma").get<double>();
    return Oracle(std::move(r));
  }
  throw ValidationError("unknown oracle kind '" + kind + "'");
}

}  // namespace

std::string to_tgds(const Dataset& ds) {
  json header;
  header["format"] = "tgds";
  header["version"] = 1;
  header["n"] = ds.size();
  header["d"] = ds.dim;
  header["k"] = ds.classes;
  header["seed"] = ds.params.seed;
  header["n_labeled"] = ds.labeled_indices().size();
  header["generator"] = params_to_json(ds.params);
  header["oracle"] = oracle_to_json(ds.oracle);

  std::string out = header.dump();
  out += '\n';
  for (std::size_t j = 0; j < ds.dim; ++j) out += "x" + std::to_string(j) + ",";
  out += "label,labeled,split\n";
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (double v : ds.row(i)) {
      append_double(out, v);
      out += ',';
    }
    out += std::to_string(ds.y[i]);
    out += ds.labeled[i] ? ",1," : ",0,";
    out += ds.split[i] == Split::Train ? "train" : "test";
    out += '\n';
  }
  return out;
}

Dataset from_tgds(std::string_view text) {
  std::size_t nl = text.find('\n');
  if (nl == std::string_view::npos) throw ValidationError("tgds: missing header line");
  json header;
  try {
    header = json::parse(text.substr(0, nl));
  } catch (const json::exception& e) {
    throw ValidationError(std::string("tgds: header is not valid JSON: ") + e.what());
  }

  Dataset ds;
  std::size_t n = 0;
  try {
    if (header.at("format").get<std::string>() != "tgds" || header.at("version").get<int>() != 1) {
      throw ValidationError("tgds: unsupported format or version");
    }
    n = header.at("n").get<std::size_t>();
    ds.dim = header.at("d").get<std::size_t>();
    ds.classes = header.at("k").get<std::size_t>();
    ds.params = params_from_json(header.at("generator"));
    ds.oracle = oracle_from_json(header.at("oracle"));
  } catch (const json::exception& e) {
    throw ValidationError(std::string("tgds: bad header: ") + e.what());
  }

  std::size_t pos = nl + 1;
  std::size_t line_no = 2;
  auto next_line = [&]() -> std::string_view {
    if (pos >= text.size()) return {};
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    return line;
  };

  std::string expected;
  for (std::size_t j = 0; j < ds.dim; ++j) expected += "x" + std::to_string(j) + ",";
  expected += "label,labeled,split";
  if (next_line() != expected) throw ValidationError("tgds: unexpected CSV header");

  ds.x.reserve(n * ds.dim);
  for (std::size_t i = 0; i < n; ++i) {
    ++line_no;
    std::string_view line = next_line();
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
      std::size_t comma = line.find(',', start);
      fields.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (fields.size() != ds.dim + 3) {
      throw ValidationError("tgds line " + std::to_string(line_no) + ": expected " + std::to_string(ds.dim + 3) +
                            " fields");
    }
    for (std::size_t j = 0; j < ds.dim; ++j) ds.x.push_back(parse_double(fields[j], line_no));
    ds.y.push_back(parse_index(fields[ds.dim], line_no));
    std::size_t flag = parse_index(fields[ds.dim + 1], line_no);
    if (flag > 1) throw ValidationError("tgds line " + std::to_string(line_no) + ": labeled flag must be 0 or 1");
    ds.labeled.push_back(static_cast<std::uint8_t>(flag));
    auto tag = fields[ds.dim + 2];
    if (tag == "train") {
      ds.split.push_back(Split::Train);
    } else if (tag == "test") {
      ds.split.push_back(Split::Test);
    } else {
      throw ValidationError("tgds line " + std::to_string(line_no) + ": split must be train or test");
    }
  }
  while (pos < text.size()) {
    if (!next_line().empty()) throw ValidationError("tgds: more rows than the header declares");
  }
  ds.validate();
  return ds;
}

void write_tgds(const std::string& path, const Dataset& ds) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot open '" + path + "' for writing");
  out << to_tgds(ds);
  if (!out) throw ValidationError("failed writing '" + path + "'");
}

Dataset read_tgds(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open dataset '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return from_tgds(ss.str());
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[static_cast<std::size_t>(i)] = kDigits[v & 0xf];
    v >>= 4;
  }
  return s;
}

std::string dataset_fingerprint(const Dataset& ds) { return hex64(fnv1a64(to_tgds(ds))); }

}  // namespace triplegan::data
