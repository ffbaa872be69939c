#include "activessf/prototypes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

#include "activessf/binary_io.hpp"
#include "activessf/errors.hpp"
#include "activessf/file_util.hpp"
#include "activessf/kmeans.hpp"

namespace activessf {

namespace {

constexpr std::string_view kMagic = "APM1";
constexpr std::uint32_t kVersion = 1;

Matrix feature_matrix(const FeatureSet& set) {
  Matrix m(set.size(), set.dim());
  for (std::size_t i = 0; i < set.size(); ++i) std::ranges::copy(set[i].values, m.row(i).begin());
  return m;
}

}  // namespace

void summarize_clusters(PrototypeModel& model, const FeatureSet& features,
                        const std::vector<std::uint32_t>& assignment) {
  const std::size_t k = model.k();
  model.members.assign(k, {});
  model.sizes.assign(k, 0);
  model.bounds.assign(k, {});
  model.label_purity.assign(k, 0.0);
  model.objective = 0.0;

  std::vector<double> lo(k, std::numeric_limits<double>::infinity());
  std::vector<double> hi(k, 0.0);
  std::vector<std::map<int, std::size_t>> label_counts(k);
  std::vector<std::size_t> labeled(k, 0);
  for (std::size_t i = 0; i < features.size(); ++i) {
    const std::size_t c = assignment[i];
    const double d2 = squared_distance(features[i].values, model.centers.row(c));
    const double d = std::sqrt(d2);
    model.objective += d2;
    model.members[c].push_back(features[i].id);
    ++model.sizes[c];
    lo[c] = std::min(lo[c], d);
    hi[c] = std::max(hi[c], d);
    if (features[i].label) {
      ++label_counts[c][*features[i].label];
      ++labeled[c];
    }
  }
  for (std::size_t c = 0; c < k; ++c) {
    if (model.sizes[c] >= 2) model.bounds[c] = {lo[c], hi[c]};
    if (labeled[c] > 0) {
      std::size_t best = 0;
      for (const auto& [label, n] : label_counts[c]) best = std::max(best, n);
      model.label_purity[c] = static_cast<double>(best) / static_cast<double>(labeled[c]);
    }
  }
  model.n_max = model.sizes.empty() ? 0 : *std::ranges::max_element(model.sizes);
}

PrototypeModel fit_prototypes(const FeatureSet& labeled, const PrototypeOptions& options) {
  if (labeled.empty()) throw std::invalid_argument("cannot fit prototypes on an empty feature set");
  if (options.k == 0 || options.k > labeled.size())
    throw std::invalid_argument("prototype count " + std::to_string(options.k) + " needs 1 <= k <= " +
                                std::to_string(labeled.size()) + " labeled samples");

  const Matrix points = feature_matrix(labeled);
  KMeansResult fit = lloyd_kmeans(points, {.k = options.k, .seed = options.seed, .max_iters = options.max_iters,
                                           .tol = options.tol});
  PrototypeModel model;
  model.centers = std::move(fit.centers);
  model.seed = options.seed;
  model.objective_trace = std::move(fit.objective_trace);
  summarize_clusters(model, labeled, fit.assignment);
  return model;
}

Assignment assign_nearest(std::span<const double> x, const PrototypeModel& model) {
  if (x.size() != model.dim())
    throw std::invalid_argument("feature dim " + std::to_string(x.size()) + " does not match model dim " +
                                std::to_string(model.dim()));
  Assignment best{0, std::numeric_limits<double>::infinity()};
  double best_d2 = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < model.k(); ++c) {
    const double d2 = squared_distance(x, model.centers.row(c));
    if (d2 < best_d2) {
      best_d2 = d2;
      best.cluster = c;
    }
  }
  best.distance = std::sqrt(best_d2);
  return best;
}

std::vector<std::uint8_t> encode_model(const PrototypeModel& model) {
  binary::Writer w;
  w.put_bytes(kMagic);
  w.put(kVersion);
  w.put(static_cast<std::uint32_t>(model.k()));
  w.put(static_cast<std::uint32_t>(model.dim()));
  w.put(model.seed);
  w.put(model.objective);
  w.put(static_cast<std::uint64_t>(model.n_max));
  for (std::size_t c = 0; c < model.k(); ++c) {
    w.put(static_cast<std::uint64_t>(model.sizes[c]));
    w.put(model.bounds[c].lower);
    w.put(model.bounds[c].upper);
    for (double v : model.centers.row(c)) w.put(v);
    for (const auto& id : model.members[c]) w.put_string(id);
  }
  for (std::size_t c = 0; c < model.k(); ++c) w.put(c < model.label_purity.size() ? model.label_purity[c] : 0.0);
  w.seal();
  return w.take();
}

PrototypeModel decode_model(std::span<const std::uint8_t> bytes) {
  binary::Reader r(bytes);
  if (r.get_bytes(kMagic.size()) != kMagic) throw FormatError("not an APM1 prototype model");
  if (const auto version = r.get<std::uint32_t>(); version != kVersion)
    throw FormatError("unsupported model version " + std::to_string(version));
  const auto k = r.get<std::uint32_t>();
  const auto dim = r.get<std::uint32_t>();
  if (k == 0 || k > (1u << 20) || dim > (1u << 20)) throw FormatError("model header out of range");
  if (std::size_t{k} * (24 + std::size_t{dim} * 8) > r.remaining()) throw FormatError("truncated model");

  PrototypeModel m;
  m.seed = r.get<std::uint64_t>();
  m.objective = r.get<double>();
  m.n_max = r.get<std::uint64_t>();
  m.centers = Matrix(k, dim);
  m.sizes.resize(k);
  m.bounds.resize(k);
  m.members.resize(k);
  for (std::uint32_t c = 0; c < k; ++c) {
    r.set_record(c);
    const auto size = r.get<std::uint64_t>();
    if (size > r.remaining() / 4) throw FormatError("cluster size exceeds file size", c);
    m.sizes[c] = size;
    m.bounds[c] = {r.get<double>(), r.get<double>()};
    for (auto& v : m.centers.row(c)) v = r.get<double>();
    m.members[c].reserve(size);
    for (std::uint64_t i = 0; i < size; ++i) m.members[c].push_back(r.get_string(4096));
    const auto& b = m.bounds[c];
    if (!std::isfinite(b.lower) || !std::isfinite(b.upper) || b.lower < 0 || b.lower > b.upper)
      throw FormatError("invalid distance bounds", c);
  }
  r.set_record(-1);
  m.label_purity.resize(k);
  for (auto& p : m.label_purity) p = r.get<double>();
  r.verify_seal();
  if (m.n_max != *std::ranges::max_element(m.sizes)) throw FormatError("n_max disagrees with cluster sizes");
  return m;
}

void write_model(const PrototypeModel& model, const std::filesystem::path& path) {
  atomic_write(path, encode_model(model));
}

PrototypeModel read_model(const std::filesystem::path& path) {
  try {
    return decode_model(read_file_bytes(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace activessf
