#include "activessf/selector.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "activessf/errors.hpp"
#include "activessf/file_util.hpp"
#include "activessf/parallel.hpp"

namespace activessf {

namespace {

ThresholdTable base_table(const PrototypeModel& model) {
  if (model.k() == 0) throw std::invalid_argument("prototype model has no clusters");
  ThresholdTable t;
  t.n_max = model.n_max;
  t.clusters.resize(model.k());
  for (std::size_t c = 0; c < model.k(); ++c)
    t.clusters[c] = {model.bounds[c].lower, model.bounds[c].lower, model.bounds[c].upper, model.sizes[c]};
  return t;
}

}  // namespace

double density_threshold(double lower, double upper, std::size_t n, std::size_t n_max, double alpha) {
  const double share = n_max > 0 ? static_cast<double>(n) / static_cast<double>(n_max) : 1.0;
  return lower + (upper - lower) * std::pow(1.0 - share, alpha);
}

ThresholdTable compute_thresholds(const PrototypeModel& model, double alpha, double min_radius) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw std::invalid_argument("alpha must be positive");
  if (!(min_radius >= 0.0) || !std::isfinite(min_radius)) throw std::invalid_argument("min radius must be >= 0");
  ThresholdTable t = base_table(model);
  t.alpha = alpha;
  t.min_radius = min_radius;
  for (auto& c : t.clusters) {
    c.upper = std::max(c.upper, min_radius);
    c.threshold = density_threshold(c.lower, c.upper, c.size, model.n_max, alpha);
  }
  return t;
}

ThresholdTable fixed_thresholds(const PrototypeModel& model, double value) {
  ThresholdTable t = base_table(model);
  for (auto& c : t.clusters) c.threshold = value;
  return t;
}

ThresholdTable lower_bound_thresholds(const PrototypeModel& model) { return base_table(model); }

double mean_threshold(const ThresholdTable& table) {
  double sum = 0.0;
  for (const auto& c : table.clusters) sum += c.threshold;
  return table.clusters.empty() ? 0.0 : sum / static_cast<double>(table.clusters.size());
}

std::size_t SelectionManifest::accepted_count() const {
  std::size_t n = 0;
  for (const auto& d : decisions) n += d.accepted ? 1 : 0;
  return n;
}

std::vector<std::vector<const SelectionDecision*>> SelectionManifest::accepted_by_cluster() const {
  std::vector<std::vector<const SelectionDecision*>> groups(per_cluster.size());
  for (const auto& d : decisions)
    if (d.accepted && d.cluster < groups.size()) groups[d.cluster].push_back(&d);
  return groups;
}

SelectionManifest select_samples(const FeatureSet& candidates, const PrototypeModel& model,
                                 const ThresholdTable& table) {
  if (table.size() != model.k()) throw std::invalid_argument("threshold table does not match the model");
  if (!candidates.empty() && candidates.dim() != model.dim())
    throw std::invalid_argument("candidate dim " + std::to_string(candidates.dim()) + " does not match model dim " +
                                std::to_string(model.dim()));

  SelectionManifest m;
  m.decisions.resize(candidates.size());
  parallel_for(candidates.size(), 256, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto& x = candidates[i];
      const Assignment a = assign_nearest(x.values, model);
      const double thr = table[a.cluster];
      m.decisions[i] = {x.id, a.cluster, a.distance, thr, a.distance <= thr};
    }
  });
  m.per_cluster.assign(model.k(), {});
  for (const auto& d : m.decisions) {
    auto& tally = m.per_cluster[d.cluster];
    (d.accepted ? tally.accepted : tally.rejected) += 1;
  }
  return m;
}

std::string format_manifest(const SelectionManifest& manifest, const ThresholdTable& table) {
  std::ostringstream os;
  os << "# activessf selection manifest v1\n";
  for (const auto& [k, v] : manifest.config) os << "# " << k << '=' << v << '\n';
  os << "id,cluster,distance,threshold,accepted\n";
  for (const auto& d : manifest.decisions)
    os << d.id << ',' << d.cluster << ',' << format_double(d.distance) << ',' << format_double(d.threshold) << ','
       << (d.accepted ? 1 : 0) << '\n';
  os << "# summary\n";
  os << "cluster,threshold,accepted,rejected\n";
  for (std::size_t c = 0; c < manifest.per_cluster.size(); ++c)
    os << c << ',' << format_double(c < table.size() ? table[c] : 0.0) << ',' << manifest.per_cluster[c].accepted
       << ',' << manifest.per_cluster[c].rejected << '\n';
  return os.str();
}

namespace {

template <typename T>
T parse_field(std::string_view s, long long rec) {
  T v{};
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || end != s.data() + s.size() || s.empty()) throw FormatError("bad manifest field", rec);
  return v;
}

}  // namespace

SelectionManifest parse_manifest(const std::string& text) {
  SelectionManifest m;
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "# activessf selection manifest v1")
    throw FormatError("not a selection manifest");
  while (std::getline(in, line) && line.starts_with("# ")) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError("bad config line in manifest");
    m.config.emplace_back(line.substr(2, eq - 2), line.substr(eq + 1));
  }
  if (line != "id,cluster,distance,threshold,accepted") throw FormatError("missing manifest row header");
  long long rec = 0;
  while (std::getline(in, line) && line != "# summary") {
    std::vector<std::string_view> f;
    std::string_view rest = line;
    for (std::size_t c; (c = rest.rfind(',')) != std::string_view::npos && f.size() < 4;) {
      f.insert(f.begin(), rest.substr(c + 1));
      rest = rest.substr(0, c);
    }
    if (f.size() != 4 || rest.empty()) throw FormatError("bad manifest row", rec);
    SelectionDecision d;
    d.id = std::string(rest);
    d.cluster = parse_field<std::size_t>(f[0], rec);
    d.distance = parse_field<double>(f[1], rec);
    d.threshold = parse_field<double>(f[2], rec);
    const int acc = parse_field<int>(f[3], rec);
    if (acc != 0 && acc != 1) throw FormatError("bad accepted flag", rec);
    d.accepted = acc == 1;
    m.decisions.push_back(std::move(d));
    ++rec;
  }
  if (line != "# summary" || !std::getline(in, line) || line != "cluster,threshold,accepted,rejected")
    throw FormatError("missing manifest summary");
  while (std::getline(in, line) && !line.empty()) {
    std::istringstream row(line);
    std::string c, thr, a, r;
    if (!std::getline(row, c, ',') || !std::getline(row, thr, ',') || !std::getline(row, a, ',') ||
        !std::getline(row, r))
      throw FormatError("bad summary row");
    if (parse_field<std::size_t>(c, -1) != m.per_cluster.size()) throw FormatError("summary rows out of order");
    m.per_cluster.push_back({parse_field<std::size_t>(a, -1), parse_field<std::size_t>(r, -1)});
  }
  return m;
}

std::string format_accepted_ids(const SelectionManifest& manifest) {
  std::string out;
  for (const auto& d : manifest.decisions)
    if (d.accepted) out += d.id + '\n';
  return out;
}

}  // namespace activessf
