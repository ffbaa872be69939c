#include <doctest.h>

#include <algorithm>
#include <random>
#include <stdexcept>

#include "activessf/errors.hpp"
#include "activessf/synth.hpp"

using namespace activessf;
using namespace activessf::synth;

namespace {

SyntheticSpec tail_spec(std::uint64_t seed) {
  SyntheticSpec s;
  s.class_count = 6;
  s.sizes = {500, 500, 50, 50, 5, 5};
  s.dim = 8;
  s.seed = seed;
  return s;
}

}  // namespace

TEST_CASE("power-law sizes") {
  SyntheticSpec s;
  const auto sizes = class_sizes(s);
  REQUIRE(sizes.size() == 11);
  CHECK(sizes[0] == 200);
  CHECK(sizes[1] == 71);
  CHECK(sizes[10] == 5);
  CHECK(std::ranges::is_sorted(sizes, std::greater<>()));
}

TEST_CASE("generation is deterministic") {
  const SyntheticData a = generate(tail_spec(3));
  const SyntheticData b = generate(tail_spec(3));
  CHECK(a.labeled.same_records(b.labeled));
  CHECK(a.candidates.same_records(b.candidates));
  CHECK(a.truth == b.truth);
  CHECK_FALSE(generate(tail_spec(4)).labeled.same_records(a.labeled));
}

TEST_CASE("generated counts") {
  SyntheticSpec s = tail_spec(1);
  s.distractor_fraction = 0.5;
  const SyntheticData d = generate(s);
  CHECK(d.labeled.size() == 1110);
  const auto distractors = std::ranges::count_if(d.truth, [](const auto& kv) { return kv.second < 0; });
  CHECK(distractors == 1110);
  CHECK(d.candidates.size() == 2220);
  for (const auto& v : d.labeled) CHECK(v.label.has_value());
}

TEST_CASE("zero spread puts candidates on the centers") {
  SyntheticSpec s;
  s.class_count = 2;
  s.sizes = {100, 10};
  s.spread = 0.0;
  s.dim = 2;
  s.distractor_fraction = 0.0;
  const SyntheticData d = generate(s);
  const BenchResult r = run_bench(d, Policy::adaptive, 0.5);
  CHECK(r.metrics.accepted == d.candidates.size());
  for (const auto& dec : r.manifest.decisions) CHECK(dec.distance < 1e-12);
  for (double rec : r.metrics.class_recall) CHECK(rec == 1.0);
}

TEST_CASE("no distractors means no contamination") {
  SyntheticSpec s = tail_spec(5);
  s.distractor_fraction = 0.0;
  const SyntheticData d = generate(s);
  for (Policy p : {Policy::adaptive, Policy::fixed_mean, Policy::fixed_lower})
    CHECK(run_bench(d, p, 0.5).metrics.contamination == 0.0);
}

TEST_CASE("empty manifest metrics") {
  const SyntheticData d = generate(tail_spec(2));
  const SelectionMetrics m = evaluate({}, d.truth, d.sizes);
  CHECK(m.accepted == 0);
  CHECK(m.contamination == 0.0);
  CHECK(m.undefined_rate);
  CHECK(m.rare_recall == 0.0);
  CHECK(m.common_recall == 0.0);
  for (double r : m.class_recall) CHECK(r == 0.0);
}

TEST_CASE("perfect manifest metrics") {
  const SyntheticData d = generate(tail_spec(2));
  SelectionManifest man;
  for (const auto& [id, c] : d.truth) man.decisions.push_back({id, 0, 0.0, 0.0, c >= 0});
  const SelectionMetrics m = evaluate(man, d.truth, d.sizes);
  CHECK(m.contamination == 0.0);
  CHECK(m.rare_recall == 1.0);
  CHECK(m.common_recall == 1.0);
  CHECK_FALSE(m.undefined_rate);
  CHECK(m.rare_classes == std::vector<std::size_t>{4, 5});
  CHECK(m.common_classes == std::vector<std::size_t>{0, 1});
}

TEST_CASE("metrics ignore manifest order") {
  const SyntheticData d = generate(tail_spec(8));
  BenchResult r = run_bench(d, Policy::adaptive, 0.5);
  const SelectionMetrics before = evaluate(r.manifest, d.truth, d.sizes);
  std::mt19937 rng(1);
  std::ranges::shuffle(r.manifest.decisions, rng);
  const SelectionMetrics after = evaluate(r.manifest, d.truth, d.sizes);
  CHECK(before.class_recall == after.class_recall);
  CHECK(before.contamination == after.contamination);
  CHECK(before.rare_recall == after.rare_recall);
}

TEST_CASE("unknown ids are data errors") {
  const SyntheticData d = generate(tail_spec(2));
  SelectionManifest man;
  man.decisions.push_back({"nobody", 0, 0, 0, true});
  CHECK_THROWS_AS(evaluate(man, d.truth, d.sizes), DataError);
}

TEST_CASE("adaptive is never worse than fixed-at-lb on rare classes") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const SyntheticData d = generate(tail_spec(seed));
    const double adaptive = run_bench(d, Policy::adaptive, 0.5).metrics.rare_recall;
    const double fixed = run_bench(d, Policy::fixed_lower, 0.5).metrics.rare_recall;
    CHECK(adaptive >= fixed);
  }
}

TEST_CASE("synthetic settings validation") {
  SyntheticSpec s;
  s.dim = 5;
  CHECK_THROWS_AS(validate(s), std::invalid_argument);
  s = SyntheticSpec{};
  s.separation = 0;
  CHECK_THROWS_AS(validate(s), std::invalid_argument);
  s = SyntheticSpec{};
  s.sizes = {3, 0, 2, 1, 1, 1, 1, 1, 1, 1, 1};
  CHECK_THROWS_AS(validate(s), std::invalid_argument);
  s = SyntheticSpec{};
  s.distractor_fraction = 1.0;
  CHECK_THROWS_AS(validate(s), std::invalid_argument);
}

TEST_CASE("synthetic settings text") {
  const SyntheticSpec s = parse_spec("# comment\nsizes = 500,500,50,50,5,5\ndim=8\nseed=12\nspread=0.25\n");
  CHECK(s.class_count == 6);
  CHECK(s.sizes == std::vector<std::size_t>{500, 500, 50, 50, 5, 5});
  CHECK(s.spread == 0.25);
  CHECK(s.seed == 12);
  const SyntheticSpec again = parse_spec(format_spec(s));
  CHECK(again.sizes == s.sizes);
  CHECK(again.dim == s.dim);
  CHECK(again.spread == s.spread);
  CHECK_THROWS_AS(parse_spec("colour=blue\n"), ConfigError);
  CHECK_THROWS_AS(parse_spec("dim=abc\n"), ConfigError);
  CHECK_THROWS_AS(parse_spec("dim=2\n"), ConfigError);
}

TEST_CASE("policy names") {
  for (Policy p : {Policy::adaptive, Policy::fixed_mean, Policy::fixed_lower}) CHECK(parse_policy(policy_name(p)) == p);
  CHECK_THROWS_AS(parse_policy("greedy"), std::invalid_argument);
}

TEST_CASE("bench report lists the metrics") {
  const SyntheticData d = generate(tail_spec(1));
  const BenchResult r = run_bench(d, Policy::fixed_lower, 0.5);
  const std::string text = format_metrics(r.metrics, tail_spec(1), Policy::fixed_lower, 0.5);
  CHECK(text.find("# policy=fixed-lb\n") != std::string::npos);
  CHECK(text.find("rare_recall,") != std::string::npos);
  CHECK(text.find("class,recall\n") != std::string::npos);
}

TEST_CASE("slide corpus layout") {
  SlideCorpusSpec spec;
  spec.image_count = 20;
  spec.valid_cells = 14;
  const auto slides = generate_slides(spec);
  REQUIRE(slides.size() == 20);
  std::size_t cells = 0;
  for (const auto& s : slides) {
    cells += s.valid_cells.size();
    CHECK(s.valid_cells.size() == s.cell_classes.size());
    CHECK(s.image.width() == 256);
    for (const auto& b : s.valid_cells) {
      CHECK(b.w >= 80);
      CHECK(b.h >= 80);
    }
  }
  CHECK(cells == 14);
  CHECK(slides[19].valid_cells.empty());
  CHECK(slides[0].id == "slide_000");
  const auto again = generate_slides(spec);
  CHECK(again[3].image == slides[3].image);
}

TEST_CASE("labeled crops") {
  const auto crops = generate_labeled_crops(fixture_label_counts(40), 5);
  const auto counts = fixture_label_counts(40);
  CHECK(counts[0] == 40);
  CHECK(counts.back() >= 4);
  std::size_t total = 0;
  for (auto c : counts) total += c;
  CHECK(crops.size() == total);
  CHECK(crops.front().id == "mk_c0_0");
  CHECK(crops.back().label == 10);
}
