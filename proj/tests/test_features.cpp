#include <doctest.h>
#include <zlib.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <random>

#include "activessf/errors.hpp"
#include "activessf/features.hpp"
#include "activessf/file_util.hpp"
#include "oracles.hpp"

using namespace activessf;

namespace {

// Independent little-endian assembly of an AFV1 file.
struct Bytes {
  std::vector<std::uint8_t> b;
  template <typename T>
  void le(T v) {
    std::uint8_t raw[sizeof(T)];
    std::memcpy(raw, &v, sizeof(T));
    b.insert(b.end(), raw, raw + sizeof(T));
  }
  void str(const std::string& s) { b.insert(b.end(), s.begin(), s.end()); }
  void seal() {
    const auto c = static_cast<std::uint32_t>(::crc32(0L, b.data(), static_cast<uInt>(b.size())));
    for (int i = 0; i < 4; ++i) b.push_back(static_cast<std::uint8_t>(c >> (8 * i)));
  }
};

FeatureSet sample_set() {
  FeatureSet s(3);
  s.add({"a", {1.0, -2.5, 0.125}, 4});
  s.add({"crop_7", {0.0, 1e-300, 3.0}, std::nullopt});
  return s;
}

}  // namespace

TEST_CASE("afv1 byte layout") {
  Bytes want;
  want.str("AFV1");
  want.le<std::uint32_t>(3);
  want.le<std::uint64_t>(2);
  want.le<std::uint32_t>(1);
  want.str("a");
  want.le<std::uint8_t>(1);
  want.le<std::int32_t>(4);
  for (double x : {1.0, -2.5, 0.125}) want.le(x);
  want.le<std::uint32_t>(6);
  want.str("crop_7");
  want.le<std::uint8_t>(0);
  want.le<std::int32_t>(-1);
  for (double x : {0.0, 1e-300, 3.0}) want.le(x);
  want.seal();

  CHECK(encode_features(sample_set()) == want.b);
  CHECK(decode_features(want.b).same_records(sample_set()));
}

TEST_CASE("afv1 round trip keeps every bit") {
  std::mt19937_64 rng(3);
  FeatureSet s(17);
  for (int i = 0; i < 50; ++i) {
    std::vector<double> v(17);
    for (auto& x : v) {
      std::uint64_t bits = rng();
      std::memcpy(&x, &bits, 8);
      if (!std::isfinite(x)) x = static_cast<double>(bits);
    }
    v[0] = -0.0;
    s.add({"id" + std::to_string(i), v, i % 3 ? std::optional<int>(i) : std::nullopt});
  }
  const auto bytes = encode_features(s);
  const FeatureSet back = decode_features(bytes);
  CHECK(back.same_records(s));
  CHECK(std::signbit(back[0].values[0]));
  CHECK(encode_features(back) == bytes);
}

TEST_CASE("empty set round trips with its dimension") {
  const FeatureSet s(86);
  const FeatureSet back = decode_features(encode_features(s));
  CHECK(back.dim() == 86);
  CHECK(back.empty());
}

TEST_CASE("corruption is detected") {
  const auto good = encode_features(sample_set());
  for (std::size_t i = 0; i < good.size(); ++i) {
    auto bad = good;
    bad[i] ^= 0x10;
    CHECK_THROWS_AS(decode_features(bad), FormatError);
  }
  for (std::size_t n = 0; n < good.size(); ++n)
    CHECK_THROWS_AS(decode_features(std::span(good).first(n)), FormatError);
  auto longer = good;
  longer.push_back(0);
  CHECK_THROWS_AS(decode_features(longer), FormatError);
}

TEST_CASE("format errors carry the record index") {
  Bytes f;
  f.str("AFV1");
  f.le<std::uint32_t>(1);
  f.le<std::uint64_t>(2);
  f.le<std::uint32_t>(1);
  f.str("x");
  f.le<std::uint8_t>(0);
  f.le<std::int32_t>(-1);
  f.le(1.0);
  f.le<std::uint32_t>(1);
  f.str("y");
  f.le<std::uint8_t>(1);
  f.le<std::int32_t>(-3);
  f.le(2.0);
  f.seal();
  try {
    decode_features(f.b);
    FAIL("expected a format error");
  } catch (const FormatError& e) {
    CHECK(e.record() == 1);
  }
}

TEST_CASE("duplicate ids are format errors") {
  Bytes f;
  f.str("AFV1");
  f.le<std::uint32_t>(1);
  f.le<std::uint64_t>(2);
  for (int i = 0; i < 2; ++i) {
    f.le<std::uint32_t>(1);
    f.str("z");
    f.le<std::uint8_t>(0);
    f.le<std::int32_t>(-1);
    f.le(0.5);
  }
  f.seal();
  CHECK_THROWS_AS(decode_features(f.b), FormatError);
}

TEST_CASE("feature set rejects bad vectors") {
  FeatureSet s(2);
  CHECK_THROWS_AS(s.add({"a", {1.0}, std::nullopt}), std::invalid_argument);
  CHECK_THROWS_AS(s.add({"a", {1.0, std::numeric_limits<double>::quiet_NaN()}, std::nullopt}), std::invalid_argument);
  s.add({"a", {1.0, 2.0}, std::nullopt});
  CHECK_THROWS_AS(s.add({"a", {1.0, 2.0}, std::nullopt}), std::invalid_argument);
  CHECK(s.size() == 1);
}

TEST_CASE("csv features") {
  const FeatureSet s = parse_features_csv("id,label,v0,v1\np,3,1.5,2\nq,,0,-1e-3\n");
  REQUIRE(s.size() == 2);
  CHECK(s.dim() == 2);
  CHECK(s[0].label == 3);
  CHECK_FALSE(s[1].label.has_value());
  CHECK(s[1].values[1] == -1e-3);
  CHECK_THROWS_AS(parse_features_csv("id,v0\n"), FormatError);
  CHECK_THROWS_AS(parse_features_csv(""), FormatError);
  try {
    parse_features_csv("id,label,v0,v1\np,1,1,2\nq,2,1\n");
    FAIL("expected a dimension mismatch");
  } catch (const FormatError& e) {
    CHECK(e.record() == 1);
  }
  CHECK_THROWS_AS(parse_features_csv("id,label,v0\np,x,1\n"), FormatError);
  CHECK_THROWS_AS(parse_features_csv("id,label,v0\np,1,zz\n"), FormatError);
}

TEST_CASE("files on disk") {
  oracle::TempDir dir("features");
  write_features(sample_set(), dir.path / "s.afv");
  CHECK(read_features(dir.path / "s.afv").same_records(sample_set()));
  CHECK(load_features(dir.path / "s.afv").same_records(sample_set()));
  CHECK_FALSE(std::filesystem::exists(dir.path / "s.afv.tmp"));
  {
    std::ofstream(dir.path / "s.csv") << "id,label,v0,v1,v2\na,4,1,-2.5,0.125\ncrop_7,,0,1e-300,3\n";
  }
  CHECK(load_features(dir.path / "s.csv").same_records(sample_set()));
  CHECK_THROWS_AS(read_features(dir.path / "missing.afv"), DataError);
}

TEST_CASE("baseline features") {
  RasterImage img(10, 10, Rgb{255, 0, 16});
  for (int x = 0; x < 10; ++x) img.set_pixel(x, 0, Rgb{0, 0, 0});
  const FeatureVector v = baseline_extract(img, "b", 2);
  REQUIRE(v.dim() == kBaselineDim);
  CHECK(v.id == "b");
  CHECK(v.label == 2);
  CHECK(v.values[0 * 16 + 15] == 0.9);
  CHECK(v.values[0 * 16 + 0] == 0.1);
  CHECK(v.values[1 * 16 + 0] == 1.0);
  CHECK(v.values[2 * 16 + 1] == 0.9);
  // Hue bins: hue of (255,0,16) is 180 - 16*30/255 ~ 178.1 -> last bin; black -> bin 0.
  CHECK(v.values[48 + 15] == 0.9);
  CHECK(v.values[48 + 0] == 0.1);
  CHECK(v.values[64 + 15] == 0.9);
  CHECK(v.values[64 + 0] == 0.1);
  CHECK(std::abs(v.values[80] - 0.9) < 1e-15);
  CHECK(std::abs(v.values[83] - 0.3) < 1e-12);
  CHECK(v.values[84] == 0.0);
  for (int h = 0; h < 5; ++h) {
    double sum = 0;
    for (int i = 0; i < 16; ++i) sum += v.values[h * 16 + i];
    CHECK(std::abs(sum - 1.0) < 1e-12);
  }
  CHECK_THROWS_AS(baseline_extract(RasterImage(7, 20)), std::invalid_argument);
}
