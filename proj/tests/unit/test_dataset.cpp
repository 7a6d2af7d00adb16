#include <doctest.h>

#include "scriptoria/dataset.hpp"
#include "scriptoria/random.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

using namespace scriptoria;

namespace {

// Between-class variance of threshold t computed straight from the pixel lists.
double between_class(const std::vector<int>& bins, int t) {
  std::vector<double> lo, hi;
  for (int b : bins) (b < t ? lo : hi).push_back(b);
  if (lo.empty() || hi.empty()) return 0.0;
  auto mean = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  const double n = static_cast<double>(bins.size());
  const double w0 = static_cast<double>(lo.size()) / n, w1 = static_cast<double>(hi.size()) / n;
  const double d = mean(lo) - mean(hi);
  return w0 * w1 * d * d;
}

}  // namespace

TEST_CASE("split_csv handles quotes and trimming") {
  auto f = split_csv(R"( a , "b,c" ,"say ""hi""")");
  REQUIRE(f.size() == 3);
  CHECK(f[0] == "a");
  CHECK(f[1] == "b,c");
  CHECK(f[2] == "say \"hi\"");
  CHECK(quote_csv("plain") == "plain");
  CHECK(split_csv(quote_csv("x,\"y\""))[0] == "x,\"y\"");
}

TEST_CASE("manifest parsing") {
  const auto m = parse_manifest("path,label,split\n# comment\nimg/a.png,w1,train\nimg/b.png,w1,test\n\n", "/data");
  REQUIRE(m.entries.size() == 2);
  CHECK(m.entries[1].split == Split::Test);
  CHECK(m.resolve(m.entries[0]) == std::filesystem::path("/data/img/a.png"));
  CHECK(m.indices(Split::Train) == std::vector<std::size_t>{0});
  CHECK(parse_manifest(format_manifest(m), "/data").entries.size() == 2);

  SUBCASE("rejects malformed rows") {
    CHECK_THROWS_AS(parse_manifest("a.png,w1\n", "."), Error);
    CHECK_THROWS_AS(parse_manifest("a.png,w1,val\n", "."), Error);
    CHECK_THROWS_AS(parse_manifest("a.png,w1,train\na.png,w2,test\n", "."), Error);
    CHECK_THROWS_AS(parse_manifest("a.png,,train\n", "."), Error);
  }
}

TEST_CASE("otsu threshold maximizes between-class variance") {
  Rng rng(11);
  for (int trial = 0; trial < 30; ++trial) {
    GrayImage img(24, 16);
    const double dark = 0.1 + 0.3 * uniform01(rng), bright = 0.6 + 0.3 * uniform01(rng);
    for (auto& v : img.values) {
      const double c = uniform01(rng) < 0.3 ? dark : bright;
      v = static_cast<float>(std::clamp(c + 0.05 * standard_normal(rng), 0.0, 1.0));
    }
    std::vector<int> bins;
    for (float v : img.values) bins.push_back(static_cast<int>(std::lround(v * 255.f)));
    double best = 0.0;
    for (int t = 1; t < 256; ++t) best = std::max(best, between_class(bins, t));
    const int t = otsu_threshold(img);
    CHECK(between_class(bins, t) >= best * (1.0 - 1e-12));

    const auto bin = binarize_otsu(img);
    for (std::size_t i = 0; i < bins.size(); ++i) CHECK(bin.values[i] == (bins[i] < t ? 0 : 1));
  }
}

TEST_CASE("otsu on a constant image keeps everything as background") {
  GrayImage img(8, 8, 0.5f);
  CHECK(otsu_threshold(img) == 0);
  const auto bin = binarize_otsu(img);
  CHECK(std::all_of(bin.values.begin(), bin.values.end(), [](auto v) { return v == 1; }));
}

TEST_CASE("standardize_patch gives zero mean and unit deviation") {
  Patch p;
  Rng rng(3);
  for (auto& v : p.pixels) v = static_cast<float>(uniform01(rng));
  const auto s = standardize_patch(p);
  CHECK_FALSE(s.constant);
  double mean = 0.0, var = 0.0;
  for (float v : s.patch.pixels) mean += v;
  mean /= kPatchPixels;
  for (float v : s.patch.pixels) var += (v - mean) * (v - mean);
  CHECK(mean == doctest::Approx(0.0).epsilon(1e-6));
  CHECK(var / kPatchPixels == doctest::Approx(1.0).epsilon(1e-5));

  Patch flat;
  flat.pixels.fill(0.25f);
  const auto z = standardize_patch(flat);
  CHECK(z.constant);
  CHECK(std::all_of(z.patch.pixels.begin(), z.patch.pixels.end(), [](float v) { return v == 0.f; }));
}

TEST_CASE("pgm round trip") {
  GrayImage img(5, 3);
  for (std::size_t i = 0; i < img.values.size(); ++i) img.values[i] = static_cast<float>(i * 17 % 256) / 255.f;
  const auto path = std::filesystem::temp_directory_path() / "scriptoria_rt.pgm";
  save_pgm(img, path);
  const auto back = load_image(path);
  REQUIRE(back.width == 5);
  REQUIRE(back.height == 3);
  for (std::size_t i = 0; i < img.values.size(); ++i) CHECK(back.values[i] == doctest::Approx(img.values[i]));
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_image(path), Error);
}
