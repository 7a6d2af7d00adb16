#include <doctest.h>

#include "scriptoria/formats.hpp"
#include "scriptoria/random.hpp"

#include <bit>
#include <filesystem>

using namespace scriptoria;

namespace {

// Independent little-endian writer, as an external producer would emit it.
void put_le(std::string& s, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

Matrix random_matrix(Eigen::Index r, Eigen::Index c, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = standard_normal(rng);
  return m;
}

}  // namespace

TEST_CASE("LDSC matches the byte layout written by an external producer") {
  const float vals[] = {1.5f, -2.25f, 0.f, 3.0e-7f, 100.f, -0.5f};
  std::string bytes = "LDSC";
  put_le(bytes, 1, 2);
  put_le(bytes, 2, 4);
  put_le(bytes, 3, 4);
  for (float v : vals) put_le(bytes, std::bit_cast<std::uint32_t>(v), 4);

  const Matrix m = decode_ldsc(bytes, "ext");
  REQUIRE(m.rows() == 2);
  REQUIRE(m.cols() == 3);
  for (int i = 0; i < 6; ++i) CHECK(static_cast<float>(m(i / 3, i % 3)) == vals[i]);
  CHECK(encode_ldsc(m) == bytes);
}

TEST_CASE("LDSC rejects corrupt input") {
  const std::string good = encode_ldsc(random_matrix(4, 64, 1));
  CHECK_THROWS_AS(decode_ldsc("XDSC" + good.substr(4), "x"), Error);
  CHECK_THROWS_AS(decode_ldsc(good.substr(0, good.size() - 1), "x"), Error);
  std::string newer = good;
  newer[4] = 9;
  CHECK_THROWS_AS(decode_ldsc(newer, "x"), Error);
  try {
    decode_ldsc(good.substr(0, 3), "x");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Format);
  }
}

TEST_CASE("LDSC with zero rows round-trips") {
  const Matrix empty(0, 64);
  const Matrix back = decode_ldsc(encode_ldsc(empty), "e");
  CHECK(back.rows() == 0);
  CHECK(back.cols() == 64);
}

TEST_CASE("GDSC round trip preserves ids and f32 values") {
  GlobalDescriptorSet set;
  set.ids = {"a/b.png", "ü.png", ""};
  set.values = random_matrix(3, 7, 2);
  const auto back = decode_gdsc(encode_gdsc(set), "g");
  CHECK(back.ids == set.ids);
  for (Eigen::Index i = 0; i < set.values.size(); ++i)
    CHECK(back.values.data()[i] == static_cast<double>(static_cast<float>(set.values.data()[i])));
  CHECK(encode_gdsc(back) == encode_gdsc(set));

  set.ids.pop_back();
  CHECK_THROWS_AS(encode_gdsc(set), Error);
}

TEST_CASE("SPTC stores binary patches as bytes and gray patches as floats") {
  PatchBlock bin;
  bin.pixels.assign(2 * 32 * 32, 1.f);
  bin.pixels[5] = 0.f;
  const std::string b = encode_sptc(bin);
  CHECK(b.size() == 4 + 2 + 4 + 2 + 1 + 2 * 1024);
  const auto back = decode_sptc(b, "p");
  CHECK(back.count() == 2);
  CHECK(back.pixels == bin.pixels);

  PatchBlock gray;
  gray.bytes_per_pixel = 4;
  gray.pixels.assign(32 * 32, -1.25f);
  CHECK(decode_sptc(encode_sptc(gray), "p").pixels == gray.pixels);

  gray.pixels.pop_back();
  CHECK_THROWS_AS(encode_sptc(gray), Error);
}

TEST_CASE("SLBL round trip") {
  const std::vector<std::uint32_t> labels = {0, 4999, 17, 17};
  const std::string bytes = encode_slbl(labels);
  CHECK(bytes.size() == 4 + 4 + 16);
  CHECK(decode_slbl(bytes, "l") == labels);
  CHECK_THROWS_AS(decode_slbl(bytes + "x", "l"), Error);
}

TEST_CASE("SVMW round trip") {
  SvmWeights w{0.1, Vector::LinSpaced(5, -1.0, 1.0)};
  const auto back = decode_svmw(encode_svmw(w), "w");
  CHECK(back.C == 0.1);
  CHECK((back.w - w.w).cwiseAbs().maxCoeff() < 1e-7);
}

TEST_CASE("atomic writes leave no temp file and replace content") {
  const auto dir = std::filesystem::temp_directory_path() / "scriptoria_atomic";
  std::filesystem::remove_all(dir);
  const auto path = dir / "nested" / "x.bin";
  write_file_atomic(path, "first");
  write_file_atomic(path, "second");
  CHECK(read_file(path) == "second");
  std::size_t files = 0;
  for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(path.parent_path())) ++files;
  CHECK(files == 1);
  std::filesystem::remove_all(dir);
}

TEST_CASE("fnv1a64 reference values") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
}
