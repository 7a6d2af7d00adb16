#include <doctest.h>

#include "scriptoria/encoding.hpp"
#include "scriptoria/random.hpp"

#include "oracles.hpp"
#include "synthetic.hpp"

#include <cmath>

using namespace scriptoria;
using namespace scriptoria::testing;

namespace {

Codebook codebook_of(const Matrix& centers) {
  Codebook cb;
  cb.centers = centers;
  cb.counts.assign(static_cast<std::size_t>(centers.rows()), 0);
  return cb;
}

Matrix rows(std::initializer_list<std::initializer_list<double>> r) {
  Matrix m(static_cast<Eigen::Index>(r.size()), static_cast<Eigen::Index>(r.begin()->size()));
  Eigen::Index i = 0;
  for (const auto& row : r) {
    Eigen::Index j = 0;
    for (double v : row) m(i, j++) = v;
    ++i;
  }
  return m;
}

std::vector<Matrix> small_training_sets(std::uint64_t seed, std::size_t writers = 12) {
  ScribeParams p;
  p.writers = writers;
  p.documents_per_writer = 3;
  p.descriptors_per_document = 80;
  p.dim = 8;
  p.components = 4;
  return make_scribes(p, make_background(4, 8, seed), seed + 1).documents;
}

MVladParams small_mvlad(std::size_t k = 6) {
  MVladParams p;
  p.kmeans.k = k;
  p.kmeans.batch_size = 256;
  p.n_codebooks = 3;
  return p;
}

}  // namespace

TEST_CASE("VLAD hand example") {
  const auto cb = codebook_of(rows({{0, 0}, {10, 0}}));
  const Matrix d = rows({{1, 0}, {10, 1}});
  const Vector raw = vlad_residuals(d, cb);
  CHECK(raw == Vector(Eigen::Vector4d(1, 0, 0, 1)));
  CHECK(brute_force_vlad(d, cb.centers) == raw);
  const auto e = vlad_encode(d, cb);
  CHECK_FALSE(e.zero);
  CHECK(e.values.isApprox(Vector(Eigen::Vector4d(1, 0, 0, 1) / std::sqrt(2.0))));
}

TEST_CASE("VLAD matches the brute-force oracle") {
  Rng rng(77);
  for (int t = 0; t < 200; ++t) {
    const auto k = static_cast<Eigen::Index>(1 + uniform_index(rng, 12));
    const auto d = static_cast<Eigen::Index>(1 + uniform_index(rng, 10));
    const auto n = static_cast<Eigen::Index>(uniform_index(rng, 60));
    const auto cb = codebook_of(random_gaussian(k, d, 1000 + t));
    const Matrix desc = random_gaussian(n, d, 5000 + t);
    CHECK((vlad_residuals(desc, cb) - brute_force_vlad(desc, cb.centers)).cwiseAbs().maxCoeff() <= 1e-6);
  }
}

TEST_CASE("VLAD degenerate cases") {
  const auto cb = codebook_of(rows({{0, 0}, {10, 0}, {0, 10}}));
  const auto e = vlad_encode(rows({{1, 1}, {9, 0}}), cb);
  CHECK(e.values.segment(4, 2).isZero());

  const auto at_center = vlad_encode(rows({{10, 0}}), cb);
  CHECK(at_center.zero);
  CHECK(at_center.values.isZero());

  const auto empty = vlad_encode(Matrix(0, 2), cb);
  CHECK(empty.zero);
  CHECK(empty.values.size() == 6);

  CHECK_THROWS_AS(vlad_encode(Matrix(3, 5), cb), Error);
}

TEST_CASE("VLAD is invariant to descriptor order, exactly") {
  const auto cb = codebook_of(random_gaussian(8, 5, 1));
  const Matrix d = random_gaussian(200, 5, 2);
  Rng rng(3);
  const auto perm = permutation(200, rng);
  Matrix shuffled(200, 5);
  for (std::size_t i = 0; i < perm.size(); ++i) shuffled.row(static_cast<Eigen::Index>(i)) = d.row(perm[i]);
  CHECK(vlad_encode(d, cb).values == vlad_encode(shuffled, cb).values);
  CHECK(sum_pool(d).values == sum_pool(shuffled).values);
}

TEST_CASE("duplicating descriptors") {
  const auto cb = codebook_of(random_gaussian(6, 4, 8));
  const Matrix d = random_gaussian(50, 4, 9);
  Matrix twice(100, 4);
  twice << d, d;
  CHECK((vlad_encode(d, cb, {1.0}).values - vlad_encode(twice, cb, {1.0}).values).cwiseAbs().maxCoeff() < 1e-12);
  const Vector a = vlad_encode(d, cb).values, b = vlad_encode(twice, cb).values;
  for (Eigen::Index i = 0; i < a.size(); ++i) CHECK((a[i] > 0) == (b[i] > 0));
}

TEST_CASE("sum pooling") {
  CHECK(sum_pool(rows({{1, 0}, {0, 1}})).values.isApprox(Vector(Eigen::Vector2d(1, 1) / std::sqrt(2.0))));
  CHECK(sum_pool(rows({{3, 4}})).values.isApprox(Vector(Eigen::Vector2d(0.6, 0.8))));
  const auto zero = sum_pool(rows({{1, -2}, {-1, 2}}));
  CHECK(zero.zero);
  CHECK(zero.values.isZero());
  CHECK_THROWS_AS(sum_pool(Matrix(0, 2)), Error);
}

TEST_CASE("m-VLAD fitting") {
  const auto sets = small_training_sets(4);
  const auto model = fit_mvlad(sets, small_mvlad());
  REQUIRE(model.codebooks.size() == 3);
  for (std::size_t a = 0; a < 3; ++a)
    for (std::size_t b = a + 1; b < 3; ++b) CHECK((model.codebooks[a].centers - model.codebooks[b].centers).norm() > 0.0);
  CHECK(model.concat_dim() == 3 * 6 * 8);
  CHECK(model.output_dim() == sets.size() - 1);

  Matrix whitened(static_cast<Eigen::Index>(sets.size()), static_cast<Eigen::Index>(model.output_dim()));
  for (std::size_t i = 0; i < sets.size(); ++i) {
    whitened.row(static_cast<Eigen::Index>(i)) =
        apply_whitening(model.joint_whitening, mvlad_concat(sets[i], model)).transpose();
  }
  const Matrix cov = covariance(whitened);
  CHECK((cov - Matrix::Identity(cov.rows(), cov.cols())).cwiseAbs().maxCoeff() <= 1e-3);

  for (const auto& s : sets) {
    const auto e = mvlad_encode(s, model);
    CHECK(e.values.size() == static_cast<Eigen::Index>(model.output_dim()));
    CHECK(e.values.norm() == doctest::Approx(1.0).epsilon(1e-6));
  }
  CHECK(mvlad_encode(sets[0], model).values == mvlad_encode(sets[0], model).values);

  const auto again = fit_mvlad(sets, small_mvlad());
  CHECK(again.joint_whitening.basis == model.joint_whitening.basis);

  auto reduced = small_mvlad();
  reduced.pca_dim = 5;
  CHECK(fit_mvlad(sets, reduced).output_dim() == 5);
}

TEST_CASE("m-VLAD with one codebook and identity whitening is VLAD") {
  MVladModel m;
  m.codebooks.push_back(codebook_of(random_gaussian(5, 3, 1)));
  m.joint_whitening = WhiteningTransform::identity(15);
  const Matrix d = random_gaussian(40, 3, 2);
  CHECK(mvlad_encode(d, m).values.isApprox(vlad_encode(d, m.codebooks[0]).values, 1e-12));
}

TEST_CASE("m-VLAD errors") {
  MVladModel unfit;
  CHECK_THROWS_AS(mvlad_encode(Matrix(2, 3), unfit), Error);
  const std::vector<Matrix> tiny = {random_gaussian(3, 2, 1)};
  CHECK_THROWS_AS(fit_mvlad(tiny, small_mvlad(10)), Error);
  CHECK_THROWS_AS(fit_mvlad(std::vector<Matrix>{}, small_mvlad()), Error);
}

TEST_CASE("same-writer documents are more similar than different-writer documents") {
  ScribeParams p;
  p.writers = 2;
  p.documents_per_writer = 6;
  p.descriptors_per_document = 150;
  p.dim = 8;
  p.components = 5;
  const Matrix bg = make_background(5, 8, 31);
  const auto test = make_scribes(p, bg, 32);
  const auto train = small_training_sets(33, 20);
  const auto model = fit_mvlad(train, small_mvlad(8));
  std::vector<Vector> enc;
  for (const auto& d : test.documents) enc.push_back(mvlad_encode(d, model).values);
  double intra = 0.0, inter = 0.0;
  int n_intra = 0, n_inter = 0;
  for (std::size_t i = 0; i < enc.size(); ++i)
    for (std::size_t j = i + 1; j < enc.size(); ++j) {
      const double s = enc[i].dot(enc[j]);
      if (test.writers[i] == test.writers[j]) {
        intra += s;
        ++n_intra;
      } else {
        inter += s;
        ++n_inter;
      }
    }
  CHECK(intra / n_intra > inter / n_inter);
}

TEST_CASE("encoder models round-trip through their file format") {
  const auto sets = small_training_sets(9);
  for (auto kind : {EncoderKind::Sum, EncoderKind::Vlad, EncoderKind::MVlad}) {
    auto m = fit_encoder(kind, sets, small_mvlad());
    m.config_hash = 0x1234;
    const std::string bytes = encode_encoder_model(m);
    const auto back = decode_encoder_model(bytes, "m");
    CHECK(back.kind == kind);
    CHECK(back.config_hash == 0x1234);
    CHECK(back.output_dim() == m.output_dim());
    CHECK(back.encode(sets[1]).values == m.encode(sets[1]).values);
    CHECK(encode_encoder_model(back) == bytes);
    CHECK_THROWS_AS(decode_encoder_model(bytes.substr(0, bytes.size() - 3), "m"), Error);
    CHECK_THROWS_AS(m.encode(Matrix(4, 3)), Error);
  }
  CHECK(fit_encoder(EncoderKind::Vlad, sets, small_mvlad()).output_dim() == 6 * 8);
  CHECK(fit_encoder(EncoderKind::Sum, sets, small_mvlad()).output_dim() == 8);
}
