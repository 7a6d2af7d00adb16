#include <doctest.h>

#include "scriptoria/random.hpp"
#include "scriptoria/retrieval.hpp"
#include "scriptoria/svm.hpp"

#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <set>

using namespace scriptoria;
using namespace scriptoria::testing;

namespace {

Matrix scalar(double v) { return Matrix::Constant(1, 1, v); }

// Minimum of a 1-D objective over a dense grid, refined once around the best cell.
double grid_minimum(const std::function<double(double)>& f, double lo, double hi) {
  double best_w = lo, best = f(lo);
  for (int pass = 0; pass < 2; ++pass) {
    const int steps = 200000;
    const double h = (hi - lo) / steps;
    for (int i = 0; i <= steps; ++i) {
      const double w = lo + h * i;
      const double v = f(w);
      if (v < best) {
        best = v;
        best_w = w;
      }
    }
    lo = best_w - h;
    hi = best_w + h;
  }
  return best;
}

Matrix blob(Eigen::Index n, double cx, double cy, double sd, std::uint64_t seed) {
  Matrix m = sd * random_gaussian(n, 2, seed);
  m.col(0).array() += cx;
  m.col(1).array() += cy;
  return m;
}

std::vector<std::string> repeat_labels(std::initializer_list<std::pair<std::string, int>> spec) {
  std::vector<std::string> out;
  for (const auto& [l, n] : spec) out.insert(out.end(), static_cast<std::size_t>(n), l);
  return out;
}

}  // namespace

TEST_CASE("objective and gradient definitions") {
  const Matrix pos = random_gaussian(3, 4, 1), neg = random_gaussian(5, 4, 2);
  const SvmProblem p = make_svm_problem(pos, neg, 2.0, 0.5);
  const Vector w = random_gaussian(4, 1, 3).col(0);
  double expected = 0.5 * w.squaredNorm();
  for (Eigen::Index i = 0; i < 3; ++i) expected += 2.0 * std::pow(std::max(0.0, 1.0 - pos.row(i).dot(w)), 2);
  for (Eigen::Index i = 0; i < 5; ++i) expected += 0.5 * std::pow(std::max(0.0, 1.0 + neg.row(i).dot(w)), 2);
  CHECK(svm_objective(p, w) == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("analytic gradient matches central differences") {
  Rng rng(8);
  for (int t = 0; t < 20; ++t) {
    const auto d = static_cast<Eigen::Index>(2 + uniform_index(rng, 10));
    const SvmProblem p = make_svm_problem(random_gaussian(3, d, 100 + t), random_gaussian(12, d, 200 + t),
                                          0.1 + uniform01(rng) * 5.0, 0.1 + uniform01(rng));
    const Vector w = 0.5 * random_gaussian(d, 1, 300 + t).col(0);
    const Vector g = svm_gradient(p, w);
    Vector fd(d);
    const double h = 1e-6;
    for (Eigen::Index i = 0; i < d; ++i) {
      Vector a = w, b = w;
      a[i] += h;
      b[i] -= h;
      fd[i] = (svm_objective(p, a) - svm_objective(p, b)) / (2.0 * h);
    }
    CHECK((g - fd).norm() / std::max(1.0, fd.norm()) <= 1e-5);
  }
}

TEST_CASE("solver objective agrees with a long reference solve") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const SvmProblem p = make_svm_problem(random_gaussian(1, 20, seed), random_gaussian(60, 20, seed + 50), 30.0, 0.5);
    const auto sol = solve_svm(p);
    CHECK(sol.converged);
    CHECK(sol.gradient_norm <= 1e-6);
    SvmOptions longer;
    longer.tolerance = 0.0;
    longer.max_iterations = 10 * SvmOptions{}.max_iterations;
    const auto ref = solve_svm(p, longer);
    CHECK(std::abs(sol.objective - ref.objective) <= 1e-6 * std::abs(ref.objective));
  }
}

TEST_CASE("1-D separable pair against a grid oracle") {
  const double C = 1000.0;
  const auto m = train_linear_svm(scalar(1.0), scalar(-1.0), C);
  CHECK(m.w[0] > 0.0);
  CHECK(m.w[0] >= 1.0 - 1e-3);
  CHECK(m.c_p == doctest::Approx(C));
  CHECK(m.c_n == doctest::Approx(C));
  auto f = [&](double w) { return 0.5 * w * w + 2.0 * C * std::pow(std::max(0.0, 1.0 - w), 2); };
  CHECK(std::abs(m.objective - grid_minimum(f, -3.0, 3.0)) <= 1e-6 * std::max(1.0, m.objective));
}

TEST_CASE("identical positive and negative point against a grid oracle") {
  for (double C : {0.01, 1.0, 50.0}) {
    const Matrix x = Matrix::Constant(1, 1, 0.7);
    const auto m = train_linear_svm(x, x, C);
    auto f = [&](double w) {
      return 0.5 * w * w + m.c_p * std::pow(std::max(0.0, 1.0 - 0.7 * w), 2) +
             m.c_n * std::pow(std::max(0.0, 1.0 + 0.7 * w), 2);
    };
    CHECK(std::abs(m.objective - grid_minimum(f, -3.0, 3.0)) <= 1e-6 * std::max(1.0, m.objective));
    CHECK(std::abs(m.w[0]) < 1e-6);
  }
}

TEST_CASE("separable 2-D blobs are fit perfectly") {
  const Matrix pos = blob(40, 3, 3, 0.5, 1), neg = blob(60, -3, -3, 0.5, 2);
  const auto m = train_linear_svm(pos, neg, 100.0);
  for (Eigen::Index i = 0; i < pos.rows(); ++i) CHECK(pos.row(i).dot(m.w) > 0.0);
  for (Eigen::Index i = 0; i < neg.rows(); ++i) CHECK(neg.row(i).dot(m.w) < 0.0);
  CHECK(m.c_p == doctest::Approx(100.0 * 100 / 80));
  CHECK(m.c_n == doctest::Approx(100.0 * 100 / 120));
}

TEST_CASE("training errors") {
  CHECK_THROWS_AS(train_linear_svm(Matrix(0, 2), blob(3, 0, 0, 1, 1), 1.0), Error);
  CHECK_THROWS_AS(train_linear_svm(blob(3, 0, 0, 1, 1), Matrix(0, 2), 1.0), Error);
  Matrix bad = blob(3, 0, 0, 1, 1);
  bad(1, 1) = std::nan("");
  CHECK_THROWS_AS(train_linear_svm(bad, blob(3, 0, 0, 1, 2), 1.0), Error);
  CHECK_THROWS_AS(train_linear_svm(blob(3, 0, 0, 1, 1), blob(3, 0, 0, 1, 2), 0.0), Error);
}

TEST_CASE("exemplar SVM features") {
  Matrix neg = random_gaussian(30, 6, 4);
  neg.col(5).setZero();
  Vector q = Vector::Zero(6);
  q[5] = 2.0;
  const Vector f = esvm_feature(q, neg, 1.0);
  CHECK(f.norm() == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(f.dot(q) > 0.0);
  CHECK(esvm_feature(q, neg, 1.0) == f);
  CHECK_THROWS_AS(esvm_feature(Vector::Zero(6), neg, 1.0), Error);
  try {
    esvm_feature(Vector::Zero(6), neg, 1.0);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Degenerate);
  }

  Matrix queries = random_gaussian(4, 6, 5);
  queries.row(2).setZero();
  std::vector<std::uint8_t> zero;
  const Matrix all = esvm_encode_all(queries, neg, 1.0, {}, &zero);
  CHECK(zero == std::vector<std::uint8_t>{0, 0, 1, 0});
  CHECK(all.row(2).isZero());
  CHECK(Vector(all.row(1).transpose()) == esvm_feature(queries.row(1).transpose(), neg, 1.0));
}

TEST_CASE("duplicating negatives while halving their cost changes nothing") {
  const Matrix pos = random_gaussian(1, 8, 1), neg = random_gaussian(25, 8, 2);
  Matrix doubled(50, 8);
  doubled << neg, neg;
  const SvmProblem a = make_svm_problem(pos, neg, 3.0, 0.4);
  const SvmProblem b = make_svm_problem(pos, doubled, 3.0, 0.2);
  for (std::uint64_t s = 0; s < 5; ++s) {
    const Vector w = random_gaussian(8, 1, 10 + s).col(0);
    CHECK(svm_objective(a, w) == doctest::Approx(svm_objective(b, w)).epsilon(1e-13));
  }
  const Vector wa = solve_svm(a).w, wb = solve_svm(b).w;
  CHECK((wa / wa.norm() - wb / wb.norm()).norm() <= 1e-5);
}

TEST_CASE("C grid and folds") {
  const auto g = log_grid();
  REQUIRE(g.size() == 10);
  CHECK(g.front() == doctest::Approx(1e-5));
  CHECK(g.back() == doctest::Approx(1e4));

  const auto labels = repeat_labels({{"a", 3}, {"b", 4}, {"c", 2}, {"d", 5}, {"e", 1}});
  const auto folds = writer_disjoint_folds(labels, 2, 7);
  std::map<std::string, std::set<std::size_t>> seen;
  for (std::size_t i = 0; i < labels.size(); ++i) seen[labels[i]].insert(folds[i]);
  for (const auto& [l, s] : seen) CHECK(s.size() == 1);
  CHECK(std::set<std::size_t>(folds.begin(), folds.end()).size() == 2);
  CHECK_THROWS_AS(writer_disjoint_folds(repeat_labels({{"a", 4}}), 2, 0), Error);

  const auto strat = stratified_folds(repeat_labels({{"x", 10}, {"y", 5}}), 5, 1);
  std::map<std::pair<std::size_t, char>, int> cells;
  for (std::size_t i = 0; i < 15; ++i) ++cells[{strat[i], i < 10 ? 'x' : 'y'}];
  for (std::size_t f = 0; f < 5; ++f) {
    CHECK(cells[{f, 'x'}] == 2);
    CHECK(cells[{f, 'y'}] == 1);
  }
}

TEST_CASE("select_C") {
  // Six writers, four documents each, clustered around writer-specific directions.
  Matrix enc(24, 10);
  std::vector<std::string> labels;
  const Matrix centers = random_gaussian(6, 10, 40);
  const Matrix noise = 0.2 * random_gaussian(24, 10, 41);
  for (Eigen::Index i = 0; i < 24; ++i) {
    enc.row(i) = centers.row(i / 4) + noise.row(i);
    enc.row(i).normalize();
    labels.push_back("w" + std::to_string(i / 4));
  }

  SvmSelectConfig single;
  single.grid = {0.3};
  CHECK(select_C(enc, labels, single).C == 0.3);

  SvmSelectConfig cfg;
  cfg.grid = log_grid(-2, 2);
  const auto sel = select_C(enc, labels, cfg);
  const auto again = select_C(enc, labels, cfg);
  CHECK(sel.C == again.C);
  CHECK(sel.scores == again.scores);
  for (std::size_t i = 0; i < labels.size(); ++i)
    for (std::size_t j = 0; j < labels.size(); ++j)
      if (labels[i] == labels[j]) CHECK(sel.fold_of[i] == sel.fold_of[j]);

  // Re-evaluate the chosen C fold by fold with cold-started solves.
  double mean = 0.0;
  for (std::size_t f = 0; f < cfg.folds; ++f) {
    std::vector<Eigen::Index> q, n;
    for (std::size_t i = 0; i < labels.size(); ++i) (sel.fold_of[i] == f ? q : n).push_back(Eigen::Index(i));
    std::vector<std::string> ql, ids;
    for (auto r : q) {
      ql.push_back(labels[static_cast<std::size_t>(r)]);
      ids.push_back(std::to_string(r));
    }
    const Matrix feats = esvm_encode_all(enc(q, Eigen::all), enc(n, Eigen::all), sel.C);
    mean += leave_one_out_eval(feats, ql, ids).map / static_cast<double>(cfg.folds);
  }
  const auto best = static_cast<std::size_t>(std::find(cfg.grid.begin(), cfg.grid.end(), sel.C) - cfg.grid.begin());
  CHECK(mean == doctest::Approx(sel.scores[best]).epsilon(1e-6));
  for (double s : sel.scores) CHECK(s <= sel.scores[best]);

  CHECK_THROWS_AS(select_C(enc, std::vector<std::string>(24, "same"), cfg), Error);
  SvmSelectConfig descending = cfg;
  std::reverse(descending.grid.begin(), descending.grid.end());
  CHECK_THROWS_AS(select_C(enc, labels, descending), Error);
}

TEST_CASE("select_C in classification mode ties to the smaller C") {
  const Matrix a = blob(15, 4, 4, 0.3, 1), b = blob(15, -4, -4, 0.3, 2);
  Matrix enc(30, 2);
  enc << a, b;
  const auto labels = repeat_labels({{"a", 15}, {"b", 15}});
  SvmSelectConfig cfg;
  cfg.mode = SelectionMode::Classification;
  cfg.folds = 5;
  cfg.grid = log_grid(-1, 2);
  const auto sel = select_C(enc, labels, cfg);
  for (double s : sel.scores) CHECK(s == 1.0);
  CHECK(sel.C == cfg.grid.front());
}

TEST_CASE("one-vs-rest classification") {
  const Matrix a = blob(50, 2, 0, 0.6, 1), b = blob(50, -2, 0, 0.6, 2);
  Matrix train(100, 2);
  train << a, b;
  const auto labels = repeat_labels({{"b-class", 50}, {"a-class", 50}});
  const auto model = train_multiclass_svm(train, labels, 1.0);
  CHECK(model.classes == std::vector<std::string>{"a-class", "b-class"});
  const Matrix ta = blob(100, 2, 0, 0.6, 3), tb = blob(100, -2, 0, 0.6, 4);
  int correct = 0;
  for (auto p : model.predict_all(ta)) correct += model.classes[p] == "b-class";
  for (auto p : model.predict_all(tb)) correct += model.classes[p] == "a-class";
  CHECK(correct / 200.0 >= 0.95);

  auto scaled = model;
  for (auto& m : scaled.models) m.w *= 3.7;
  CHECK(scaled.predict_all(ta) == model.predict_all(ta));

  std::vector<Eigen::Index> perm(100);
  for (Eigen::Index i = 0; i < 100; ++i) perm[static_cast<std::size_t>(i)] = (i * 37) % 100;
  std::vector<std::string> plabels;
  for (auto r : perm) plabels.push_back(labels[static_cast<std::size_t>(r)]);
  const auto pmodel = train_multiclass_svm(train(perm, Eigen::all), plabels, 1.0);
  CHECK(pmodel.predict_all(ta) == model.predict_all(ta));
  CHECK(pmodel.predict_all(tb) == model.predict_all(tb));

  Matrix two(2, 2);
  two << 1, 0, -1, 0;
  const auto pm = train_multiclass_svm(two, std::vector<std::string>{"pos", "neg"}, 1.0);
  CHECK(pm.classes[pm.predict(Eigen::Vector2d(0.5, 0.3))] == "pos");
  CHECK(pm.classes[pm.predict(Eigen::Vector2d(-0.5, 0.3))] == "neg");

  CHECK_THROWS_AS(train_multiclass_svm(two, std::vector<std::string>{"x", "x"}, 1.0), Error);
}
