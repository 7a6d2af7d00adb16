#include <doctest.h>

#include "scriptoria/retrieval.hpp"

#include "oracles.hpp"

#include <json.hpp>

#include <cmath>

using namespace scriptoria;
using namespace scriptoria::testing;

namespace {

std::vector<std::uint8_t> pattern(unsigned bits, std::size_t len) {
  std::vector<std::uint8_t> rel(len);
  for (std::size_t i = 0; i < len; ++i) rel[i] = (bits >> i) & 1u;
  return rel;
}

}  // namespace

TEST_CASE("average precision examples") {
  CHECK(average_precision(std::vector<std::uint8_t>{1, 0, 1}) == doctest::Approx((1.0 + 2.0 / 3.0) / 2.0));
  CHECK(average_precision(std::vector<std::uint8_t>{0, 0, 0}) == 0.0);
  CHECK(average_precision(std::vector<std::uint8_t>{1, 1, 1, 1}) == 1.0);
  CHECK(average_precision(std::vector<std::uint8_t>{0, 1}) == 0.5);
}

TEST_CASE("metrics equal their definitions on every relevance pattern of length 8") {
  for (std::size_t len = 1; len <= 8; ++len) {
    for (unsigned bits = 0; bits < (1u << len); ++bits) {
      const auto rel = pattern(bits, len);
      CHECK(average_precision(rel) == definition_ap(rel));
      for (std::size_t n = 1; n <= 10; ++n) {
        const auto p = precision_at_n(rel, n);
        CHECK(p.value == definition_precision(rel, n));
        CHECK(p.truncated == (n > len));
        CHECK(soft_n(rel, n).value == definition_soft(rel, n));
        CHECK(hard_n(rel, n).value == definition_hard(rel, n));
      }
    }
  }
  CHECK_THROWS_AS(precision_at_n(pattern(1, 3), 0), Error);
}

TEST_CASE("ranking by cosine") {
  Matrix g(4, 2);
  g << 1, 0, 0, 1, 0, 0, 2, 0.1;
  const std::vector<std::string> ids = {"b", "c", "z", "a"};
  const auto r = rank(Eigen::Vector2d(1, 0), g, ids);
  CHECK(r.order == std::vector<std::size_t>{0, 3, 1, 2});
  CHECK(r.zero_norm.back() == 1);
  CHECK(r.similarity[0] == doctest::Approx(1.0));

  // Equal similarity: ties broken by id.
  Matrix t(2, 2);
  t << 1, 1, 2, 2;
  CHECK(rank(Eigen::Vector2d(1, 0), t, std::vector<std::string>{"y", "x"}).order == std::vector<std::size_t>{1, 0});

  CHECK_THROWS_AS(rank(Eigen::Vector3d(1, 0, 0), g, ids), Error);
}

TEST_CASE("ranking is invariant to positive scaling") {
  const Matrix g = random_gaussian(30, 6, 1);
  std::vector<std::string> ids;
  for (int i = 0; i < 30; ++i) ids.push_back(std::to_string(i));
  const Vector q = random_gaussian(6, 1, 2).col(0);
  CHECK(rank(q, g, ids).order == rank(3.5 * q, 0.01 * g, ids).order);

  std::vector<std::string> labels;
  for (int i = 0; i < 30; ++i) labels.push_back("w" + std::to_string(i % 6));
  CHECK(leave_one_out_eval(g, labels, ids).map == leave_one_out_eval(7.0 * g, labels, ids).map);
}

TEST_CASE("leave-one-out evaluation against a direct computation") {
  const Matrix enc = random_gaussian(20, 5, 9);
  std::vector<std::string> labels, ids;
  for (int i = 0; i < 20; ++i) {
    labels.push_back("w" + std::to_string(i % 5));
    ids.push_back("img" + std::to_string(100 + i));
  }
  const auto rep = leave_one_out_eval(enc, labels, ids);
  double map = 0.0, top1 = 0.0, soft5 = 0.0;
  for (Eigen::Index q = 0; q < 20; ++q) {
    std::vector<Eigen::Index> others;
    std::vector<std::string> other_ids;
    for (Eigen::Index j = 0; j < 20; ++j)
      if (j != q) {
        others.push_back(j);
        other_ids.push_back(ids[static_cast<std::size_t>(j)]);
      }
    const auto r = rank(enc.row(q).transpose(), enc(others, Eigen::all), other_ids);
    std::vector<std::uint8_t> rel;
    for (auto k : r.order) rel.push_back(labels[static_cast<std::size_t>(others[k])] == labels[static_cast<std::size_t>(q)]);
    map += definition_ap(rel) / 20.0;
    top1 += rel[0] / 20.0;
    soft5 += definition_soft(rel, 5) / 20.0;
  }
  CHECK(rep.map == doctest::Approx(map).epsilon(1e-12));
  CHECK(rep.top1 == doctest::Approx(top1).epsilon(1e-12));
  CHECK(rep.soft[4] == doctest::Approx(soft5).epsilon(1e-12));
  CHECK(rep.hard.size() == 10);
  CHECK(rep.per_query.size() == 20);
  CHECK(rep.no_relevant == 0);
  CHECK(rep.truncated == 0);
}

TEST_CASE("perfectly separated writers score 1") {
  Matrix enc(6, 3);
  enc << 1, 0, 0, 0.9, 0.1, 0, 0, 1, 0, 0.1, 0.9, 0, 0, 0, 1, 0, 0.1, 0.9;
  const std::vector<std::string> labels = {"a", "a", "b", "b", "c", "c"};
  const std::vector<std::string> ids = {"1", "2", "3", "4", "5", "6"};
  const auto rep = leave_one_out_eval(enc, labels, ids);
  CHECK(rep.map == 1.0);
  CHECK(rep.top1 == 1.0);
  CHECK(rep.hard[1] == 0.0);
  CHECK(rep.soft[1] == 1.0);
  CHECK(rep.truncated == 6);
}

TEST_CASE("flags for lonely writers and zero encodings") {
  Matrix enc(4, 2);
  enc << 1, 0, 1, 0.1, 0, 0, 0, 1;
  const std::vector<std::string> labels = {"a", "a", "b", "c"};
  const std::vector<std::string> ids = {"1", "2", "3", "4"};
  const auto rep = leave_one_out_eval(enc, labels, ids);
  CHECK(rep.no_relevant == 2);
  CHECK(rep.zero_norm == 1);
  CHECK(rep.per_query[2].zero_norm);
  CHECK(rep.per_query[2].ap == 0.0);
  CHECK(rep.map == doctest::Approx(0.5));

  CHECK_THROWS_AS(leave_one_out_eval(enc.topRows(1), std::vector<std::string>{"a"}, std::vector<std::string>{"1"}),
                  Error);
}

TEST_CASE("report formats") {
  Matrix enc(4, 2);
  enc << 1, 0, 1, 0.1, 0, 1, 0.1, 1;
  const std::vector<std::string> labels = {"a", "a", "b", "b"};
  const std::vector<std::string> ids = {"p1", "p2", "p3", "p4"};
  const auto rep = leave_one_out_eval(enc, labels, ids);
  const auto j = nlohmann::json::parse(report_json(rep, 0xabcdefULL, "m-VLAD", 0.01));
  CHECK(j["config_hash"] == "0000000000abcdef");
  CHECK(j["method"] == "m-VLAD");
  CHECK(j["map"] == 1.0);
  CHECK(j["top1"] == 1.0);
  CHECK(j["hard"].size() == 10);
  CHECK(j["soft"]["10"] == 1.0);
  CHECK(j["p_at"]["2"].get<double>() == doctest::Approx(0.5));
  CHECK(j["per_query"].size() == 4);
  CHECK(j["per_query"][0]["id"] == "p1");
  CHECK(j["svm_c"] == 0.01);
  CHECK(report_json(rep, 1) == report_json(rep, 1));

  const std::string table = report_table(rep, "m-VLAD");
  CHECK(table.find("Top-1") != std::string::npos);
  CHECK(table.find("Soft-10") != std::string::npos);
  CHECK(table.find("mAP") != std::string::npos);
  CHECK(table.find("100.0") != std::string::npos);
}
