#include "scriptoria/retrieval.hpp"

#include "scriptoria/parallel.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <numeric>

namespace scriptoria {

namespace {

struct Normalized {
  Matrix rows;
  std::vector<std::uint8_t> zero;
};

Normalized normalize_rows(const Matrix& m) {
  Normalized out{m, std::vector<std::uint8_t>(static_cast<std::size_t>(m.rows()), 0)};
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const double norm = m.row(i).norm();
    if (norm > 0.0) {
      out.rows.row(i) /= norm;
    } else {
      out.rows.row(i).setZero();
      out.zero[static_cast<std::size_t>(i)] = 1;
    }
  }
  return out;
}

// Best first: nonzero before zero, higher similarity, smaller id.
void sort_ranking(std::vector<std::size_t>& order, const std::vector<double>& sim,
                  const std::vector<std::uint8_t>& zero, std::span<const std::string> ids) {
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (zero[a] != zero[b]) return zero[a] < zero[b];
    if (sim[a] != sim[b]) return sim[a] > sim[b];
    if (ids[a] != ids[b]) return ids[a] < ids[b];
    return a < b;
  });
}

std::size_t checked_cutoff(std::span<const std::uint8_t> rel, std::size_t n, bool& truncated) {
  if (n == 0) fail(ErrorCode::InvalidArgument, "cutoff N must be >= 1");
  truncated = rel.size() < n;
  return std::min(n, rel.size());
}

}  // namespace

RankedList rank(const Vector& query, const Matrix& gallery, std::span<const std::string> gallery_ids) {
  if (gallery.rows() == 0) fail(ErrorCode::InvalidArgument, "rank: empty gallery");
  require_dim(static_cast<std::size_t>(query.size()), static_cast<std::size_t>(gallery.cols()), "rank query");
  require_dim(gallery_ids.size(), static_cast<std::size_t>(gallery.rows()), "rank gallery ids");
  const Normalized g = normalize_rows(gallery);
  const double qn = query.norm();
  const Vector q = qn > 0.0 ? Vector(query / qn) : Vector::Zero(query.size());
  const auto n = static_cast<std::size_t>(gallery.rows());
  std::vector<double> sim(n);
  for (std::size_t i = 0; i < n; ++i) sim[i] = g.zero[i] ? 0.0 : g.rows.row(static_cast<Eigen::Index>(i)).dot(q);
  RankedList out;
  out.order.resize(n);
  std::iota(out.order.begin(), out.order.end(), std::size_t{0});
  sort_ranking(out.order, sim, g.zero, gallery_ids);
  for (std::size_t i : out.order) {
    out.similarity.push_back(sim[i]);
    out.zero_norm.push_back(g.zero[i]);
  }
  return out;
}

double average_precision(std::span<const std::uint8_t> rel) {
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t k = 0; k < rel.size(); ++k) {
    if (!rel[k]) continue;
    ++hits;
    sum += static_cast<double>(hits) / static_cast<double>(k + 1);
  }
  return hits == 0 ? 0.0 : sum / static_cast<double>(hits);
}

CutoffResult precision_at_n(std::span<const std::uint8_t> rel, std::size_t n) {
  CutoffResult r;
  const std::size_t m = checked_cutoff(rel, n, r.truncated);
  if (m == 0) return r;
  const auto hits = static_cast<std::size_t>(std::count_if(rel.begin(), rel.begin() + static_cast<std::ptrdiff_t>(m),
                                                           [](std::uint8_t v) { return v != 0; }));
  r.value = static_cast<double>(hits) / static_cast<double>(m);
  return r;
}

CutoffResult soft_n(std::span<const std::uint8_t> rel, std::size_t n) {
  CutoffResult r;
  const std::size_t m = checked_cutoff(rel, n, r.truncated);
  r.value = std::any_of(rel.begin(), rel.begin() + static_cast<std::ptrdiff_t>(m), [](std::uint8_t v) { return v != 0; })
                ? 1.0
                : 0.0;
  return r;
}

CutoffResult hard_n(std::span<const std::uint8_t> rel, std::size_t n) {
  CutoffResult r;
  const std::size_t m = checked_cutoff(rel, n, r.truncated);
  if (m == 0) return r;
  r.value = std::all_of(rel.begin(), rel.begin() + static_cast<std::ptrdiff_t>(m), [](std::uint8_t v) { return v != 0; })
                ? 1.0
                : 0.0;
  return r;
}

EvalReport leave_one_out_eval(const Matrix& encodings, std::span<const std::string> labels,
                              std::span<const std::string> ids, std::size_t max_n) {
  const auto n = static_cast<std::size_t>(encodings.rows());
  if (n < 2) fail(ErrorCode::InvalidArgument, "evaluation needs at least two images");
  if (max_n == 0) fail(ErrorCode::InvalidArgument, "cutoff N must be >= 1");
  require_dim(labels.size(), n, "evaluation labels");
  require_dim(ids.size(), n, "evaluation ids");
  if (!encodings.allFinite()) fail(ErrorCode::InvalidArgument, "evaluation: non-finite encodings");

  const Normalized x = normalize_rows(encodings);
  const Matrix gram = x.rows * x.rows.transpose();

  struct PerQuery {
    double ap = 0.0;
    std::vector<double> hard, soft, p_at;
    std::size_t relevant = 0;
    bool truncated = false;
  };
  std::vector<PerQuery> results(n);
  parallel_for(n, [&](std::size_t q) {
    std::vector<double> sim(n);
    for (std::size_t j = 0; j < n; ++j) {
      sim[j] = (x.zero[j] || x.zero[q]) ? 0.0 : gram(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(j));
    }
    std::vector<std::size_t> order;
    order.reserve(n - 1);
    for (std::size_t j = 0; j < n; ++j) {
      if (j != q) order.push_back(j);
    }
    sort_ranking(order, sim, x.zero, ids);
    std::vector<std::uint8_t> rel(order.size());
    for (std::size_t k = 0; k < order.size(); ++k) rel[k] = labels[order[k]] == labels[q] ? 1 : 0;
    PerQuery& r = results[q];
    r.ap = average_precision(rel);
    r.relevant = static_cast<std::size_t>(std::count(rel.begin(), rel.end(), std::uint8_t{1}));
    for (std::size_t cut = 1; cut <= max_n; ++cut) {
      const auto h = hard_n(rel, cut);
      r.hard.push_back(h.value);
      r.soft.push_back(soft_n(rel, cut).value);
      r.p_at.push_back(precision_at_n(rel, cut).value);
      r.truncated = r.truncated || h.truncated;
    }
  });

  EvalReport rep;
  rep.max_n = max_n;
  rep.hard.assign(max_n, 0.0);
  rep.soft.assign(max_n, 0.0);
  rep.p_at.assign(max_n, 0.0);
  const double inv = 1.0 / static_cast<double>(n);
  double ap_sum = 0.0;
  for (std::size_t q = 0; q < n; ++q) {
    const PerQuery& r = results[q];
    ap_sum += r.ap;
    for (std::size_t k = 0; k < max_n; ++k) {
      rep.hard[k] += r.hard[k];
      rep.soft[k] += r.soft[k];
      rep.p_at[k] += r.p_at[k];
    }
    rep.per_query.push_back({ids[q], r.ap, r.relevant, x.zero[q] != 0});
    if (r.relevant == 0) ++rep.no_relevant;
    if (x.zero[q]) ++rep.zero_norm;
    if (r.truncated) ++rep.truncated;
  }
  for (std::size_t k = 0; k < max_n; ++k) {
    rep.hard[k] *= inv;
    rep.soft[k] *= inv;
    rep.p_at[k] *= inv;
  }
  rep.map = ap_sum * inv;
  rep.top1 = rep.p_at[0];
  return rep;
}

std::string report_json(const EvalReport& r, std::uint64_t config_hash, const std::string& method, double svm_c) {
  nlohmann::ordered_json j;
  char hash[17];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(config_hash));
  j["config_hash"] = hash;
  if (!method.empty()) j["method"] = method;
  if (svm_c > 0.0) j["svm_c"] = svm_c;
  j["queries"] = r.per_query.size();
  j["top1"] = r.top1;
  auto cutoffs = [&](const std::vector<double>& v) {
    nlohmann::ordered_json o;
    for (std::size_t k = 0; k < v.size(); ++k) o[std::to_string(k + 1)] = v[k];
    return o;
  };
  j["hard"] = cutoffs(r.hard);
  j["soft"] = cutoffs(r.soft);
  j["p_at"] = cutoffs(r.p_at);
  j["map"] = r.map;
  j["flags"] = {{"no_relevant", r.no_relevant}, {"zero_norm", r.zero_norm}, {"truncated", r.truncated}};
  nlohmann::ordered_json per = nlohmann::ordered_json::array();
  for (const auto& q : r.per_query) {
    per.push_back({{"id", q.id}, {"ap", q.ap}, {"relevant", q.relevant}, {"zero_norm", q.zero_norm}});
  }
  j["per_query"] = std::move(per);
  return j.dump(2) + "\n";
}

std::string report_table(const EvalReport& r, const std::string& method) {
  auto at = [](const std::vector<double>& v, std::size_t n) { return n <= v.size() ? v[n - 1] : 0.0; };
  const double cols[] = {r.top1,        at(r.hard, 2), at(r.hard, 3), at(r.hard, 4),  at(r.soft, 5),
                         at(r.soft, 10), at(r.p_at, 2), at(r.p_at, 3), at(r.p_at, 4), r.map};
  std::string out;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%-20s", "Method");
  out += buf;
  for (const char* h : {"Top-1", "Hard-2", "Hard-3", "Hard-4", "Soft-5", "Soft-10", "p@2", "p@3", "p@4", "mAP"}) {
    std::snprintf(buf, sizeof buf, " %7s", h);
    out += buf;
  }
  out += "\n";
  std::snprintf(buf, sizeof buf, "%-20s", method.c_str());
  out += buf;
  for (double v : cols) {
    std::snprintf(buf, sizeof buf, " %7.1f", 100.0 * v);
    out += buf;
  }
  out += "\n";
  return out;
}

}  // namespace scriptoria
