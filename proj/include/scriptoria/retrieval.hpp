#pragma once

#include "scriptoria/core.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace scriptoria {

struct RankedList {
  std::vector<std::size_t> order;  // gallery indices, best first
  std::vector<double> similarity;  // parallel to order; 0 for zero-norm items
  std::vector<std::uint8_t> zero_norm;
};

/// Cosine ranking. Zero-norm gallery vectors (or a zero-norm query) go last;
/// ties are broken by gallery id.
RankedList rank(const Vector& query, const Matrix& gallery, std::span<const std::string> gallery_ids);

/// Mean over relevant positions k of (relevant in top k) / k; 0 when nothing is relevant.
double average_precision(std::span<const std::uint8_t> rel);

struct CutoffResult {
  double value = 0.0;
  bool truncated = false;  // list shorter than N; evaluated on the whole list
};

CutoffResult precision_at_n(std::span<const std::uint8_t> rel, std::size_t n);
/// 1 if at least one of the top N is relevant.
CutoffResult soft_n(std::span<const std::uint8_t> rel, std::size_t n);
/// 1 if all of the top N are relevant.
CutoffResult hard_n(std::span<const std::uint8_t> rel, std::size_t n);

struct QueryResult {
  std::string id;
  double ap = 0.0;
  std::size_t relevant = 0;
  bool zero_norm = false;
};

struct EvalReport {
  std::size_t max_n = 10;
  double top1 = 0.0;
  std::vector<double> hard;  // index N-1
  std::vector<double> soft;
  std::vector<double> p_at;
  double map = 0.0;
  std::vector<QueryResult> per_query;
  std::size_t no_relevant = 0;  // queries whose label has no other image
  std::size_t zero_norm = 0;    // queries with a zero-norm encoding
  std::size_t truncated = 0;    // queries whose list is shorter than max_n
};

/// Every image queries all the others.
EvalReport leave_one_out_eval(const Matrix& encodings, std::span<const std::string> labels,
                              std::span<const std::string> ids, std::size_t max_n = 10);

/// `svm_c` is recorded when positive.
std::string report_json(const EvalReport& r, std::uint64_t config_hash, const std::string& method = {},
                        double svm_c = 0.0);
/// Top-1, Hard-2..4, Soft-5, Soft-10, p@2..4 and mAP in percent.
std::string report_table(const EvalReport& r, const std::string& method);

}  // namespace scriptoria
