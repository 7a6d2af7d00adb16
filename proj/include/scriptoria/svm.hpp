#pragma once

#include "scriptoria/core.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace scriptoria {

/// Squared-hinge linear SVM without bias:
///   f(w) = 1/2 |w|^2 + sum_i c_i max(0, 1 - y_i w.x_i)^2
/// Samples are stored pre-multiplied by their label (z_i = y_i x_i).
struct SvmProblem {
  Matrix z;     // n x d
  Vector cost;  // n, all > 0

  std::size_t size() const { return static_cast<std::size_t>(z.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(z.cols()); }
};

/// Positives first, then negatives, with per-class costs.
SvmProblem make_svm_problem(const Matrix& positives, const Matrix& negatives, double c_p, double c_n);

double svm_objective(const SvmProblem& p, const Vector& w);
Vector svm_gradient(const SvmProblem& p, const Vector& w);

struct SvmOptions {
  double tolerance = 1e-6;  // stop when |grad| <= tolerance
  std::size_t max_iterations = 1000;
};

struct SvmSolution {
  Vector w;
  double objective = 0.0;
  double gradient_norm = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
};

/// Newton iterations on the generalized Hessian, directions from truncated
/// conjugate gradients, exact line search along the piecewise-quadratic ray.
SvmSolution solve_svm(const SvmProblem& p, const SvmOptions& opts = {}, const Vector* warm_start = nullptr);

struct SvmModel {
  Vector w;
  double C = 0.0;
  double c_p = 0.0;
  double c_n = 0.0;
  double objective = 0.0;
};

/// c_p = C n / (2 n_pos), c_n = C n / (2 n_neg); for one positive this is
/// C(|N|+1)/2 and C(|N|+1)/(2|N|).
SvmModel train_linear_svm(const Matrix& positives, const Matrix& negatives, double C, const SvmOptions& opts = {},
                          const Vector* warm_start = nullptr);

/// w / |w| of an exemplar SVM with `query` as the single positive.
Vector esvm_feature(const Vector& query, const Matrix& negatives, double C, const SvmOptions& opts = {});

/// E-SVM features of every row of `queries`, parallel across queries. All-zero
/// queries map to zero rows (reported through `zero_rows` when given).
Matrix esvm_encode_all(const Matrix& queries, const Matrix& negatives, double C, const SvmOptions& opts = {},
                       std::vector<std::uint8_t>* zero_rows = nullptr);

/// 10^lo .. 10^hi in steps of x10.
std::vector<double> log_grid(int lo_exp = -5, int hi_exp = 4);

/// Fold index per sample; all samples of a label land in the same fold.
std::vector<std::size_t> writer_disjoint_folds(std::span<const std::string> labels, std::size_t folds,
                                               std::uint64_t seed);
/// Fold index per sample; each label spread round-robin over the folds.
std::vector<std::size_t> stratified_folds(std::span<const std::string> labels, std::size_t folds,
                                          std::uint64_t seed);

enum class SelectionMode { Retrieval, Classification };

struct SvmSelectConfig {
  std::vector<double> grid = log_grid();
  std::size_t folds = 2;
  SelectionMode mode = SelectionMode::Retrieval;
  std::uint64_t seed = 0;
  SvmOptions solver;
};

struct CSelection {
  double C = 0.0;
  std::vector<double> scores;  // mean held-out score per grid value
  std::vector<std::size_t> fold_of;
};

/// Retrieval: each fold's images are E-SVM encoded against the other folds and
/// scored by leave-one-out mAP. Classification: one-vs-rest accuracy on the
/// held-out fold. Ties go to the smaller C.
CSelection select_C(const Matrix& encodings, std::span<const std::string> labels, const SvmSelectConfig& cfg);

struct MulticlassSvm {
  std::vector<std::string> classes;  // sorted
  std::vector<SvmModel> models;      // one per class

  std::size_t predict(const Vector& x) const;  // index into classes; ties to lower index
  std::vector<std::size_t> predict_all(const Matrix& X) const;
};

MulticlassSvm train_multiclass_svm(const Matrix& encodings, std::span<const std::string> labels, double C,
                                   const SvmOptions& opts = {});

}  // namespace scriptoria
