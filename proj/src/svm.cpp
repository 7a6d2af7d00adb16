#include "scriptoria/svm.hpp"

#include "scriptoria/parallel.hpp"
#include "scriptoria/random.hpp"
#include "scriptoria/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace scriptoria {

namespace {

void require_finite(const Matrix& m, const char* what) {
  if (!m.allFinite()) fail(ErrorCode::InvalidArgument, std::string(what) + ": non-finite input");
}

struct Breakpoint {
  double t;
  std::size_t i;
};

// Exact minimizer of phi(t) = f(w + t d) for t >= 0. phi' is piecewise linear
// and increasing; walk its segments in order of the activity changes.
double exact_line_search(const SvmProblem& p, const Vector& w, const Vector& d, const Vector& margins,
                         const Vector& slopes) {
  const auto n = static_cast<Eigen::Index>(p.size());
  double a = w.dot(d);
  double b = d.squaredNorm();
  std::vector<Breakpoint> breaks;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double v = 1.0 - margins[i];
    const double s = slopes[i];
    const double c = p.cost[i];
    if (v > 0.0) {
      a -= 2.0 * c * v * s;
      b += 2.0 * c * s * s;
      if (s > 0.0) breaks.push_back({v / s, static_cast<std::size_t>(i)});
    } else if (s < 0.0) {
      breaks.push_back({v / s, static_cast<std::size_t>(i)});
    }
  }
  std::sort(breaks.begin(), breaks.end(), [](const Breakpoint& x, const Breakpoint& y) {
    return x.t < y.t || (x.t == y.t && x.i < y.i);
  });
  for (const Breakpoint& bp : breaks) {
    const double root = -a / b;
    if (root <= bp.t) return std::max(root, 0.0);
    const auto i = static_cast<Eigen::Index>(bp.i);
    const double v = 1.0 - margins[i];
    const double s = slopes[i];
    const double c = p.cost[i];
    const double da = -2.0 * c * v * s;
    const double db = 2.0 * c * s * s;
    if (s > 0.0) {  // leaves the active set
      a -= da;
      b -= db;
    } else {  // enters it
      a += da;
      b += db;
    }
  }
  return std::max(-a / b, 0.0);
}

}  // namespace

SvmProblem make_svm_problem(const Matrix& positives, const Matrix& negatives, double c_p, double c_n) {
  if (positives.rows() == 0 || negatives.rows() == 0) {
    fail(ErrorCode::InvalidArgument, "svm: need at least one positive and one negative sample");
  }
  require_dim(static_cast<std::size_t>(negatives.cols()), static_cast<std::size_t>(positives.cols()),
              "svm negatives");
  if (!(c_p > 0.0) || !(c_n > 0.0) || !std::isfinite(c_p) || !std::isfinite(c_n)) {
    fail(ErrorCode::InvalidArgument, "svm: class costs must be finite and positive");
  }
  require_finite(positives, "svm positives");
  require_finite(negatives, "svm negatives");
  SvmProblem p;
  p.z.resize(positives.rows() + negatives.rows(), positives.cols());
  p.z.topRows(positives.rows()) = positives;
  p.z.bottomRows(negatives.rows()) = -negatives;
  p.cost.resize(p.z.rows());
  p.cost.head(positives.rows()).setConstant(c_p);
  p.cost.tail(negatives.rows()).setConstant(c_n);
  return p;
}

double svm_objective(const SvmProblem& p, const Vector& w) {
  require_dim(static_cast<std::size_t>(w.size()), p.dim(), "svm weights");
  const Vector v = (1.0 - (p.z * w).array()).max(0.0).matrix();
  return 0.5 * w.squaredNorm() + (p.cost.array() * v.array().square()).sum();
}

Vector svm_gradient(const SvmProblem& p, const Vector& w) {
  require_dim(static_cast<std::size_t>(w.size()), p.dim(), "svm weights");
  const Vector v = (1.0 - (p.z * w).array()).max(0.0).matrix();
  return w - 2.0 * p.z.transpose() * (p.cost.array() * v.array()).matrix();
}

SvmSolution solve_svm(const SvmProblem& p, const SvmOptions& opts, const Vector* warm_start) {
  if (p.size() == 0) fail(ErrorCode::InvalidArgument, "svm: empty problem");
  const auto d = static_cast<Eigen::Index>(p.dim());
  SvmSolution sol;
  sol.w = warm_start ? *warm_start : Vector::Zero(d);
  require_dim(static_cast<std::size_t>(sol.w.size()), p.dim(), "svm warm start");
  const std::size_t cg_cap = std::min<std::size_t>(p.dim() + 10, 2000);

  Vector margins = p.z * sol.w;
  double f = 0.0;
  for (;;) {
    const Vector viol = (1.0 - margins.array()).max(0.0).matrix();
    f = 0.5 * sol.w.squaredNorm() + (p.cost.array() * viol.array().square()).sum();
    const Vector g = sol.w - 2.0 * p.z.transpose() * (p.cost.array() * viol.array()).matrix();
    sol.gradient_norm = g.norm();
    if (sol.gradient_norm <= opts.tolerance) {
      sol.converged = true;
      break;
    }
    if (sol.iterations >= opts.max_iterations) break;

    // Generalized Hessian I + 2 Z_A^T C_A Z_A over the active set.
    const Vector hess_weight = (viol.array() > 0.0).select(2.0 * p.cost.array(), 0.0).matrix();
    auto hessian_times = [&](const Vector& v) -> Vector {
      return v + p.z.transpose() * (hess_weight.array() * (p.z * v).array()).matrix();
    };
    const double forcing = std::min(0.5, std::sqrt(sol.gradient_norm)) * sol.gradient_norm;
    Vector dir = Vector::Zero(d);
    Vector r = -g;
    Vector q = r;
    double rr = r.squaredNorm();
    for (std::size_t k = 0; k < cg_cap && std::sqrt(rr) > forcing; ++k) {
      const Vector hq = hessian_times(q);
      const double alpha = rr / q.dot(hq);
      dir += alpha * q;
      r -= alpha * hq;
      const double rr_next = r.squaredNorm();
      q = r + (rr_next / rr) * q;
      rr = rr_next;
    }
    if (!(g.dot(dir) < 0.0)) dir = -g;

    const Vector slopes = p.z * dir;
    const double t = exact_line_search(p, sol.w, dir, margins, slopes);
    ++sol.iterations;
    if (t <= 0.0) break;
    const Vector w_next = sol.w + t * dir;
    const Vector m_next = margins + t * slopes;
    const double f_next = 0.5 * w_next.squaredNorm() +
                          (p.cost.array() * (1.0 - m_next.array()).max(0.0).square()).sum();
    if (!(f_next <= f)) break;  // no representable progress left
    sol.w = w_next;
    margins = m_next;
  }
  sol.objective = f;
  return sol;
}

SvmModel train_linear_svm(const Matrix& positives, const Matrix& negatives, double C, const SvmOptions& opts,
                          const Vector* warm_start) {
  if (!(C > 0.0) || !std::isfinite(C)) fail(ErrorCode::InvalidArgument, "svm: C must be finite and positive");
  const double n_pos = static_cast<double>(positives.rows());
  const double n_neg = static_cast<double>(negatives.rows());
  if (n_pos == 0.0 || n_neg == 0.0) fail(ErrorCode::InvalidArgument, "svm: empty class");
  const double n = n_pos + n_neg;
  SvmModel m;
  m.C = C;
  m.c_p = C * n / (2.0 * n_pos);
  m.c_n = C * n / (2.0 * n_neg);
  const SvmProblem p = make_svm_problem(positives, negatives, m.c_p, m.c_n);
  SvmSolution s = solve_svm(p, opts, warm_start);
  m.w = std::move(s.w);
  m.objective = s.objective;
  return m;
}

Vector esvm_feature(const Vector& query, const Matrix& negatives, double C, const SvmOptions& opts) {
  if (negatives.rows() == 0) fail(ErrorCode::InvalidArgument, "esvm: no negatives");
  require_dim(static_cast<std::size_t>(query.size()), static_cast<std::size_t>(negatives.cols()), "esvm query");
  if (query.isZero(0.0)) fail(ErrorCode::Degenerate, "esvm: all-zero query");
  const SvmModel m = train_linear_svm(query.transpose(), negatives, C, opts);
  const double norm = m.w.norm();
  return norm > 0.0 ? Vector(m.w / norm) : Vector(m.w);
}

Matrix esvm_encode_all(const Matrix& queries, const Matrix& negatives, double C, const SvmOptions& opts,
                       std::vector<std::uint8_t>* zero_rows) {
  Matrix out = Matrix::Zero(queries.rows(), queries.cols());
  std::vector<std::uint8_t> zero(static_cast<std::size_t>(queries.rows()), 0);
  parallel_for(static_cast<std::size_t>(queries.rows()), [&](std::size_t i) {
    const auto r = static_cast<Eigen::Index>(i);
    const Vector q = queries.row(r).transpose();
    if (q.isZero(0.0)) {
      zero[i] = 1;
      return;
    }
    out.row(r) = esvm_feature(q, negatives, C, opts).transpose();
  });
  if (zero_rows) *zero_rows = std::move(zero);
  return out;
}

std::vector<double> log_grid(int lo_exp, int hi_exp) {
  if (lo_exp > hi_exp) fail(ErrorCode::InvalidArgument, "log_grid: empty range");
  std::vector<double> g;
  for (int e = lo_exp; e <= hi_exp; ++e) g.push_back(std::pow(10.0, e));
  return g;
}

std::vector<std::size_t> writer_disjoint_folds(std::span<const std::string> labels, std::size_t folds,
                                               std::uint64_t seed) {
  if (folds < 2) fail(ErrorCode::InvalidArgument, "folds must be >= 2");
  std::vector<std::string> writers(labels.begin(), labels.end());
  std::sort(writers.begin(), writers.end());
  writers.erase(std::unique(writers.begin(), writers.end()), writers.end());
  if (writers.size() < folds) {
    fail(ErrorCode::InvalidArgument, "writer-disjoint folds: " + std::to_string(writers.size()) +
                                         " writers for " + std::to_string(folds) + " folds");
  }
  Rng rng(seed);
  shuffle(writers, rng);
  std::map<std::string, std::size_t> fold_of_writer;
  for (std::size_t j = 0; j < writers.size(); ++j) fold_of_writer[writers[j]] = j % folds;
  std::vector<std::size_t> out;
  out.reserve(labels.size());
  for (const auto& l : labels) out.push_back(fold_of_writer.at(l));
  return out;
}

std::vector<std::size_t> stratified_folds(std::span<const std::string> labels, std::size_t folds,
                                          std::uint64_t seed) {
  if (folds < 2) fail(ErrorCode::InvalidArgument, "folds must be >= 2");
  std::map<std::string, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  Rng rng(seed);
  std::vector<std::size_t> out(labels.size(), 0);
  std::size_t offset = 0;
  for (auto& [label, idx] : by_class) {
    shuffle(idx, rng);
    for (std::size_t j = 0; j < idx.size(); ++j) out[idx[j]] = (offset + j) % folds;
    offset += idx.size();
  }
  return out;
}

namespace {

std::vector<double> retrieval_fold_scores(const Matrix& X, std::span<const std::string> labels,
                                          std::span<const std::size_t> fold_of, std::size_t fold,
                                          const SvmSelectConfig& cfg) {
  std::vector<Eigen::Index> q_rows, n_rows;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    (fold_of[i] == fold ? q_rows : n_rows).push_back(static_cast<Eigen::Index>(i));
  }
  const Matrix negatives = X(n_rows, Eigen::all);
  std::vector<std::string> q_labels;
  for (auto r : q_rows) q_labels.push_back(labels[static_cast<std::size_t>(r)]);

  const std::size_t n_grid = cfg.grid.size();
  std::vector<Matrix> feats(n_grid, Matrix::Zero(static_cast<Eigen::Index>(q_rows.size()), X.cols()));
  const double n_neg = static_cast<double>(n_rows.size());
  parallel_for(q_rows.size(), [&](std::size_t qi) {
    const Matrix q = X.row(q_rows[qi]);
    if (q.isZero(0.0)) return;
    const SvmProblem base = make_svm_problem(q, negatives, 1.0, 1.0);
    SvmProblem p = base;
    Vector w = Vector::Zero(X.cols());
    for (std::size_t ci = 0; ci < n_grid; ++ci) {
      const double C = cfg.grid[ci];
      p.cost[0] = C * (n_neg + 1.0) / 2.0;
      p.cost.tail(static_cast<Eigen::Index>(n_rows.size())).setConstant(C * (n_neg + 1.0) / (2.0 * n_neg));
      w = solve_svm(p, cfg.solver, &w).w;
      const double norm = w.norm();
      if (norm > 0.0) feats[ci].row(static_cast<Eigen::Index>(qi)) = (w / norm).transpose();
    }
  });
  std::vector<double> scores(n_grid);
  std::vector<std::string> ids(q_rows.size());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = std::to_string(q_rows[i]);
  for (std::size_t ci = 0; ci < n_grid; ++ci) scores[ci] = leave_one_out_eval(feats[ci], q_labels, ids).map;
  return scores;
}

std::vector<double> classification_fold_scores(const Matrix& X, std::span<const std::string> labels,
                                               std::span<const std::size_t> fold_of, std::size_t fold,
                                               const SvmSelectConfig& cfg) {
  std::vector<Eigen::Index> test_rows, train_rows;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    (fold_of[i] == fold ? test_rows : train_rows).push_back(static_cast<Eigen::Index>(i));
  }
  const Matrix train = X(train_rows, Eigen::all);
  const Matrix test = X(test_rows, Eigen::all);
  std::vector<std::string> train_labels;
  for (auto r : train_rows) train_labels.push_back(labels[static_cast<std::size_t>(r)]);
  std::vector<double> scores;
  for (double C : cfg.grid) {
    const MulticlassSvm model = train_multiclass_svm(train, train_labels, C, cfg.solver);
    const auto pred = model.predict_all(test);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      if (model.classes[pred[i]] == labels[static_cast<std::size_t>(test_rows[i])]) ++correct;
    }
    scores.push_back(test_rows.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(test_rows.size()));
  }
  return scores;
}

}  // namespace

CSelection select_C(const Matrix& encodings, std::span<const std::string> labels, const SvmSelectConfig& cfg) {
  if (cfg.grid.empty()) fail(ErrorCode::InvalidArgument, "select_C: empty grid");
  if (!std::is_sorted(cfg.grid.begin(), cfg.grid.end())) fail(ErrorCode::InvalidArgument, "select_C: grid must ascend");
  require_dim(labels.size(), static_cast<std::size_t>(encodings.rows()), "select_C labels");
  require_finite(encodings, "select_C encodings");
  {
    std::vector<std::string> distinct(labels.begin(), labels.end());
    std::sort(distinct.begin(), distinct.end());
    if (std::unique(distinct.begin(), distinct.end()) - distinct.begin() < 2) {
      fail(ErrorCode::InvalidArgument, "select_C: need at least two classes");
    }
  }
  CSelection sel;
  sel.fold_of = cfg.mode == SelectionMode::Retrieval ? writer_disjoint_folds(labels, cfg.folds, cfg.seed)
                                                     : stratified_folds(labels, cfg.folds, cfg.seed);
  sel.scores.assign(cfg.grid.size(), 0.0);
  for (std::size_t f = 0; f < cfg.folds; ++f) {
    const auto s = cfg.mode == SelectionMode::Retrieval
                       ? retrieval_fold_scores(encodings, labels, sel.fold_of, f, cfg)
                       : classification_fold_scores(encodings, labels, sel.fold_of, f, cfg);
    for (std::size_t i = 0; i < s.size(); ++i) sel.scores[i] += s[i] / static_cast<double>(cfg.folds);
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < sel.scores.size(); ++i) {
    if (sel.scores[i] > sel.scores[best]) best = i;
  }
  sel.C = cfg.grid[best];
  return sel;
}

std::size_t MulticlassSvm::predict(const Vector& x) const {
  if (models.empty()) fail(ErrorCode::State, "multiclass svm: no models");
  require_dim(static_cast<std::size_t>(x.size()), static_cast<std::size_t>(models.front().w.size()), "classify input");
  std::size_t best = 0;
  double best_score = models[0].w.dot(x);
  for (std::size_t c = 1; c < models.size(); ++c) {
    const double s = models[c].w.dot(x);
    if (s > best_score) {
      best = c;
      best_score = s;
    }
  }
  return best;
}

std::vector<std::size_t> MulticlassSvm::predict_all(const Matrix& X) const {
  std::vector<std::size_t> out(static_cast<std::size_t>(X.rows()));
  for (Eigen::Index i = 0; i < X.rows(); ++i) out[static_cast<std::size_t>(i)] = predict(X.row(i).transpose());
  return out;
}

MulticlassSvm train_multiclass_svm(const Matrix& encodings, std::span<const std::string> labels, double C,
                                   const SvmOptions& opts) {
  require_dim(labels.size(), static_cast<std::size_t>(encodings.rows()), "multiclass labels");
  MulticlassSvm out;
  out.classes.assign(labels.begin(), labels.end());
  std::sort(out.classes.begin(), out.classes.end());
  out.classes.erase(std::unique(out.classes.begin(), out.classes.end()), out.classes.end());
  if (out.classes.size() < 2) fail(ErrorCode::InvalidArgument, "multiclass svm: need at least two classes");
  out.models.resize(out.classes.size());
  parallel_for(out.classes.size(), [&](std::size_t c) {
    std::vector<Eigen::Index> pos, neg;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      (labels[i] == out.classes[c] ? pos : neg).push_back(static_cast<Eigen::Index>(i));
    }
    out.models[c] = train_linear_svm(encodings(pos, Eigen::all), encodings(neg, Eigen::all),
                                     C, opts);
  });
  return out;
}

}  // namespace scriptoria
