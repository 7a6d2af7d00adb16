#include "scriptoria/whitening.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>

namespace scriptoria {

WhiteningTransform WhiteningTransform::identity(std::size_t dim) {
  WhiteningTransform t;
  const auto d = static_cast<Eigen::Index>(dim);
  t.mean = Vector::Zero(d);
  t.basis = Matrix::Identity(d, d);
  t.scale = Vector::Ones(d);
  t.eigenvalues = Vector::Ones(d);
  return t;
}

namespace {

// First coordinate that is not negligible is made positive.
void fix_sign(Eigen::Ref<Eigen::VectorXd> v) {
  const double cutoff = 1e-8 * v.cwiseAbs().maxCoeff();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::abs(v[i]) > cutoff) {
      if (v[i] < 0.0) v = -v;
      return;
    }
  }
}

}  // namespace

WhiteningTransform fit_pca_whitening(const Matrix& X, std::size_t out_dim, double epsilon) {
  const Eigen::Index n = X.rows();
  const Eigen::Index d = X.cols();
  if (!X.allFinite()) fail(ErrorCode::InvalidArgument, "fit_pca_whitening: non-finite input");
  if (n < 2 || d < 1) fail(ErrorCode::InvalidArgument, "fit_pca_whitening: need at least 2 rows");
  const Eigen::Index m = out_dim == 0 ? std::min(d, n - 1) : static_cast<Eigen::Index>(out_dim);
  if (m > d) fail(ErrorCode::Dimension, "fit_pca_whitening: out_dim exceeds input dimension");
  if (n <= m) {
    fail(ErrorCode::InvalidArgument, "fit_pca_whitening: need more rows (" + std::to_string(n) +
                                         ") than output dimensions (" + std::to_string(m) + ")");
  }

  WhiteningTransform t;
  t.epsilon = epsilon;
  t.mean = X.colwise().mean().transpose();
  const Eigen::MatrixXd centered = X.rowwise() - t.mean.transpose();
  const double denom = static_cast<double>(n - 1);

  Eigen::VectorXd evals;  // descending
  Eigen::MatrixXd evecs;  // d x m
  if (d <= n) {
    const Eigen::MatrixXd cov = (centered.transpose() * centered) / denom;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    if (es.info() != Eigen::Success) fail(ErrorCode::Degenerate, "fit_pca_whitening: eigensolver failed");
    evals = es.eigenvalues().reverse().head(m);
    evecs = es.eigenvectors().rowwise().reverse().leftCols(m);
  } else {
    const Eigen::MatrixXd gram = (centered * centered.transpose()) / denom;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
    if (es.info() != Eigen::Success) fail(ErrorCode::Degenerate, "fit_pca_whitening: eigensolver failed");
    evals = es.eigenvalues().reverse().head(m);
    const Eigen::MatrixXd u = es.eigenvectors().rowwise().reverse().leftCols(m);
    evecs = centered.transpose() * u;
    for (Eigen::Index j = 0; j < m; ++j) {
      const double norm = evecs.col(j).norm();
      if (norm > 0.0) evecs.col(j) /= norm;
    }
  }

  const double lambda_max = evals.size() > 0 ? evals[0] : 0.0;
  if (!(lambda_max > 0.0)) fail(ErrorCode::Degenerate, "fit_pca_whitening: data has zero variance");
  const double floor = epsilon * lambda_max;

  t.basis.resize(d, m);
  t.scale.resize(m);
  t.eigenvalues = evals;
  for (Eigen::Index j = 0; j < m; ++j) {
    Eigen::VectorXd col = evecs.col(j);
    fix_sign(col);
    t.basis.col(j) = col;
    double lambda = evals[j];
    if (lambda < floor) {
      lambda = floor;
      ++t.clamped;
    }
    t.scale[j] = 1.0 / std::sqrt(lambda);
  }
  return t;
}

Vector apply_whitening(const WhiteningTransform& t, const Vector& x) {
  require_dim(static_cast<std::size_t>(x.size()), t.in_dim(), "apply_whitening");
  return (t.basis.transpose() * (x - t.mean)).cwiseProduct(t.scale);
}

Matrix apply_whitening_rows(const WhiteningTransform& t, const Matrix& X) {
  require_dim(static_cast<std::size_t>(X.cols()), t.in_dim(), "apply_whitening");
  Matrix out = (X.rowwise() - t.mean.transpose()) * t.basis;
  out.array().rowwise() *= t.scale.transpose().array();
  return out;
}

void write_whitening(ByteWriter& w, const WhiteningTransform& t) {
  w.magic("PCAW");
  w.u32(static_cast<std::uint32_t>(t.in_dim()));
  w.u32(static_cast<std::uint32_t>(t.out_dim()));
  w.f64(t.epsilon);
  w.u32(static_cast<std::uint32_t>(t.clamped));
  for (Eigen::Index i = 0; i < t.mean.size(); ++i) w.f64(t.mean[i]);
  for (Eigen::Index i = 0; i < t.basis.rows(); ++i)
    for (Eigen::Index j = 0; j < t.basis.cols(); ++j) w.f64(t.basis(i, j));
  for (Eigen::Index j = 0; j < t.scale.size(); ++j) w.f64(t.scale[j]);
  for (Eigen::Index j = 0; j < t.eigenvalues.size(); ++j) w.f64(t.eigenvalues[j]);
}

WhiteningTransform read_whitening(ByteReader& r) {
  r.expect_magic("PCAW");
  WhiteningTransform t;
  const std::uint32_t d = r.u32();
  const std::uint32_t m = r.u32();
  if (m > d) fail(ErrorCode::Format, r.source() + ": whitening out_dim exceeds in_dim");
  t.epsilon = r.f64();
  t.clamped = r.u32();
  t.mean.resize(d);
  for (auto& v : t.mean) v = r.f64();
  t.basis.resize(d, m);
  for (std::uint32_t i = 0; i < d; ++i)
    for (std::uint32_t j = 0; j < m; ++j) t.basis(i, j) = r.f64();
  t.scale.resize(m);
  for (auto& v : t.scale) v = r.f64();
  t.eigenvalues.resize(m);
  for (auto& v : t.eigenvalues) v = r.f64();
  return t;
}

}  // namespace scriptoria
