#pragma once

#include "scriptoria/core.hpp"
#include "scriptoria/formats.hpp"

#include <cstddef>

namespace scriptoria {

/// PCA whitening y = diag(scale) * basis^T * (x - mean).
struct WhiteningTransform {
  Vector mean;          // in_dim
  Matrix basis;         // in_dim x out_dim, orthonormal columns
  Vector scale;         // out_dim, 1/sqrt(max(lambda, epsilon*lambda_max))
  Vector eigenvalues;   // out_dim, unclamped covariance eigenvalues (descending)
  double epsilon = 1e-9;
  std::size_t clamped = 0;  // number of eigenvalues raised to epsilon*lambda_max

  std::size_t in_dim() const { return static_cast<std::size_t>(mean.size()); }
  std::size_t out_dim() const { return static_cast<std::size_t>(scale.size()); }

  static WhiteningTransform identity(std::size_t dim);
};

/// Fits on the rows of X (unbiased covariance). out_dim == 0 selects the full
/// usable dimension min(d, n-1). When d > n the eigenproblem is solved on the
/// n x n Gram matrix, which has the same nonzero spectrum.
WhiteningTransform fit_pca_whitening(const Matrix& X, std::size_t out_dim, double epsilon = 1e-9);

Vector apply_whitening(const WhiteningTransform& t, const Vector& x);
Matrix apply_whitening_rows(const WhiteningTransform& t, const Matrix& X);

void write_whitening(ByteWriter& w, const WhiteningTransform& t);
WhiteningTransform read_whitening(ByteReader& r);

}  // namespace scriptoria
