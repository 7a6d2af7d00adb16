#pragma once

// Straightforward reference implementations used to check the library.

#include "scriptoria/core.hpp"

#include <cstdint>
#include <vector>

namespace scriptoria::testing {

/// Full Lloyd iterations from the given centers until assignments stop changing.
Matrix lloyd_kmeans(const Matrix& X, Matrix centers, int max_iterations = 1000);
/// Mean squared distance of each row to its nearest center.
double quantization_error(const Matrix& X, const Matrix& centers);

/// Residual sums per nearest center, scanning every descriptor against every
/// center with no shortcuts. Ties go to the lower center index.
Vector brute_force_vlad(const Matrix& D, const Matrix& centers);

/// Metric definitions evaluated from scratch on a relevance list.
double definition_ap(const std::vector<std::uint8_t>& rel);
double definition_precision(const std::vector<std::uint8_t>& rel, std::size_t n);
double definition_soft(const std::vector<std::uint8_t>& rel, std::size_t n);
double definition_hard(const std::vector<std::uint8_t>& rel, std::size_t n);

/// Unbiased covariance computed entry by entry.
Matrix covariance(const Matrix& X);
/// Cyclic Jacobi eigenvalues of a symmetric matrix, sorted descending.
std::vector<double> jacobi_eigenvalues(Matrix a);

Matrix random_gaussian(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed);

}  // namespace scriptoria::testing
