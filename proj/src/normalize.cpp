#include "scriptoria/normalize.hpp"

#include <cmath>

namespace scriptoria {

Vector hellinger_normalize(const Vector& v, HellingerOrder order) {
  if ((v.array() < 0.0).any()) fail(ErrorCode::InvalidArgument, "hellinger_normalize: negative entry");
  if (order == HellingerOrder::Paper) {
    Vector s = v.array().sqrt();
    const double l1 = s.sum();
    return l1 > 0.0 ? Vector(s / l1) : Vector(Vector::Zero(v.size()));
  }
  const double l1 = v.sum();
  if (l1 <= 0.0) return Vector::Zero(v.size());
  return (v / l1).array().sqrt();
}

Vector power_normalize(const Vector& v, PowerNormParams params) {
  if (!(params.rho > 0.0 && params.rho <= 1.0)) {
    fail(ErrorCode::InvalidArgument, "power_normalize: rho must lie in (0, 1]");
  }
  if (params.rho == 1.0) return v;
  Vector out(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double a = std::pow(std::abs(v[i]), params.rho);
    out[i] = v[i] < 0.0 ? -a : (v[i] > 0.0 ? a : 0.0);
  }
  return out;
}

L2Result l2_normalize(const Vector& v) {
  const double n = v.norm();
  if (n == 0.0 || !std::isfinite(n)) return {Vector::Zero(v.size()), true};
  return {v / n, false};
}

void hellinger_normalize_rows(Matrix& m, HellingerOrder order) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Vector row = m.row(r).transpose();
    m.row(r) = hellinger_normalize(row, order).transpose();
  }
}

}  // namespace scriptoria
