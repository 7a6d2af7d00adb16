#pragma once

#include "scriptoria/core.hpp"

namespace scriptoria {

/// `paper`: elementwise sqrt, then L1 normalization.
/// `rootsift`: L1 normalization, then elementwise sqrt (unit L2 output).
enum class HellingerOrder { Paper, RootSift };

struct PowerNormParams {
  double rho = 0.5;  // (0, 1]
};

/// Zero input maps to zero. Negative entries are rejected.
Vector hellinger_normalize(const Vector& v, HellingerOrder order = HellingerOrder::Paper);

/// sign(v_i) * |v_i|^rho
Vector power_normalize(const Vector& v, PowerNormParams params = {});

struct L2Result {
  Vector values;
  bool zero = false;  // input had zero norm; values are all zero
};

L2Result l2_normalize(const Vector& v);

/// In-place row-wise variants used on descriptor matrices.
void hellinger_normalize_rows(Matrix& m, HellingerOrder order = HellingerOrder::Paper);

}  // namespace scriptoria
