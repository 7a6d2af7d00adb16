#include "scriptoria/encoding.hpp"

#include "scriptoria/parallel.hpp"

#include <algorithm>
#include <numeric>

namespace scriptoria {

namespace {

std::vector<Eigen::Index> lexicographic_order(const Matrix& m) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(m.rows()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    const double* ra = m.row(a).data();
    const double* rb = m.row(b).data();
    return std::lexicographical_compare(ra, ra + m.cols(), rb, rb + m.cols());
  });
  return order;
}

}  // namespace

Vector vlad_residuals(const Matrix& descriptors, const Codebook& cb) {
  require_dim(static_cast<std::size_t>(descriptors.cols()), cb.dim(), "vlad_encode");
  const auto d = static_cast<Eigen::Index>(cb.dim());
  Vector v = Vector::Zero(static_cast<Eigen::Index>(cb.k()) * d);
  for (Eigen::Index r : lexicographic_order(descriptors)) {
    const auto row = descriptors.row(r);
    const Assignment a = assign_nearest(std::span<const double>(row.data(), static_cast<std::size_t>(d)), cb);
    v.segment(a.idx1 * d, d) += (row - cb.centers.row(a.idx1)).transpose();
  }
  return v;
}

Encoded vlad_encode(const Matrix& descriptors, const Codebook& cb, PowerNormParams power) {
  const Vector raw = vlad_residuals(descriptors, cb);
  const L2Result n = l2_normalize(power_normalize(raw, power));
  return {n.values, n.zero};
}

Encoded sum_pool(const Matrix& descriptors) {
  if (descriptors.rows() == 0) fail(ErrorCode::InvalidArgument, "sum_pool: no descriptors");
  Vector sum = Vector::Zero(descriptors.cols());
  for (Eigen::Index r : lexicographic_order(descriptors)) sum += descriptors.row(r).transpose();
  const L2Result n = l2_normalize(sum);
  return {n.values, n.zero};
}

std::size_t MVladModel::concat_dim() const {
  std::size_t total = 0;
  for (const auto& cb : codebooks) total += cb.k() * cb.dim();
  return total;
}

MVladModel fit_mvlad(std::span<const Matrix> train_sets, const MVladParams& params) {
  if (train_sets.empty()) fail(ErrorCode::InvalidArgument, "fit_mvlad: empty training set");
  if (params.n_codebooks == 0) fail(ErrorCode::InvalidArgument, "fit_mvlad: need at least one codebook");
  const Eigen::Index d = train_sets.front().cols();
  Eigen::Index total = 0;
  for (const auto& s : train_sets) {
    require_dim(static_cast<std::size_t>(s.cols()), static_cast<std::size_t>(d), "fit_mvlad descriptor set");
    total += s.rows();
  }
  const std::size_t k = params.kmeans.k;
  if (static_cast<std::size_t>(total) < k) {
    fail(ErrorCode::InvalidArgument, "fit_mvlad: insufficient descriptors (" + std::to_string(total) +
                                         ") for K=" + std::to_string(k));
  }
  Matrix pool(total, d);
  {
    Eigen::Index at = 0;
    for (const auto& s : train_sets) {
      pool.middleRows(at, s.rows()) = s;
      at += s.rows();
    }
  }

  MVladModel model;
  model.power = params.power;
  const auto n = static_cast<std::size_t>(total);
  const std::size_t per = std::min(params.kmeans.sample_size, n / params.n_codebooks);
  Rng rng(params.kmeans.seed);
  const bool disjoint = per >= k;
  const auto order = permutation(n, rng);
  for (std::size_t c = 0; c < params.n_codebooks; ++c) {
    std::vector<std::size_t> rows;
    if (disjoint) {
      rows.assign(order.begin() + static_cast<std::ptrdiff_t>(c * per),
                  order.begin() + static_cast<std::ptrdiff_t>((c + 1) * per));
      std::sort(rows.begin(), rows.end());
    } else {
      rows = sample_without_replacement(n, std::min(n, params.kmeans.sample_size), params.kmeans.seed + 7919 * (c + 1));
    }
    KMeansParams kp = params.kmeans;
    kp.seed = params.kmeans.seed + c;
    model.codebooks.push_back(minibatch_kmeans(gather_rows(pool, rows), kp));
  }

  Matrix concat(static_cast<Eigen::Index>(train_sets.size()), static_cast<Eigen::Index>(model.concat_dim()));
  parallel_for(train_sets.size(), [&](std::size_t i) {
    concat.row(static_cast<Eigen::Index>(i)) = mvlad_concat(train_sets[i], model).transpose();
  });
  model.joint_whitening = fit_pca_whitening(concat, params.pca_dim, params.pca_epsilon);
  return model;
}

Vector mvlad_concat(const Matrix& descriptors, const MVladModel& model, bool* all_zero) {
  Vector out(static_cast<Eigen::Index>(model.concat_dim()));
  Eigen::Index at = 0;
  bool zero = true;
  for (const auto& cb : model.codebooks) {
    const Encoded e = vlad_encode(descriptors, cb, model.power);
    zero = zero && e.zero;
    out.segment(at, e.values.size()) = e.values;
    at += e.values.size();
  }
  if (all_zero) *all_zero = zero;
  return out;
}

Encoded mvlad_encode(const Matrix& descriptors, const MVladModel& model) {
  if (!model.fitted()) fail(ErrorCode::State, "mvlad_encode: model is not fit");
  require_dim(static_cast<std::size_t>(descriptors.cols()), model.input_dim(), "mvlad_encode");
  bool zero = false;
  const Vector concat = mvlad_concat(descriptors, model, &zero);
  if (zero) return {Vector::Zero(static_cast<Eigen::Index>(model.output_dim())), true};
  const L2Result n = l2_normalize(apply_whitening(model.joint_whitening, concat));
  return {n.values, n.zero};
}

std::size_t EncoderModel::output_dim() const {
  switch (kind) {
    case EncoderKind::Sum:
      return input_dim;
    case EncoderKind::Vlad:
      return mvlad.codebooks.empty() ? 0 : mvlad.codebooks[0].k() * mvlad.codebooks[0].dim();
    case EncoderKind::MVlad:
      return mvlad.output_dim();
  }
  return 0;
}

Encoded EncoderModel::encode(const Matrix& descriptors) const {
  require_dim(static_cast<std::size_t>(descriptors.cols()), input_dim, "encoder input");
  switch (kind) {
    case EncoderKind::Sum:
      if (descriptors.rows() == 0) return {Vector::Zero(static_cast<Eigen::Index>(input_dim)), true};
      return sum_pool(descriptors);
    case EncoderKind::Vlad:
      return vlad_encode(descriptors, mvlad.codebooks.at(0), mvlad.power);
    case EncoderKind::MVlad:
      return mvlad_encode(descriptors, mvlad);
  }
  fail(ErrorCode::State, "unknown encoder kind");
}

EncoderModel fit_encoder(EncoderKind kind, std::span<const Matrix> train_sets, const MVladParams& params) {
  if (train_sets.empty()) fail(ErrorCode::InvalidArgument, "fit_encoder: empty training set");
  EncoderModel m;
  m.kind = kind;
  m.input_dim = static_cast<std::size_t>(train_sets.front().cols());
  if (kind == EncoderKind::MVlad) {
    m.mvlad = fit_mvlad(train_sets, params);
  } else if (kind == EncoderKind::Vlad) {
    Matrix pool;
    Eigen::Index total = 0;
    for (const auto& s : train_sets) {
      require_dim(static_cast<std::size_t>(s.cols()), m.input_dim, "fit_encoder descriptor set");
      total += s.rows();
    }
    pool.resize(total, static_cast<Eigen::Index>(m.input_dim));
    Eigen::Index at = 0;
    for (const auto& s : train_sets) {
      pool.middleRows(at, s.rows()) = s;
      at += s.rows();
    }
    const auto rows = sample_without_replacement(static_cast<std::size_t>(total), params.kmeans.sample_size,
                                                 params.kmeans.seed);
    m.mvlad.power = params.power;
    m.mvlad.codebooks.push_back(minibatch_kmeans(gather_rows(pool, rows), params.kmeans));
  }
  return m;
}

std::string encode_encoder_model(const EncoderModel& m) {
  ByteWriter w;
  w.magic("ENCM");
  w.u16(1);
  w.u64(m.config_hash);
  w.u8(static_cast<std::uint8_t>(m.kind));
  w.u32(static_cast<std::uint32_t>(m.input_dim));
  w.f64(m.mvlad.power.rho);
  w.u32(static_cast<std::uint32_t>(m.mvlad.codebooks.size()));
  for (const auto& cb : m.mvlad.codebooks) write_codebook(w, cb);
  const bool has_whitening = m.kind == EncoderKind::MVlad;
  w.u8(has_whitening ? 1 : 0);
  if (has_whitening) write_whitening(w, m.mvlad.joint_whitening);
  return w.take();
}

EncoderModel decode_encoder_model(std::string_view bytes, const std::string& source) {
  ByteReader r(bytes, source);
  r.expect_magic("ENCM");
  r.expect_version(1);
  EncoderModel m;
  m.config_hash = r.u64();
  const std::uint8_t kind = r.u8();
  if (kind > 2) fail(ErrorCode::Format, source + ": unknown encoder kind");
  m.kind = static_cast<EncoderKind>(kind);
  m.input_dim = r.u32();
  m.mvlad.power.rho = r.f64();
  const std::uint32_t n_cb = r.u32();
  for (std::uint32_t i = 0; i < n_cb; ++i) {
    m.mvlad.codebooks.push_back(read_codebook(r));
    if (m.mvlad.codebooks.back().dim() != m.input_dim) fail(ErrorCode::Format, source + ": codebook dimension mismatch");
  }
  if (r.u8()) m.mvlad.joint_whitening = read_whitening(r);
  r.expect_end();
  if (m.kind == EncoderKind::MVlad && m.mvlad.joint_whitening.in_dim() != m.mvlad.concat_dim()) {
    fail(ErrorCode::Format, source + ": whitening input dimension does not match the codebooks");
  }
  if (m.kind != EncoderKind::Sum && m.mvlad.codebooks.empty()) fail(ErrorCode::Format, source + ": missing codebook");
  return m;
}

}  // namespace scriptoria
