#pragma once

#include "scriptoria/clustering.hpp"
#include "scriptoria/core.hpp"
#include "scriptoria/normalize.hpp"
#include "scriptoria/whitening.hpp"

#include <filesystem>
#include <span>
#include <vector>

namespace scriptoria {

struct Encoded {
  Vector values;
  bool zero = false;  // no usable signal (no descriptors, or all residuals cancel)
};

/// Per-center residual sums, concatenated (K*d), before any normalization.
/// Descriptors are accumulated in lexicographic row order so the result does
/// not depend on input order.
Vector vlad_residuals(const Matrix& descriptors, const Codebook& cb);

/// Residual sums, power normalization, L2 normalization.
Encoded vlad_encode(const Matrix& descriptors, const Codebook& cb, PowerNormParams power = {});

/// Per-dimension sum, L2 normalized.
Encoded sum_pool(const Matrix& descriptors);

struct MVladParams {
  std::size_t n_codebooks = 5;
  KMeansParams kmeans{.k = 100};
  PowerNormParams power;
  std::size_t pca_dim = 0;  // 0: full usable dimension
  double pca_epsilon = 1e-9;
};

struct MVladModel {
  std::vector<Codebook> codebooks;
  WhiteningTransform joint_whitening;
  PowerNormParams power;

  bool fitted() const { return !codebooks.empty() && joint_whitening.in_dim() > 0; }
  std::size_t input_dim() const { return codebooks.empty() ? 0 : codebooks.front().dim(); }
  std::size_t concat_dim() const;
  std::size_t output_dim() const { return joint_whitening.out_dim(); }
};

/// Codebooks are fit on disjoint random subsamples of the pooled training
/// descriptors (independent subsamples when the pool is too small), each with
/// its own k-means seed; the joint whitening is fit on the concatenated
/// per-codebook VLADs of the training images.
MVladModel fit_mvlad(std::span<const Matrix> train_sets, const MVladParams& params);

/// Concatenation of the per-codebook normalized VLADs (before whitening).
Vector mvlad_concat(const Matrix& descriptors, const MVladModel& model, bool* all_zero = nullptr);
Encoded mvlad_encode(const Matrix& descriptors, const MVladModel& model);

enum class EncoderKind : std::uint8_t { Sum = 0, Vlad = 1, MVlad = 2 };

/// Serializable encoder: sum pooling, single-codebook VLAD or m-VLAD.
struct EncoderModel {
  EncoderKind kind = EncoderKind::MVlad;
  std::size_t input_dim = 0;
  std::uint64_t config_hash = 0;
  MVladModel mvlad;  // Vlad uses codebooks[0] only and no whitening

  std::size_t output_dim() const;
  Encoded encode(const Matrix& descriptors) const;
};

EncoderModel fit_encoder(EncoderKind kind, std::span<const Matrix> train_sets, const MVladParams& params);

std::string encode_encoder_model(const EncoderModel& m);
EncoderModel decode_encoder_model(std::string_view bytes, const std::string& source);

}  // namespace scriptoria
