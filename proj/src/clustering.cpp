#include "scriptoria/clustering.hpp"

#include "scriptoria/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace scriptoria {

namespace fs = std::filesystem;

namespace {

double squared_distance(const double* a, const double* b, Eigen::Index d) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < d; ++i) {
    const double t = a[i] - b[i];
    s += t * t;
  }
  return s;
}

// Nearest center by squared distance, ties to the lower index.
std::uint32_t nearest_center(const double* x, const Matrix& centers) {
  const Eigen::Index d = centers.cols();
  double best = std::numeric_limits<double>::infinity();
  std::uint32_t best_idx = 0;
  for (Eigen::Index k = 0; k < centers.rows(); ++k) {
    const double s = squared_distance(x, centers.row(k).data(), d);
    if (s < best) {
      best = s;
      best_idx = static_cast<std::uint32_t>(k);
    }
  }
  return best_idx;
}

}  // namespace

std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t count, std::uint64_t seed) {
  if (count >= n) {
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), std::size_t{0});
    return all;
  }
  Rng rng(seed);
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < count; ++i) std::swap(idx[i], idx[i + uniform_index(rng, n - i)]);
  idx.resize(count);
  std::sort(idx.begin(), idx.end());
  return idx;
}

Matrix gather_rows(const Matrix& X, std::span<const std::size_t> rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), X.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = X.row(rows[i]);
  return out;
}

Matrix kmeanspp_seed(const Matrix& X, std::size_t k, Rng& rng) {
  const Eigen::Index n = X.rows();
  const Eigen::Index d = X.cols();
  Matrix centers(static_cast<Eigen::Index>(k), d);
  std::vector<double> dist(n, std::numeric_limits<double>::infinity());
  std::size_t chosen = uniform_index(rng, static_cast<std::size_t>(n));
  for (std::size_t c = 0; c < k; ++c) {
    centers.row(static_cast<Eigen::Index>(c)) = X.row(static_cast<Eigen::Index>(chosen));
    double total = 0.0;
    const double* cptr = centers.row(static_cast<Eigen::Index>(c)).data();
    for (Eigen::Index i = 0; i < n; ++i) {
      dist[i] = std::min(dist[i], squared_distance(X.row(i).data(), cptr, d));
      total += dist[i];
    }
    if (c + 1 == k) break;
    if (total <= 0.0) {
      fail(ErrorCode::Degenerate, "k-means++: fewer than K distinct points");
    }
    const double target = uniform01(rng) * total;
    double acc = 0.0;
    chosen = static_cast<std::size_t>(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (dist[i] <= 0.0) continue;
      acc += dist[i];
      chosen = static_cast<std::size_t>(i);
      if (acc > target) break;
    }
  }
  return centers;
}

Codebook minibatch_kmeans(const Matrix& X, const KMeansParams& params) {
  const auto n = static_cast<std::size_t>(X.rows());
  const std::size_t k = params.k;
  if (k == 0) fail(ErrorCode::InvalidArgument, "minibatch_kmeans: K must be at least 1");
  if (n < k) {
    fail(ErrorCode::InvalidArgument, "minibatch_kmeans: " + std::to_string(n) + " descriptors for K=" +
                                         std::to_string(k) + " clusters");
  }
  if (params.batch_size == 0) fail(ErrorCode::InvalidArgument, "minibatch_kmeans: batch_size must be >= 1");
  if (!X.allFinite()) fail(ErrorCode::InvalidArgument, "minibatch_kmeans: non-finite input");

  Rng rng(params.seed);
  // Seeding on a bounded subsample keeps k-means++ tractable for large K.
  const std::size_t seed_pool = std::min(n, std::max<std::size_t>(10 * k, 3 * params.batch_size));
  Matrix centers;
  if (seed_pool == n) {
    centers = kmeanspp_seed(X, k, rng);
  } else {
    const auto rows = sample_without_replacement(n, seed_pool, rng());
    centers = kmeanspp_seed(gather_rows(X, rows), k, rng);
  }

  const Eigen::Index d = X.cols();
  std::vector<double> counts(k, 0.0);
  std::vector<std::uint32_t> batch_assign;
  for (std::size_t epoch = 0; epoch < params.epochs; ++epoch) {
    const Matrix previous = centers;
    std::vector<std::size_t> hits(k, 0);
    const auto order = permutation(n, rng);
    for (std::size_t start = 0; start < n; start += params.batch_size) {
      const std::size_t end = std::min(n, start + params.batch_size);
      batch_assign.resize(end - start);
      parallel_for(end - start, [&](std::size_t i) {
        batch_assign[i] = nearest_center(X.row(static_cast<Eigen::Index>(order[start + i])).data(), centers);
      });
      for (std::size_t i = start; i < end; ++i) {
        const std::uint32_t c = batch_assign[i - start];
        counts[c] += 1.0;
        ++hits[c];
        const double eta = 1.0 / counts[c];
        centers.row(c) = (1.0 - eta) * centers.row(c) + eta * X.row(static_cast<Eigen::Index>(order[i]));
      }
    }
    double movement = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      movement = std::max(movement, (centers.row(c) - previous.row(c)).norm());
    }
    bool reseeded = false;
    if (epoch + 1 < params.epochs) {
      for (std::size_t c = 0; c < k; ++c) {
        if (hits[c] != 0) continue;
        // Pick a point that does not coincide with an existing center.
        for (int attempt = 0; attempt < 16; ++attempt) {
          const auto row = static_cast<Eigen::Index>(uniform_index(rng, n));
          const std::uint32_t nc = nearest_center(X.row(row).data(), centers);
          if (squared_distance(X.row(row).data(), centers.row(nc).data(), d) > 0.0) {
            centers.row(c) = X.row(row);
            counts[c] = 0.0;
            reseeded = true;
            break;
          }
        }
      }
    }
    if (!reseeded && movement < params.movement_tolerance) break;
  }

  Codebook cb;
  cb.centers = std::move(centers);
  cb.seed = params.seed;
  cb.counts.assign(k, 0);
  for (const auto& a : assign_all(X, cb)) ++cb.counts[a.idx1];
  return cb;
}

Assignment assign_nearest(std::span<const double> x, const Codebook& cb) {
  require_dim(x.size(), cb.dim(), "assign_nearest");
  if (cb.k() == 0) fail(ErrorCode::State, "assign_nearest: empty codebook");
  const Eigen::Index d = cb.centers.cols();
  double best = std::numeric_limits<double>::infinity();
  double second = std::numeric_limits<double>::infinity();
  std::uint32_t bi = 0, si = 0;
  for (Eigen::Index k = 0; k < cb.centers.rows(); ++k) {
    const double s = squared_distance(x.data(), cb.centers.row(k).data(), d);
    if (s < best) {
      second = best;
      si = bi;
      best = s;
      bi = static_cast<std::uint32_t>(k);
    } else if (s < second) {
      second = s;
      si = static_cast<std::uint32_t>(k);
    }
  }
  Assignment a;
  a.idx1 = bi;
  a.d1 = std::sqrt(best);
  if (cb.k() == 1) {
    a.idx2 = bi;
    a.d2 = a.d1;
    a.ratio = 0.0;
    return a;
  }
  a.idx2 = si;
  a.d2 = std::sqrt(second);
  a.ratio = a.d1 == 0.0 ? 0.0 : a.d1 / a.d2;
  return a;
}

std::vector<Assignment> assign_all(const Matrix& X, const Codebook& cb) {
  require_dim(static_cast<std::size_t>(X.cols()), cb.dim(), "assign_all");
  std::vector<Assignment> out(static_cast<std::size_t>(X.rows()));
  parallel_for(out.size(), [&](std::size_t i) {
    const auto row = X.row(static_cast<Eigen::Index>(i));
    out[i] = assign_nearest(std::span<const double>(row.data(), static_cast<std::size_t>(row.size())), cb);
  });
  return out;
}

std::vector<std::uint8_t> ratio_filter(std::span<const Assignment> assignments, double ratio_max) {
  std::vector<std::uint8_t> keep(assignments.size());
  for (std::size_t i = 0; i < assignments.size(); ++i) keep[i] = assignments[i].ratio <= ratio_max ? 1 : 0;
  return keep;
}

SurrogateDataset build_surrogate_dataset(std::span<const float> patches, std::span<const PatchMeta> meta,
                                         std::span<const Assignment> assignments,
                                         std::span<const std::uint8_t> mask, std::size_t k,
                                         std::uint8_t bytes_per_pixel) {
  const std::size_t n = meta.size();
  if (assignments.size() != n || mask.size() != n || patches.size() != n * kPatchPixels) {
    fail(ErrorCode::Dimension, "build_surrogate_dataset: length mismatch between patches (" +
                                   std::to_string(patches.size() / kPatchPixels) + "), metadata (" +
                                   std::to_string(n) + "), assignments (" + std::to_string(assignments.size()) +
                                   ") and mask (" + std::to_string(mask.size()) + ")");
  }
  SurrogateDataset ds;
  ds.bytes_per_pixel = bytes_per_pixel;
  ds.class_histogram.assign(k, 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (!mask[i]) continue;
    const std::uint32_t label = assignments[i].idx1;
    if (label >= k) fail(ErrorCode::InvalidArgument, "build_surrogate_dataset: label out of range");
    ds.labels.push_back(label);
    ds.meta.push_back(meta[i]);
    ds.pixels.insert(ds.pixels.end(), patches.begin() + static_cast<std::ptrdiff_t>(i * kPatchPixels),
                     patches.begin() + static_cast<std::ptrdiff_t>((i + 1) * kPatchPixels));
    ++ds.class_histogram[label];
  }
  if (ds.labels.empty()) fail(ErrorCode::Degenerate, "empty surrogate dataset");
  for (std::size_t c = 0; c < k; ++c)
    if (ds.class_histogram[c] == 0) ds.empty_classes.push_back(static_cast<std::uint32_t>(c));
  return ds;
}

void export_surrogate_dataset(const SurrogateDataset& ds, const fs::path& dir) {
  fs::create_directories(dir);
  PatchBlock block;
  block.side = kPatchSide;
  block.bytes_per_pixel = ds.bytes_per_pixel;
  block.pixels = ds.pixels;
  write_file_atomic(dir / "patches.bin", encode_sptc(block));
  write_file_atomic(dir / "labels.bin", encode_slbl(ds.labels));
  std::string meta = "row,image,keypoint,label\n";
  for (std::size_t i = 0; i < ds.size(); ++i) {
    meta += std::to_string(i) + "," + quote_csv(ds.meta[i].image) + "," + std::to_string(ds.meta[i].keypoint) + "," +
            std::to_string(ds.labels[i]) + "\n";
  }
  write_file_atomic(dir / "meta.csv", meta);
  std::string hist = "label,count\n";
  for (std::size_t c = 0; c < ds.class_histogram.size(); ++c) {
    hist += std::to_string(c) + "," + std::to_string(ds.class_histogram[c]) + "\n";
  }
  write_file_atomic(dir / "histogram.csv", hist);
}

void write_codebook(ByteWriter& w, const Codebook& cb) {
  w.magic("CBK1");
  w.u64(cb.seed);
  w.u32(static_cast<std::uint32_t>(cb.k()));
  w.u32(static_cast<std::uint32_t>(cb.dim()));
  for (Eigen::Index i = 0; i < cb.centers.rows(); ++i)
    for (Eigen::Index j = 0; j < cb.centers.cols(); ++j) w.f64(cb.centers(i, j));
  for (auto c : cb.counts) w.u64(c);
}

Codebook read_codebook(ByteReader& r) {
  r.expect_magic("CBK1");
  Codebook cb;
  cb.seed = r.u64();
  const std::uint32_t k = r.u32();
  const std::uint32_t d = r.u32();
  if (k == 0 || d == 0) fail(ErrorCode::Format, r.source() + ": empty codebook");
  cb.centers.resize(k, d);
  for (std::uint32_t i = 0; i < k; ++i)
    for (std::uint32_t j = 0; j < d; ++j) cb.centers(i, j) = r.f64();
  cb.counts.resize(k);
  for (auto& c : cb.counts) c = r.u64();
  return cb;
}

}  // namespace scriptoria
