#include "scriptoria/keypoints.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>

namespace scriptoria {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr int kOriBins = 36;
constexpr int kDescWidth = 4;
constexpr int kDescBins = 8;
constexpr int kMaxRefineSteps = 5;

GrayImage gaussian_blur(const GrayImage& src, double sigma) {
  if (sigma <= 0.0) return src;
  const int radius = std::max(1, static_cast<int>(std::ceil(4.0 * sigma)));
  std::vector<double> kernel(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += kernel[i + radius];
  }
  for (auto& k : kernel) k /= sum;

  const int w = src.width, h = src.height;
  GrayImage tmp(w, h), out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) acc += kernel[i + radius] * src.at(std::clamp(x + i, 0, w - 1), y);
      tmp.at(x, y) = static_cast<float>(acc);
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) acc += kernel[i + radius] * tmp.at(x, std::clamp(y + i, 0, h - 1));
      out.at(x, y) = static_cast<float>(acc);
    }
  }
  return out;
}

GrayImage downsample(const GrayImage& src) {
  GrayImage out(src.width / 2, src.height / 2);
  for (int y = 0; y < out.height; ++y)
    for (int x = 0; x < out.width; ++x) out.at(x, y) = src.at(2 * x, 2 * y);
  return out;
}

struct Gradient {
  double magnitude;
  double angle;  // atan2(dy, dx), x right, y down
};

Gradient gradient_at(const GrayImage& img, int x, int y) {
  const double dx = static_cast<double>(img.at(x + 1, y)) - img.at(x - 1, y);
  const double dy = static_cast<double>(img.at(x, y + 1)) - img.at(x, y - 1);
  return {std::sqrt(dx * dx + dy * dy), std::atan2(dy, dx)};
}

double wrap_angle(double a) {
  a = std::fmod(a, kTwoPi);
  if (a < 0.0) a += kTwoPi;
  if (a >= kTwoPi) a = 0.0;
  return a;
}

}  // namespace

void DetectorParams::validate() const {
  if (octaves < 0) fail(ErrorCode::InvalidArgument, "detector: octaves must be >= 0");
  if (scales_per_octave < 2) fail(ErrorCode::InvalidArgument, "detector: scales_per_octave must be >= 2");
  if (!(base_sigma > 0.0) || !(contrast_threshold > 0.0) || !(edge_ratio > 0.0) || input_sigma < 0.0) {
    fail(ErrorCode::InvalidArgument, "detector: sigma, contrast and edge parameters must be positive");
  }
  if (border < 1) fail(ErrorCode::InvalidArgument, "detector: border must be >= 1");
}

const GrayImage& ScaleSpace::gauss_for(const KeypointRecord& kp, double* octave_sigma) const {
  if (kp.octave < 0 || kp.octave >= static_cast<int>(octaves.size())) {
    fail(ErrorCode::InvalidArgument, "keypoint octave outside the scale space");
  }
  const int s = params.scales_per_octave;
  const int layer = std::clamp(static_cast<int>(std::lround(kp.layer)), 0, s + 2);
  if (octave_sigma) *octave_sigma = params.base_sigma * std::pow(2.0, kp.layer / s);
  return octaves[kp.octave].gauss[layer];
}

ScaleSpace build_scale_space(const GrayImage& img, const DetectorParams& params) {
  params.validate();
  ScaleSpace ss;
  ss.params = params;
  ss.width = img.width;
  ss.height = img.height;
  if (std::min(img.width, img.height) < 16) return ss;

  const int s = params.scales_per_octave;
  const double k = std::pow(2.0, 1.0 / s);
  int n_oct = params.octaves;
  if (n_oct == 0) {
    for (int w = img.width, h = img.height; std::min(w, h) >= 16; w /= 2, h /= 2) ++n_oct;
  }

  const double initial =
      std::sqrt(std::max(params.base_sigma * params.base_sigma - params.input_sigma * params.input_sigma, 0.01));
  std::vector<double> increments(s + 3, 0.0);
  for (int i = 1; i < s + 3; ++i) {
    const double prev = params.base_sigma * std::pow(k, i - 1);
    const double total = prev * k;
    increments[i] = std::sqrt(total * total - prev * prev);
  }

  for (int o = 0; o < n_oct; ++o) {
    Octave oct;
    if (o == 0) {
      oct.gauss.push_back(gaussian_blur(img, initial));
    } else {
      const GrayImage next = downsample(ss.octaves.back().gauss[s]);
      if (std::min(next.width, next.height) < 2 * params.border + 3) break;
      oct.gauss.push_back(next);
    }
    oct.width = oct.gauss[0].width;
    oct.height = oct.gauss[0].height;
    for (int i = 1; i < s + 3; ++i) oct.gauss.push_back(gaussian_blur(oct.gauss[i - 1], increments[i]));
    for (int i = 0; i < s + 2; ++i) {
      GrayImage d(oct.width, oct.height);
      for (std::size_t p = 0; p < d.values.size(); ++p) d.values[p] = oct.gauss[i].values[p] - oct.gauss[i + 1].values[p];
      oct.dog.push_back(std::move(d));
    }
    ss.octaves.push_back(std::move(oct));
  }
  return ss;
}

namespace {

bool is_extremum(const Octave& oct, int layer, int x, int y, bool minimum) {
  const float v = oct.dog[layer].at(x, y);
  for (int l = layer - 1; l <= layer + 1; ++l) {
    const GrayImage& d = oct.dog[l];
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        if (l == layer && dx == 0 && dy == 0) continue;
        const float n = d.at(x + dx, y + dy);
        if (minimum ? n < v : n > v) return false;
      }
    }
  }
  return true;
}

// Quadratic refinement of a candidate; returns false when it is rejected.
bool refine(const ScaleSpace& ss, int o, int layer, int x, int y, KeypointRecord& kp) {
  const DetectorParams& p = ss.params;
  const Octave& oct = ss.octaves[o];
  const int s = p.scales_per_octave;
  Eigen::Vector3d offset = Eigen::Vector3d::Zero();
  Eigen::Vector3d grad;
  int step = 0;
  for (; step < kMaxRefineSteps; ++step) {
    const GrayImage& prev = oct.dog[layer - 1];
    const GrayImage& cur = oct.dog[layer];
    const GrayImage& next = oct.dog[layer + 1];
    const double v = cur.at(x, y);
    grad << 0.5 * (cur.at(x + 1, y) - cur.at(x - 1, y)), 0.5 * (cur.at(x, y + 1) - cur.at(x, y - 1)),
        0.5 * (next.at(x, y) - prev.at(x, y));
    const double dxx = cur.at(x + 1, y) + cur.at(x - 1, y) - 2.0 * v;
    const double dyy = cur.at(x, y + 1) + cur.at(x, y - 1) - 2.0 * v;
    const double dss = next.at(x, y) + prev.at(x, y) - 2.0 * v;
    const double dxy = 0.25 * (cur.at(x + 1, y + 1) - cur.at(x - 1, y + 1) - cur.at(x + 1, y - 1) + cur.at(x - 1, y - 1));
    const double dxs = 0.25 * (next.at(x + 1, y) - next.at(x - 1, y) - prev.at(x + 1, y) + prev.at(x - 1, y));
    const double dys = 0.25 * (next.at(x, y + 1) - next.at(x, y - 1) - prev.at(x, y + 1) + prev.at(x, y - 1));
    Eigen::Matrix3d H;
    H << dxx, dxy, dxs, dxy, dyy, dys, dxs, dys, dss;
    Eigen::FullPivLU<Eigen::Matrix3d> lu(H);
    if (!lu.isInvertible()) return false;
    offset = -lu.solve(grad);
    if (std::abs(offset[0]) < 0.5 && std::abs(offset[1]) < 0.5 && std::abs(offset[2]) < 0.5) break;
    if (offset.cwiseAbs().maxCoeff() > 1e3) return false;
    x += static_cast<int>(std::lround(offset[0]));
    y += static_cast<int>(std::lround(offset[1]));
    layer += static_cast<int>(std::lround(offset[2]));
    if (layer < 1 || layer > s || x < p.border || x >= oct.width - p.border || y < p.border ||
        y >= oct.height - p.border) {
      return false;
    }
  }
  if (step >= kMaxRefineSteps) return false;

  const GrayImage& cur = oct.dog[layer];
  const double v = cur.at(x, y);
  const double contrast = v + 0.5 * grad.dot(offset);
  if (std::abs(contrast) < p.contrast_threshold) return false;

  const double dxx = cur.at(x + 1, y) + cur.at(x - 1, y) - 2.0 * v;
  const double dyy = cur.at(x, y + 1) + cur.at(x, y - 1) - 2.0 * v;
  const double dxy = 0.25 * (cur.at(x + 1, y + 1) - cur.at(x - 1, y + 1) - cur.at(x + 1, y - 1) + cur.at(x - 1, y - 1));
  const double tr = dxx + dyy;
  const double det = dxx * dyy - dxy * dxy;
  const double r = p.edge_ratio;
  if (det <= 0.0 || tr * tr * r >= (r + 1.0) * (r + 1.0) * det) return false;

  const double scale = std::ldexp(1.0, o);
  kp.x = (x + offset[0]) * scale;
  kp.y = (y + offset[1]) * scale;
  kp.octave = o;
  kp.layer = layer + offset[2];
  kp.scale_sigma = p.base_sigma * std::pow(2.0, kp.layer / s) * scale;
  kp.response = contrast;
  kp.polarity = contrast < 0.0 ? Polarity::Min : Polarity::Max;
  return true;
}

}  // namespace

std::vector<KeypointRecord> detect_keypoints(const ScaleSpace& ss) {
  const DetectorParams& p = ss.params;
  const int s = p.scales_per_octave;
  const float prefilter = static_cast<float>(0.5 * p.contrast_threshold);
  std::vector<KeypointRecord> out;
  for (int o = 0; o < static_cast<int>(ss.octaves.size()); ++o) {
    const Octave& oct = ss.octaves[o];
    for (int layer = 1; layer <= s; ++layer) {
      const GrayImage& d = oct.dog[layer];
      for (int y = p.border; y < oct.height - p.border; ++y) {
        for (int x = p.border; x < oct.width - p.border; ++x) {
          const float v = d.at(x, y);
          if (std::abs(v) < prefilter) continue;
          const bool minimum = v < 0.f;
          if (!minimum && p.mode == DetectorMode::Restricted) continue;
          if (!is_extremum(oct, layer, x, y, minimum)) continue;
          KeypointRecord kp;
          if (!refine(ss, o, layer, x, y, kp)) continue;
          if ((kp.polarity == Polarity::Min) != minimum) continue;
          if (kp.x < 0.0 || kp.y < 0.0 || kp.x >= ss.width || kp.y >= ss.height) continue;
          out.push_back(kp);
        }
      }
    }
  }
  return out;
}

std::vector<KeypointRecord> detect_keypoints(const GrayImage& img, const DetectorParams& params) {
  return detect_keypoints(build_scale_space(img, params));
}

std::vector<KeypointRecord> dedupe_keypoints(std::span<const KeypointRecord> kps) {
  std::map<std::pair<long, long>, std::size_t> winner;
  for (std::size_t i = 0; i < kps.size(); ++i) {
    const auto key = std::make_pair(std::lround(kps[i].x), std::lround(kps[i].y));
    auto [it, inserted] = winner.emplace(key, i);
    if (!inserted && std::abs(kps[i].response) > std::abs(kps[it->second].response)) it->second = i;
  }
  std::vector<KeypointRecord> out;
  out.reserve(winner.size());
  for (std::size_t i = 0; i < kps.size(); ++i) {
    if (winner.at({std::lround(kps[i].x), std::lround(kps[i].y)}) == i) out.push_back(kps[i]);
  }
  return out;
}

double compute_orientation(const ScaleSpace& ss, const KeypointRecord& kp) {
  double sigma = 0.0;
  const GrayImage& img = ss.gauss_for(kp, &sigma);
  const double scale = std::ldexp(1.0, kp.octave);
  const int cx = static_cast<int>(std::lround(kp.x / scale));
  const int cy = static_cast<int>(std::lround(kp.y / scale));
  const double weight_sigma = 1.5 * sigma;
  const int radius = static_cast<int>(std::lround(3.0 * weight_sigma));

  std::array<double, kOriBins> hist{};
  for (int dy = -radius; dy <= radius; ++dy) {
    const int y = cy + dy;
    if (y < 1 || y >= img.height - 1) continue;
    for (int dx = -radius; dx <= radius; ++dx) {
      const int x = cx + dx;
      if (x < 1 || x >= img.width - 1) continue;
      const Gradient g = gradient_at(img, x, y);
      const double w = std::exp(-(dx * dx + dy * dy) / (2.0 * weight_sigma * weight_sigma));
      int bin = static_cast<int>(std::lround(wrap_angle(g.angle) * kOriBins / kTwoPi));
      bin %= kOriBins;
      hist[bin] += w * g.magnitude;
    }
  }

  std::array<double, kOriBins> smooth{};
  for (int i = 0; i < kOriBins; ++i) {
    auto at = [&](int j) { return hist[(j + kOriBins) % kOriBins]; };
    smooth[i] = (at(i - 2) + at(i + 2)) * (1.0 / 16) + (at(i - 1) + at(i + 1)) * (4.0 / 16) + at(i) * (6.0 / 16);
  }
  const int peak = static_cast<int>(std::max_element(smooth.begin(), smooth.end()) - smooth.begin());
  if (smooth[peak] <= 0.0) return 0.0;
  const double l = smooth[(peak + kOriBins - 1) % kOriBins];
  const double r = smooth[(peak + 1) % kOriBins];
  const double denom = l - 2.0 * smooth[peak] + r;
  const double offset = denom != 0.0 ? 0.5 * (l - r) / denom : 0.0;
  return wrap_angle((peak + offset) * kTwoPi / kOriBins);
}

std::optional<SiftDescriptor> compute_sift_descriptor(const ScaleSpace& ss, const KeypointRecord& kp) {
  double sigma = 0.0;
  const GrayImage& img = ss.gauss_for(kp, &sigma);
  const double scale = std::ldexp(1.0, kp.octave);
  const int cx = static_cast<int>(std::lround(kp.x / scale));
  const int cy = static_cast<int>(std::lround(kp.y / scale));
  const double hist_width = 3.0 * sigma;
  const int radius = static_cast<int>(std::lround(hist_width * std::numbers::sqrt2 * (kDescWidth + 1) * 0.5));
  if (cx - radius < 1 || cy - radius < 1 || cx + radius > img.width - 2 || cy + radius > img.height - 2) {
    return std::nullopt;
  }

  const double cos_t = std::cos(kp.orientation) / hist_width;
  const double sin_t = std::sin(kp.orientation) / hist_width;
  const double bins_per_rad = kDescBins / kTwoPi;
  const double exp_scale = -1.0 / (kDescWidth * kDescWidth * 0.5);
  constexpr int H = kDescWidth + 2;
  constexpr int O = kDescBins + 2;
  std::array<double, H * H * O> hist{};

  for (int i = -radius; i <= radius; ++i) {
    for (int j = -radius; j <= radius; ++j) {
      // Offset (j, i) expressed in the keypoint frame, in histogram-bin units.
      const double c_rot = j * cos_t + i * sin_t;
      const double r_rot = -j * sin_t + i * cos_t;
      const double rbin = r_rot + kDescWidth / 2.0 - 0.5;
      const double cbin = c_rot + kDescWidth / 2.0 - 0.5;
      if (!(rbin > -1.0 && rbin < kDescWidth && cbin > -1.0 && cbin < kDescWidth)) continue;
      const Gradient g = gradient_at(img, cx + j, cy + i);
      const double w = std::exp((c_rot * c_rot + r_rot * r_rot) * exp_scale);
      double obin = wrap_angle(g.angle - kp.orientation) * bins_per_rad;
      const double mag = g.magnitude * w;

      const int r0 = static_cast<int>(std::floor(rbin));
      const int c0 = static_cast<int>(std::floor(cbin));
      int o0 = static_cast<int>(std::floor(obin));
      const double dr = rbin - r0, dc = cbin - c0, dob = obin - o0;
      o0 %= kDescBins;
      for (int a = 0; a < 2; ++a) {
        const double wr = a ? dr : 1.0 - dr;
        for (int b = 0; b < 2; ++b) {
          const double wc = b ? dc : 1.0 - dc;
          for (int c = 0; c < 2; ++c) {
            const double wo = c ? dob : 1.0 - dob;
            hist[((r0 + 1 + a) * H + (c0 + 1 + b)) * O + (o0 + c)] += mag * wr * wc * wo;
          }
        }
      }
    }
  }

  SiftDescriptor desc{};
  for (int r = 0; r < kDescWidth; ++r) {
    for (int c = 0; c < kDescWidth; ++c) {
      const int base = ((r + 1) * H + (c + 1)) * O;
      for (int o = 0; o < kDescBins; ++o) {
        double v = hist[base + o];
        if (o == 0) v += hist[base + kDescBins];  // wrap-around bin
        desc[(r * kDescWidth + c) * kDescBins + o] = v;
      }
    }
  }

  auto l2 = [&] {
    double s = 0.0;
    for (double v : desc) s += v * v;
    return std::sqrt(s);
  };
  double norm = l2();
  if (!(norm > 1e-12)) return std::nullopt;
  for (double& v : desc) v = std::min(v / norm, 0.2);
  norm = l2();
  for (double& v : desc) v /= norm;
  return desc;
}

std::optional<Patch> extract_patch(const GrayImage& img, const KeypointRecord& kp) {
  const long cx = std::lround(kp.x);
  const long cy = std::lround(kp.y);
  const long x0 = cx - kPatchSide / 2;
  const long y0 = cy - kPatchSide / 2;
  if (x0 < 0 || y0 < 0 || x0 + kPatchSide > img.width || y0 + kPatchSide > img.height) return std::nullopt;
  Patch p;
  for (int r = 0; r < kPatchSide; ++r)
    for (int c = 0; c < kPatchSide; ++c)
      p.pixels[r * kPatchSide + c] = img.at(static_cast<int>(x0 + c), static_cast<int>(y0 + r));
  return p;
}

FeatureBundle extract_features(const GrayImage& img, const ExtractionParams& params, std::uint32_t image_index) {
  FeatureBundle out;
  const ScaleSpace ss = build_scale_space(img, params.detector);
  const auto kps = dedupe_keypoints(detect_keypoints(ss));
  out.detected = kps.size();
  std::vector<SiftDescriptor> descs;
  for (KeypointRecord kp : kps) {
    kp.orientation = compute_orientation(ss, kp);
    auto desc = compute_sift_descriptor(ss, kp);
    if (!desc) continue;
    auto patch = extract_patch(img, kp);
    if (!patch) continue;
    patch->image_index = image_index;
    patch->keypoint_index = static_cast<std::uint32_t>(out.keypoints.size());
    if (params.standardize_patches) {
      auto st = standardize_patch(*patch);
      if (st.constant) ++out.constant_patches;
      patch = st.patch;
    }
    out.keypoints.push_back(kp);
    out.patches.push_back(*patch);
    descs.push_back(*desc);
  }
  out.descriptors.resize(static_cast<Eigen::Index>(descs.size()), 128);
  for (std::size_t i = 0; i < descs.size(); ++i) {
    Vector v = Eigen::Map<const Vector>(descs[i].data(), 128);
    out.descriptors.row(static_cast<Eigen::Index>(i)) = hellinger_normalize(v, params.hellinger).transpose();
  }
  return out;
}

std::string format_keypoint_csv(std::span<const KeypointRecord> kps) {
  std::string out = "x,y,sigma,polarity,response,orientation\n";
  char buf[256];
  for (const auto& kp : kps) {
    std::snprintf(buf, sizeof buf, "%.6f,%.6f,%.6f,%s,%.9g,%.6f\n", kp.x, kp.y, kp.scale_sigma,
                  kp.polarity == Polarity::Min ? "min" : "max", kp.response, kp.orientation);
    out += buf;
  }
  return out;
}

}  // namespace scriptoria
