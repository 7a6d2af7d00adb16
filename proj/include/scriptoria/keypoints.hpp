#pragma once

#include "scriptoria/core.hpp"
#include "scriptoria/dataset.hpp"
#include "scriptoria/normalize.hpp"

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace scriptoria {

/// Restricted mode keeps only scale-space minima, i.e. dark-on-bright blobs.
enum class DetectorMode { Full, Restricted };

/// Sign convention: the difference-of-Gaussian layer is L(sigma_i) - L(sigma_{i+1}),
/// so a dark blob on a bright background produces a negative response (a minimum).
enum class Polarity { Min, Max };

struct DetectorParams {
  int octaves = 0;  // 0: keep halving while the shorter side is >= 16
  int scales_per_octave = 3;
  double base_sigma = 1.6;
  double input_sigma = 0.5;  // blur assumed present in the input image
  double contrast_threshold = 0.03;
  double edge_ratio = 10.0;
  int border = 5;  // pixels excluded at each octave's border
  DetectorMode mode = DetectorMode::Restricted;

  void validate() const;
};

struct KeypointRecord {
  double x = 0.0;  // original-image pixels
  double y = 0.0;
  int octave = 0;
  double layer = 1.0;  // fractional scale index within the octave
  double scale_sigma = 0.0;
  Polarity polarity = Polarity::Min;
  double response = 0.0;  // interpolated DoG value at the extremum
  double orientation = 0.0;
};

struct Octave {
  int width = 0;
  int height = 0;
  std::vector<GrayImage> gauss;  // scales_per_octave + 3 images
  std::vector<GrayImage> dog;    // scales_per_octave + 2 images
};

struct ScaleSpace {
  DetectorParams params;
  int width = 0;
  int height = 0;
  std::vector<Octave> octaves;

  /// Gaussian image and octave-relative sigma used for gradient sampling.
  const GrayImage& gauss_for(const KeypointRecord& kp, double* octave_sigma) const;
};

ScaleSpace build_scale_space(const GrayImage& img, const DetectorParams& params);

std::vector<KeypointRecord> detect_keypoints(const ScaleSpace& ss);
std::vector<KeypointRecord> detect_keypoints(const GrayImage& img, const DetectorParams& params);

/// One survivor per rounded (x, y): the largest |response|; order otherwise kept.
std::vector<KeypointRecord> dedupe_keypoints(std::span<const KeypointRecord> kps);

/// Dominant peak of a 36-bin gradient orientation histogram, in [0, 2pi).
double compute_orientation(const ScaleSpace& ss, const KeypointRecord& kp);

using SiftDescriptor = std::array<double, 128>;

/// 4x4 spatial x 8 orientation bins, clipped at 0.2 and renormalized.
/// nullopt when the support window leaves the image or the gradients vanish.
std::optional<SiftDescriptor> compute_sift_descriptor(const ScaleSpace& ss, const KeypointRecord& kp);

/// Axis-aligned 32x32 window, columns cx-16 .. cx+15 around the rounded position.
std::optional<Patch> extract_patch(const GrayImage& img, const KeypointRecord& kp);

struct ExtractionParams {
  DetectorParams detector;
  HellingerOrder hellinger = HellingerOrder::Paper;
  bool standardize_patches = false;
};

/// Keypoints, Hellinger-normalized SIFT descriptors and patches of one image.
/// Row i of `descriptors`, `patches[i]` and `keypoints[i]` describe the same point.
struct FeatureBundle {
  std::vector<KeypointRecord> keypoints;
  Matrix descriptors;  // n x 128
  std::vector<Patch> patches;
  std::size_t detected = 0;      // after dedupe, before skips
  std::size_t constant_patches = 0;
};

FeatureBundle extract_features(const GrayImage& img, const ExtractionParams& params, std::uint32_t image_index = 0);

/// `.kp.csv` sidecar: x,y,sigma,polarity,response,orientation
std::string format_keypoint_csv(std::span<const KeypointRecord> kps);

}  // namespace scriptoria
