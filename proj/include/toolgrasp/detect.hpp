#pragma once

#include <array>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "toolgrasp/classes.hpp"
#include "toolgrasp/geometry.hpp"
#include "toolgrasp/image.hpp"

namespace toolgrasp {

struct Detection {
  BBox bbox;                // normalized, class in bbox.class_id
  double confidence = 0.0;  // [0, 1]
  OrientedBox obox;         // pixel frame; heading towards the lighter end
};

// Detections file: `class cx cy w h conf` per line.
std::vector<Detection> parse_detections(const std::string& text);
std::string write_detections(const std::vector<Detection>& dets);

// Shape descriptors of one connected component.
struct ShapeFeatures {
  double area = 0.0;         // pixels
  double elongation = 0.0;   // sqrt of the principal-moment ratio
  double holes = 0.0;        // enclosed background regions
  double mean_height = 0.0;  // above the table, scene units
  double fill = 0.0;         // area / (length * breadth)
  double length = 0.0;       // extent along the major axis, pixels

  std::array<double, 6> as_array() const {
    return {area, elongation, holes, mean_height, fill, length};
  }
};

struct Component {
  std::vector<std::size_t> pixels;  // row-major indices
  ShapeFeatures features;
  OrientedBox obox;
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // pixel bounds (edges)
};

struct DetectorConfig {
  double min_height = 0.008;  // above the estimated table level
  std::size_t min_area = 30;
  bool nms = false;
  double nms_iou = 0.5;
};

// Foreground of a 3x3-median-filtered depth image: pixels at least
// min_height above the table level (median depth), grouped into
// 8-connected components of at least min_area pixels.
std::vector<Component> segment_components(const Plane& depth,
                                          const DetectorConfig& cfg = {});

// Per-class mean features of the catalogue tools rendered noise-free at a
// few orientations, plus a per-feature spread used to normalize distances.
struct Prototypes {
  std::array<std::array<double, 6>, kNumClasses> mean{};
  std::array<double, 6> spread{};
};
const Prototypes& default_prototypes();

// Nearest prototype in normalized feature space; confidence = d2 / (d1 + d2)
// for the nearest (d1) and runner-up (d2) distances.
std::pair<int, double> classify(const ShapeFeatures& f, const Prototypes& protos);

// Baseline detector: segmentation, shape features, nearest prototype,
// optional IoU suppression. Empty image -> no detections.
std::vector<Detection> baseline_detect(const Plane& depth,
                                       const DetectorConfig& cfg = {});

struct ClassAp {
  int class_id = 0;
  std::vector<double> ap;  // per IoU threshold
  std::size_t gt_count = 0;
  std::size_t det_count = 0;
};

struct EvalReport {
  std::vector<double> iou_thresholds;
  std::vector<ClassAp> per_class;  // classes with GT or detections, by id
  double map50 = 0.0;
  double map50_95 = 0.0;
  std::vector<std::vector<double>> confusion;  // C x (C+1), counts
  std::vector<std::string> warnings;

  nlohmann::ordered_json to_json() const;
};

// {0.50, 0.55, ..., 0.95}
std::vector<double> coco_thresholds();

// 101-point interpolated AP for one class at one threshold.
double average_precision(const std::vector<std::vector<Detection>>& dets,
                         const std::vector<std::vector<BBox>>& gts, int class_id,
                         double iou_threshold);

// Per-class AP at every threshold (sorted ascending). mAP50 is the mean AP at
// 0.5 (or the first threshold when 0.5 is absent), mAP50-95 the mean over all
// thresholds. A class with detections but no ground truth scores 0 and adds a
// warning.
EvalReport compute_map(const std::vector<std::vector<Detection>>& dets,
                       const std::vector<std::vector<BBox>>& gts,
                       const std::vector<double>& iou_thresholds,
                       std::size_t num_classes = kNumClasses);

// Rows: ground-truth class; columns: detected class plus a final background
// column for unmatched ground truth. Matching is per image, class-agnostic,
// greedy by descending IoU (>= iou_min), each box used at most once.
std::vector<std::vector<double>> confusion_matrix(
    const std::vector<std::vector<Detection>>& dets,
    const std::vector<std::vector<BBox>>& gts, double iou_min = 0.5,
    std::size_t num_classes = kNumClasses);

// Each column divided by its sum (zero columns stay zero).
std::vector<std::vector<double>> normalize_columns(
    const std::vector<std::vector<double>>& m);

}  // namespace toolgrasp
