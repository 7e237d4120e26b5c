#include "toolgrasp/detect.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <numeric>
#include <sstream>

#include "toolgrasp/errors.hpp"
#include "toolgrasp/kvconfig.hpp"
#include "toolgrasp/synth.hpp"

namespace toolgrasp {

std::vector<Detection> parse_detections(const std::string& text) {
  std::vector<Detection> out;
  std::istringstream in(text);
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    const auto toks = split_ws(line);
    if (toks.empty()) continue;
    if (toks.size() != 6) {
      throw ParseError("expected 6 fields 'class cx cy w h conf', got " +
                           std::to_string(toks.size()),
                       line_no);
    }
    const long long cls = parse_int(toks[0], line_no);
    if (cls < 0 || cls > 1'000'000) throw ParseError("class id out of range", line_no);
    Detection d;
    d.bbox = {static_cast<int>(cls), parse_double(toks[1], line_no),
              parse_double(toks[2], line_no), parse_double(toks[3], line_no),
              parse_double(toks[4], line_no)};
    d.confidence = parse_double(toks[5], line_no);
    if (!(d.bbox.bw > 0.0) || !(d.bbox.bh > 0.0)) {
      throw ParseError("box width and height must be positive", line_no);
    }
    if (d.confidence < 0.0 || d.confidence > 1.0) {
      throw ParseError("confidence outside [0, 1]", line_no);
    }
    out.push_back(d);
  }
  return out;
}

std::string write_detections(const std::vector<Detection>& dets) {
  std::string out;
  char buf[160];
  for (const Detection& d : dets) {
    std::snprintf(buf, sizeof(buf), "%d %.6f %.6f %.6f %.6f %.6f\n", d.bbox.class_id,
                  d.bbox.cx, d.bbox.cy, d.bbox.bw, d.bbox.bh, d.confidence);
    out += buf;
  }
  return out;
}

namespace {

// Background regions inside the component's bounding box that do not touch
// its border, counting only regions of at least three pixels.
double count_holes(const std::vector<std::size_t>& pixels, std::size_t width,
                   long long r0, long long r1, long long c0, long long c1) {
  const long long bh = r1 - r0 + 3;
  const long long bw = c1 - c0 + 3;
  std::vector<char> fg(static_cast<std::size_t>(bh * bw), 0);
  for (std::size_t idx : pixels) {
    const auto r = static_cast<long long>(idx / width) - r0 + 1;
    const auto c = static_cast<long long>(idx % width) - c0 + 1;
    fg[static_cast<std::size_t>(r * bw + c)] = 1;
  }
  std::vector<char> seen(fg.size(), 0);
  double holes = 0.0;
  bool first = true;  // region containing (0,0) is the outside
  for (long long start = 0; start < bh * bw; ++start) {
    if (fg[static_cast<std::size_t>(start)] || seen[static_cast<std::size_t>(start)]) continue;
    std::deque<long long> queue{start};
    seen[static_cast<std::size_t>(start)] = 1;
    std::size_t size = 0;
    while (!queue.empty()) {
      const long long cur = queue.front();
      queue.pop_front();
      ++size;
      const long long r = cur / bw, c = cur % bw;
      const long long nb[4][2] = {{r - 1, c}, {r + 1, c}, {r, c - 1}, {r, c + 1}};
      for (const auto& n : nb) {
        if (n[0] < 0 || n[1] < 0 || n[0] >= bh || n[1] >= bw) continue;
        const auto ni = static_cast<std::size_t>(n[0] * bw + n[1]);
        if (fg[ni] || seen[ni]) continue;
        seen[ni] = 1;
        queue.push_back(n[0] * bw + n[1]);
      }
    }
    if (first) {
      first = false;
      continue;
    }
    if (size >= 3) holes += 1.0;
  }
  return holes;
}

Component describe(std::vector<std::size_t> pixels, const Plane& filtered,
                   double table) {
  Component comp;
  const std::size_t width = filtered.width;
  const double n = static_cast<double>(pixels.size());
  double mx = 0.0, my = 0.0, height_sum = 0.0;
  long long r0 = 1LL << 60, r1 = -1, c0 = 1LL << 60, c1 = -1;
  for (std::size_t idx : pixels) {
    const auto r = static_cast<long long>(idx / width);
    const auto c = static_cast<long long>(idx % width);
    mx += static_cast<double>(c);
    my += static_cast<double>(r);
    height_sum += table - filtered.values[idx];
    r0 = std::min(r0, r);
    r1 = std::max(r1, r);
    c0 = std::min(c0, c);
    c1 = std::max(c1, c);
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t idx : pixels) {
    const double dx = static_cast<double>(idx % width) - mx;
    const double dy = static_cast<double>(idx / width) - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  sxx /= n;
  syy /= n;
  sxy /= n;
  const double angle = 0.5 * std::atan2(2.0 * sxy, sxx - syy);
  const double tr = 0.5 * (sxx + syy);
  const double disc = std::sqrt(std::max(0.0, 0.25 * (sxx - syy) * (sxx - syy) + sxy * sxy));
  const double l1 = tr + disc;
  const double l2 = std::max(tr - disc, 1.0 / 12.0);

  const Vec2 axis{std::cos(angle), std::sin(angle)};
  const Vec2 normal{-axis.y, axis.x};
  double a_min = 1e300, a_max = -1e300, b_min = 1e300, b_max = -1e300;
  for (std::size_t idx : pixels) {
    const Vec2 d{static_cast<double>(idx % width) - mx,
                 static_cast<double>(idx / width) - my};
    const double a = dot(d, axis), b = dot(d, normal);
    a_min = std::min(a_min, a);
    a_max = std::max(a_max, a);
    b_min = std::min(b_min, b);
    b_max = std::max(b_max, b);
  }
  const double a_mid = 0.5 * (a_min + a_max);
  const double b_mid = 0.5 * (b_min + b_max);
  double head_mass = 0.0, tail_mass = 0.0;
  for (std::size_t idx : pixels) {
    const Vec2 d{static_cast<double>(idx % width) - mx,
                 static_cast<double>(idx / width) - my};
    const double h = table - filtered.values[idx];
    (dot(d, axis) > a_mid ? head_mass : tail_mass) += h;
  }
  comp.obox.center = Vec2{mx, my} + a_mid * axis + b_mid * normal;
  comp.obox.length = a_max - a_min + 1.0;
  comp.obox.breadth = b_max - b_min + 1.0;
  comp.obox.heading = wrap_full_angle(head_mass <= tail_mass ? angle : angle + kPi);

  comp.features.area = n;
  comp.features.elongation = std::sqrt(l1 / l2);
  comp.features.holes = count_holes(pixels, width, r0, r1, c0, c1);
  comp.features.mean_height = height_sum / n;
  comp.features.fill = n / (comp.obox.length * comp.obox.breadth);
  comp.features.length = comp.obox.length;
  comp.x0 = static_cast<double>(c0) - 0.5;
  comp.x1 = static_cast<double>(c1) + 0.5;
  comp.y0 = static_cast<double>(r0) - 0.5;
  comp.y1 = static_cast<double>(r1) + 0.5;
  comp.pixels = std::move(pixels);
  return comp;
}

}  // namespace

std::vector<Component> segment_components(const Plane& depth,
                                          const DetectorConfig& cfg) {
  std::vector<Component> out;
  if (depth.empty()) return out;
  const Plane filtered = median3(depth);
  const double table = median(filtered.values);
  const std::size_t h = depth.height, w = depth.width;
  std::vector<char> fg(h * w, 0);
  for (std::size_t i = 0; i < fg.size(); ++i) {
    fg[i] = table - filtered.values[i] >= cfg.min_height ? 1 : 0;
  }
  std::vector<char> seen(h * w, 0);
  for (std::size_t start = 0; start < h * w; ++start) {
    if (!fg[start] || seen[start]) continue;
    std::vector<std::size_t> pixels;
    std::deque<std::size_t> queue{start};
    seen[start] = 1;
    while (!queue.empty()) {
      const std::size_t cur = queue.front();
      queue.pop_front();
      pixels.push_back(cur);
      const auto r = static_cast<long long>(cur / w);
      const auto c = static_cast<long long>(cur % w);
      for (long long dr = -1; dr <= 1; ++dr) {
        for (long long dc = -1; dc <= 1; ++dc) {
          const long long rr = r + dr, cc = c + dc;
          if (rr < 0 || cc < 0 || rr >= static_cast<long long>(h) ||
              cc >= static_cast<long long>(w)) {
            continue;
          }
          const auto ni = static_cast<std::size_t>(rr) * w + static_cast<std::size_t>(cc);
          if (!fg[ni] || seen[ni]) continue;
          seen[ni] = 1;
          queue.push_back(ni);
        }
      }
    }
    if (pixels.size() < cfg.min_area) continue;
    std::sort(pixels.begin(), pixels.end());
    out.push_back(describe(std::move(pixels), filtered, table));
  }
  return out;
}

const Prototypes& default_prototypes() {
  static const Prototypes protos = [] {
    Prototypes p;
    constexpr int kAngles = 6;
    SynthOptions clean;
    clean.noise_sigma = 0.0;
    clean.dropout = 0.0;
    for (std::size_t cls = 0; cls < kNumClasses; ++cls) {
      std::array<double, 6> acc{};
      for (int k = 0; k < kAngles; ++k) {
        Placement pl{tool_shape(static_cast<int>(cls)),
                     {80.0, 80.0, kPi * k / kAngles, 1.0}};
        const SceneRecord scene = synth_scene({pl}, 160, 160, 0, clean);
        const auto comps = segment_components(scene.depth);
        const auto largest = std::max_element(
            comps.begin(), comps.end(), [](const Component& a, const Component& b) {
              return a.pixels.size() < b.pixels.size();
            });
        const auto f = largest->features.as_array();
        for (std::size_t j = 0; j < 6; ++j) acc[j] += f[j] / kAngles;
      }
      p.mean[cls] = acc;
    }
    for (std::size_t j = 0; j < 6; ++j) {
      double m = 0.0;
      for (const auto& row : p.mean) m += row[j] / kNumClasses;
      double v = 0.0;
      for (const auto& row : p.mean) v += (row[j] - m) * (row[j] - m) / kNumClasses;
      p.spread[j] = std::max(std::sqrt(v), 1e-9);
    }
    return p;
  }();
  return protos;
}

std::pair<int, double> classify(const ShapeFeatures& f, const Prototypes& protos) {
  const auto x = f.as_array();
  std::array<double, kNumClasses> dist{};
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    double acc = 0.0;
    for (std::size_t j = 0; j < 6; ++j) {
      const double d = (x[j] - protos.mean[c][j]) / protos.spread[j];
      acc += d * d;
    }
    dist[c] = std::sqrt(acc);
  }
  std::array<std::size_t, kNumClasses> order{};
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dist[a] < dist[b]; });
  const double d1 = dist[order[0]];
  const double d2 = dist[order[1]];
  const double conf = d1 + d2 > 0.0 ? d2 / (d1 + d2) : 0.5;
  return {static_cast<int>(order[0]), conf};
}

std::vector<Detection> baseline_detect(const Plane& depth, const DetectorConfig& cfg) {
  std::vector<Detection> out;
  if (depth.empty()) return out;
  const Prototypes& protos = default_prototypes();
  for (const Component& comp : segment_components(depth, cfg)) {
    const auto [cls, conf] = classify(comp.features, protos);
    Detection d;
    d.bbox = bbox_from_pixels(cls, comp.x0, comp.y0, comp.x1, comp.y1,
                              static_cast<int>(depth.width),
                              static_cast<int>(depth.height));
    d.bbox = clamp_to_unit(d.bbox);
    d.confidence = conf;
    d.obox = comp.obox;
    out.push_back(d);
  }
  if (cfg.nms) {
    std::vector<std::size_t> order(out.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return out[a].confidence > out[b].confidence;
    });
    std::vector<char> keep(out.size(), 1);
    for (std::size_t i = 0; i < order.size(); ++i) {
      if (!keep[order[i]]) continue;
      for (std::size_t j = i + 1; j < order.size(); ++j) {
        if (bbox_iou(out[order[i]].bbox, out[order[j]].bbox) > cfg.nms_iou) {
          keep[order[j]] = 0;
        }
      }
    }
    std::vector<Detection> kept;
    for (std::size_t i = 0; i < out.size(); ++i) {
      if (keep[i]) kept.push_back(out[i]);
    }
    out = std::move(kept);
  }
  return out;
}

std::vector<double> coco_thresholds() {
  std::vector<double> t;
  for (int i = 0; i < 10; ++i) t.push_back((50.0 + 5.0 * i) / 100.0);
  return t;
}

double average_precision(const std::vector<std::vector<Detection>>& dets,
                         const std::vector<std::vector<BBox>>& gts, int class_id,
                         double iou_threshold) {
  if (dets.size() != gts.size()) {
    throw DomainError("average_precision: detection and ground-truth image counts differ");
  }
  struct Ref {
    double conf;
    std::size_t image;
    std::size_t index;
  };
  std::vector<Ref> refs;
  std::size_t npos = 0;
  std::vector<std::vector<char>> used(gts.size());
  for (std::size_t i = 0; i < gts.size(); ++i) {
    used[i].assign(gts[i].size(), 0);
    for (const BBox& g : gts[i]) npos += g.class_id == class_id ? 1 : 0;
    for (std::size_t j = 0; j < dets[i].size(); ++j) {
      if (dets[i][j].bbox.class_id == class_id) refs.push_back({dets[i][j].confidence, i, j});
    }
  }
  if (npos == 0) return 0.0;
  std::stable_sort(refs.begin(), refs.end(),
                   [](const Ref& a, const Ref& b) { return a.conf > b.conf; });

  std::vector<double> precision, recall;
  std::size_t tp = 0, fp = 0;
  for (const Ref& r : refs) {
    const BBox& box = dets[r.image][r.index].bbox;
    double best = -1.0;
    std::size_t best_j = 0;
    for (std::size_t j = 0; j < gts[r.image].size(); ++j) {
      const BBox& g = gts[r.image][j];
      if (g.class_id != class_id || used[r.image][j]) continue;
      const double iou = bbox_iou(box, g);
      if (iou > best) {
        best = iou;
        best_j = j;
      }
    }
    if (best >= iou_threshold) {
      used[r.image][best_j] = 1;
      ++tp;
    } else {
      ++fp;
    }
    precision.push_back(static_cast<double>(tp) / static_cast<double>(tp + fp));
    recall.push_back(static_cast<double>(tp) / static_cast<double>(npos));
  }
  for (std::size_t i = precision.size(); i-- > 1;) {
    precision[i - 1] = std::max(precision[i - 1], precision[i]);
  }
  double total = 0.0;
  std::size_t k = 0;
  for (int i = 0; i <= 100; ++i) {
    const double level = i / 100.0;
    while (k < recall.size() && recall[k] < level) ++k;
    if (k < recall.size()) total += precision[k];
  }
  return total / 101.0;
}

EvalReport compute_map(const std::vector<std::vector<Detection>>& dets,
                       const std::vector<std::vector<BBox>>& gts,
                       const std::vector<double>& iou_thresholds,
                       std::size_t num_classes) {
  if (dets.size() != gts.size()) {
    throw DomainError("compute_map: detection and ground-truth image counts differ");
  }
  if (iou_thresholds.empty()) throw DomainError("compute_map: no IoU thresholds");
  if (!std::is_sorted(iou_thresholds.begin(), iou_thresholds.end())) {
    throw DomainError("compute_map: IoU thresholds must be sorted");
  }
  for (const auto& image : dets) {
    for (const Detection& d : image) {
      if (!(d.confidence >= 0.0 && d.confidence <= 1.0)) {
        throw DomainError("compute_map: confidence outside [0, 1]");
      }
    }
  }
  EvalReport rep;
  rep.iou_thresholds = iou_thresholds;
  std::vector<std::size_t> gt_count(num_classes, 0), det_count(num_classes, 0);
  for (std::size_t i = 0; i < gts.size(); ++i) {
    for (const BBox& g : gts[i]) {
      if (g.class_id >= 0 && static_cast<std::size_t>(g.class_id) < num_classes) {
        ++gt_count[static_cast<std::size_t>(g.class_id)];
      }
    }
    for (const Detection& d : dets[i]) {
      if (d.bbox.class_id >= 0 && static_cast<std::size_t>(d.bbox.class_id) < num_classes) {
        ++det_count[static_cast<std::size_t>(d.bbox.class_id)];
      }
    }
  }
  std::size_t at50 = 0;
  for (std::size_t t = 0; t < iou_thresholds.size(); ++t) {
    if (std::abs(iou_thresholds[t] - 0.5) < 1e-12) at50 = t;
  }
  double sum50 = 0.0, sum_all = 0.0;
  for (std::size_t c = 0; c < num_classes; ++c) {
    if (gt_count[c] == 0 && det_count[c] == 0) continue;
    ClassAp ca;
    ca.class_id = static_cast<int>(c);
    ca.gt_count = gt_count[c];
    ca.det_count = det_count[c];
    if (gt_count[c] == 0) {
      rep.warnings.push_back("class " + std::to_string(c) +
                             " has detections but no ground truth; AP set to 0");
    }
    double mean = 0.0;
    for (double t : iou_thresholds) {
      const double ap = average_precision(dets, gts, ca.class_id, t);
      ca.ap.push_back(ap);
      mean += ap;
    }
    sum50 += ca.ap[at50];
    sum_all += mean / static_cast<double>(iou_thresholds.size());
    rep.per_class.push_back(std::move(ca));
  }
  if (!rep.per_class.empty()) {
    rep.map50 = sum50 / static_cast<double>(rep.per_class.size());
    rep.map50_95 = sum_all / static_cast<double>(rep.per_class.size());
  }
  rep.confusion = confusion_matrix(dets, gts, 0.5, num_classes);
  return rep;
}

std::vector<std::vector<double>> confusion_matrix(
    const std::vector<std::vector<Detection>>& dets,
    const std::vector<std::vector<BBox>>& gts, double iou_min,
    std::size_t num_classes) {
  if (dets.size() != gts.size()) {
    throw DomainError("confusion_matrix: detection and ground-truth image counts differ");
  }
  std::vector<std::vector<double>> m(num_classes, std::vector<double>(num_classes + 1, 0.0));
  auto valid = [&](int c) { return c >= 0 && static_cast<std::size_t>(c) < num_classes; };
  for (std::size_t i = 0; i < gts.size(); ++i) {
    struct Pair {
      double iou;
      std::size_t g, d;
    };
    std::vector<Pair> pairs;
    for (std::size_t g = 0; g < gts[i].size(); ++g) {
      for (std::size_t d = 0; d < dets[i].size(); ++d) {
        const double iou = bbox_iou(gts[i][g], dets[i][d].bbox);
        if (iou >= iou_min) pairs.push_back({iou, g, d});
      }
    }
    std::stable_sort(pairs.begin(), pairs.end(),
                     [](const Pair& a, const Pair& b) { return a.iou > b.iou; });
    std::vector<char> g_used(gts[i].size(), 0), d_used(dets[i].size(), 0);
    for (const Pair& p : pairs) {
      if (g_used[p.g] || d_used[p.d]) continue;
      const int gc = gts[i][p.g].class_id;
      const int dc = dets[i][p.d].bbox.class_id;
      if (!valid(gc) || !valid(dc)) continue;
      g_used[p.g] = d_used[p.d] = 1;
      m[static_cast<std::size_t>(gc)][static_cast<std::size_t>(dc)] += 1.0;
    }
    for (std::size_t g = 0; g < gts[i].size(); ++g) {
      const int gc = gts[i][g].class_id;
      if (!g_used[g] && valid(gc)) m[static_cast<std::size_t>(gc)][num_classes] += 1.0;
    }
  }
  return m;
}

std::vector<std::vector<double>> normalize_columns(
    const std::vector<std::vector<double>>& m) {
  auto out = m;
  if (m.empty()) return out;
  for (std::size_t c = 0; c < m.front().size(); ++c) {
    double total = 0.0;
    for (const auto& row : m) total += row[c];
    if (total > 0.0) {
      for (auto& row : out) row[c] /= total;
    }
  }
  return out;
}

nlohmann::ordered_json EvalReport::to_json() const {
  nlohmann::ordered_json j;
  j["iou_thresholds"] = iou_thresholds;
  j["map50"] = map50;
  j["map50_95"] = map50_95;
  auto classes = nlohmann::ordered_json::array();
  for (const ClassAp& c : per_class) {
    nlohmann::ordered_json e;
    e["class_id"] = c.class_id;
    e["name"] = static_cast<std::size_t>(c.class_id) < kNumClasses
                    ? std::string(kClassNames[static_cast<std::size_t>(c.class_id)])
                    : "class" + std::to_string(c.class_id);
    e["gt"] = c.gt_count;
    e["detections"] = c.det_count;
    e["ap"] = c.ap;
    classes.push_back(e);
  }
  j["per_class"] = classes;
  j["confusion"]["counts"] = confusion;
  j["confusion"]["column_normalized"] = normalize_columns(confusion);
  j["warnings"] = warnings;
  return j;
}

}  // namespace toolgrasp
