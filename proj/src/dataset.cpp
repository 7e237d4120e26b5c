#include "toolgrasp/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "toolgrasp/errors.hpp"
#include "toolgrasp/kvconfig.hpp"

namespace toolgrasp {

std::vector<BBox> parse_yolo(const std::string& text,
                             std::vector<std::string>* warnings) {
  std::vector<BBox> out;
  std::istringstream in(text);
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    const auto toks = split_ws(line);
    if (toks.empty()) continue;
    if (toks.size() != 5) {
      throw ParseError("expected 5 fields 'class cx cy w h', got " +
                           std::to_string(toks.size()),
                       line_no);
    }
    const long long cls = parse_int(toks[0], line_no);
    if (cls < 0 || cls > 1'000'000) {
      throw ParseError("class id out of range: " + toks[0], line_no);
    }
    BBox b{static_cast<int>(cls), parse_double(toks[1], line_no),
           parse_double(toks[2], line_no), parse_double(toks[3], line_no),
           parse_double(toks[4], line_no)};
    if (!(b.bw > 0.0) || !(b.bh > 0.0)) {
      throw ParseError("box width and height must be positive", line_no);
    }
    bool clamped = false;
    try {
      b = clamp_to_unit(b, &clamped);
    } catch (const DomainError&) {
      throw ParseError("box lies outside the image", line_no);
    }
    if (clamped && warnings) {
      warnings->push_back("line " + std::to_string(line_no) +
                          ": box clamped to the image");
    }
    out.push_back(b);
  }
  return out;
}

std::string write_yolo(const std::vector<BBox>& boxes) {
  std::string out;
  char buf[128];
  for (const BBox& b : boxes) {
    std::snprintf(buf, sizeof(buf), "%d %.6f %.6f %.6f %.6f\n", b.class_id, b.cx,
                  b.cy, b.bw, b.bh);
    out += buf;
  }
  return out;
}

std::vector<std::vector<GraspRect>> parse_grasp_groups(const std::string& text) {
  std::vector<std::vector<GraspRect>> groups;
  std::size_t current = 0;
  std::istringstream in(text);
  std::size_t line_no = 0;
  for (std::string raw; std::getline(in, raw);) {
    ++line_no;
    const std::string line = trim(raw);
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto toks = split_ws(line.substr(1));
      if (toks.size() == 2 && toks[0] == "object") {
        const long long n = parse_int(toks[1], line_no);
        if (n < 0 || n > 1'000'000) throw ParseError("bad object index", line_no);
        current = static_cast<std::size_t>(n);
        if (groups.size() <= current) groups.resize(current + 1);
      }
      continue;
    }
    const auto f = split(line, ';');
    if (f.size() != 5) {
      throw ParseError("expected 5 fields 'x;y;theta_deg;w;h', got " +
                           std::to_string(f.size()),
                       line_no);
    }
    const double x = parse_double(f[0], line_no);
    const double y = parse_double(f[1], line_no);
    const double theta = parse_double(f[2], line_no);
    const double w = parse_double(f[3], line_no);
    const double h = parse_double(f[4], line_no);
    if (!(w > 0.0) || !(h > 0.0)) {
      throw ParseError("grasp width and height must be positive", line_no);
    }
    if (groups.size() <= current) groups.resize(current + 1);
    groups[current].emplace_back(x, y, w, h, deg_to_rad(theta));
  }
  return groups;
}

std::vector<GraspRect> parse_grasps(const std::string& text) {
  std::vector<GraspRect> out;
  for (const auto& g : parse_grasp_groups(text)) out.insert(out.end(), g.begin(), g.end());
  return out;
}

std::string write_grasps(const std::vector<GraspRect>& grasps) {
  std::string out;
  for (const GraspRect& g : grasps) {
    out += format_double(g.x()) + ";" + format_double(g.y()) + ";" +
           format_double(rad_to_deg(g.theta())) + ";" + format_double(g.w()) +
           ";" + format_double(g.h()) + "\n";
  }
  return out;
}

std::string write_grasp_groups(const std::vector<std::vector<GraspRect>>& groups) {
  std::string out;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    out += "# object " + std::to_string(i) + "\n";
    out += write_grasps(groups[i]);
  }
  return out;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

namespace {

std::filesystem::path meta_path(const std::filesystem::path& path) {
  auto p = path;
  p += ".meta";
  return p;
}

}  // namespace

void write_depth(const std::filesystem::path& path, const Plane& depth) {
  if (depth.empty()) throw DomainError("write_depth: empty plane");
  double lo = depth.values.front();
  double hi = lo;
  for (double v : depth.values) {
    if (!std::isfinite(v)) throw DomainError("write_depth: non-finite depth");
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const double scale = hi > lo ? (hi - lo) / 65535.0 : 0.0;

  std::string bytes = "P5\n" + std::to_string(depth.width) + " " +
                      std::to_string(depth.height) + "\n65535\n";
  bytes.reserve(bytes.size() + 2 * depth.values.size());
  for (double v : depth.values) {
    const long q = scale > 0.0 ? std::lround((v - lo) / scale) : 0L;
    const auto s = static_cast<std::uint16_t>(std::clamp(q, 0L, 65535L));
    bytes.push_back(static_cast<char>(s >> 8));
    bytes.push_back(static_cast<char>(s & 0xff));
  }
  write_text_file(path, bytes);

  KeyValueConfig meta;
  meta.set("offset", lo);
  meta.set("scale", scale);
  meta.save(meta_path(path));
}

Plane read_depth(const std::filesystem::path& path) {
  const std::string bytes = read_text_file(path);
  std::size_t pos = 0;
  auto token = [&]() {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
    const std::size_t start = pos;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
      ++pos;
    }
    return bytes.substr(start, pos - start);
  };
  if (token() != "P5") throw ParseError("depth map: expected P5 magic at byte 0");
  long long w = 0, h = 0, maxval = 0;
  try {
    w = parse_int(token());
    h = parse_int(token());
    maxval = parse_int(token());
  } catch (const ParseError&) {
    throw ParseError("depth map: malformed header near byte " + std::to_string(pos));
  }
  if (w <= 0 || h <= 0 || maxval != 65535) {
    throw ParseError("depth map: need positive size and maxval 65535");
  }
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
    throw ParseError("depth map: header not terminated at byte " + std::to_string(pos));
  }
  ++pos;
  const auto n = static_cast<std::size_t>(w * h);
  if (bytes.size() - pos != 2 * n) {
    throw ParseError("depth map: expected " + std::to_string(2 * n) +
                     " payload bytes after byte " + std::to_string(pos) + ", got " +
                     std::to_string(bytes.size() - pos));
  }
  const KeyValueConfig meta = KeyValueConfig::load(meta_path(path));
  const double offset = meta.get_double("offset");
  const double scale = meta.get_double("scale");
  if (scale < 0.0) throw ConfigError("depth map: negative scale");
  Plane out(static_cast<std::size_t>(h), static_cast<std::size_t>(w));
  for (std::size_t i = 0; i < n; ++i) {
    const auto hi = static_cast<unsigned char>(bytes[pos + 2 * i]);
    const auto lo = static_cast<unsigned char>(bytes[pos + 2 * i + 1]);
    out.values[i] = offset + scale * static_cast<double>((hi << 8) | lo);
  }
  return out;
}

}  // namespace toolgrasp
