#pragma once

// File formats: point-cloud CSV, the binary embedding file, PGM and IDX
// images, image thresholding, and atomic CSV + JSON record output.

#include <unistd.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "monge/embedding.hpp"
#include "monge/error.hpp"
#include "monge/experiments.hpp"
#include "monge/solver.hpp"

namespace monge {

namespace fs = std::filesystem;

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::ParseError, "cli_io", "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Writes to a temporary sibling and renames it over `path`.
inline void write_file_atomic(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::InvalidArgument, "cli_io", "cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw Error(ErrorCode::InvalidArgument, "cli_io", "write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

/// Shortest text that round-trips the double.
inline std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

// ---------------------------------------------------------------------------
// Point clouds

namespace detail {

inline std::string trim(std::string_view s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return std::string(s.substr(a, b - a));
}

inline std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

inline std::optional<double> parse_number(const std::string& s) {
  if (s.empty()) return std::nullopt;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size()) return std::nullopt;
  return v;
}

}  // namespace detail

struct PointCloudOptions {
  BoundingBox domain{{0.0, 0.0}, {1.0, 1.0}};  ///< declared Y
  bool merge_coincident = true;
};

/// Rows of "x,y" or "x,y,weight"; an optional non-numeric header line; blank
/// lines and lines starting with '#' are ignored.
inline DiscreteMeasure parse_point_cloud(const std::string& text, const PointCloudOptions& opt = {},
                                         const std::string& source = "<input>") {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0, columns = 0;
  bool seen_data = false, seen_header = false;
  std::vector<Point2> pts;
  std::vector<double> w;
  auto fail = [&](const std::string& msg) {
    throw Error(ErrorCode::ParseError, "cli_io", source + ":" + std::to_string(lineno) + ": " + msg);
  };
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto fields = detail::split_fields(t);
    std::vector<double> vals;
    bool numeric = true;
    for (const auto& f : fields) {
      auto v = detail::parse_number(f);
      if (!v) {
        numeric = false;
        break;
      }
      vals.push_back(*v);
    }
    if (!numeric) {
      const bool looks_like_header = std::any_of(t.begin(), t.end(), [](char c) { return std::isalpha(static_cast<unsigned char>(c)); });
      if (!seen_data && !seen_header && looks_like_header && (fields.size() == 2 || fields.size() == 3)) {
        seen_header = true;
        continue;
      }
      fail("expected 2 or 3 numeric columns");
    }
    if (vals.size() != 2 && vals.size() != 3) fail("expected 2 or 3 columns, found " + std::to_string(vals.size()));
    if (columns == 0) columns = vals.size();
    if (vals.size() != columns) fail("inconsistent column count");
    for (double v : vals)
      if (!std::isfinite(v)) fail("non-finite value");
    const Point2 p{vals[0], vals[1]};
    if (p.x < opt.domain.lo.x || p.x > opt.domain.hi.x || p.y < opt.domain.lo.y || p.y > opt.domain.hi.y)
      throw Error(ErrorCode::OutOfDomain, "cli_io",
                  source + ":" + std::to_string(lineno) + ": point (" + format_double(p.x) + ", " +
                      format_double(p.y) + ") outside the declared domain");
    if (columns == 3 && !(vals[2] > 0.0)) fail("weights must be positive");
    pts.push_back(p);
    w.push_back(columns == 3 ? vals[2] : 1.0);
    seen_data = true;
  }
  if (pts.empty()) throw Error(ErrorCode::EmptyFile, "cli_io", source + ": no data rows");
  auto m = make_measure(std::move(pts), w);
  return opt.merge_coincident ? merge_coincident(m) : m;
}

inline DiscreteMeasure load_point_cloud(const fs::path& path, const PointCloudOptions& opt = {}) {
  return parse_point_cloud(read_file(path), opt, path.string());
}

inline std::string format_point_cloud(const DiscreteMeasure& m) {
  std::string s = "x,y,weight\n";
  for (std::size_t i = 0; i < m.size(); ++i)
    s += format_double(m.points[i].x) + "," + format_double(m.points[i].y) + "," +
         format_double(m.weights[static_cast<Eigen::Index>(i)]) + "\n";
  return s;
}

inline void save_point_cloud(const fs::path& path, const DiscreteMeasure& m) {
  write_file_atomic(path, format_point_cloud(m));
}

// ---------------------------------------------------------------------------
// Embedding file: "MEMB", u32 version, u32 m, u32 d, then m*m*d little-endian
// float64 values laid out [s][t][component].

inline constexpr std::array<char, 4> kEmbeddingMagic{'M', 'E', 'M', 'B'};
inline constexpr std::uint32_t kEmbeddingVersion = 1;

namespace detail {

inline void put_u32le(std::string& out, std::uint32_t v) {
  for (int k = 0; k < 4; ++k) out.push_back(static_cast<char>((v >> (8 * k)) & 0xff));
}
inline void put_f64le(std::string& out, double x) {
  const auto v = std::bit_cast<std::uint64_t>(x);
  for (int k = 0; k < 8; ++k) out.push_back(static_cast<char>((v >> (8 * k)) & 0xff));
}
inline std::uint32_t get_u32le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
         static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}
inline double get_f64le(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int k = 7; k >= 0; --k) v = (v << 8) | p[k];
  return std::bit_cast<double>(v);
}
inline std::uint32_t get_u32be(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) << 24 | static_cast<std::uint32_t>(p[1]) << 16 |
         static_cast<std::uint32_t>(p[2]) << 8 | static_cast<std::uint32_t>(p[3]);
}

}  // namespace detail

inline std::string encode_embedding(const VectorizedEmbedding& v) {
  if (v.m < 1 || v.values.size() != static_cast<std::size_t>(v.m) * v.m)
    throw Error(ErrorCode::InvalidArgument, "cli_io", "malformed embedding");
  std::string out(kEmbeddingMagic.begin(), kEmbeddingMagic.end());
  detail::put_u32le(out, kEmbeddingVersion);
  detail::put_u32le(out, static_cast<std::uint32_t>(v.m));
  detail::put_u32le(out, 2);
  for (const auto& p : v.values) {
    detail::put_f64le(out, p.x);
    detail::put_f64le(out, p.y);
  }
  return out;
}

inline bool has_embedding_magic(const std::string& bytes) {
  return bytes.size() >= 4 && std::equal(kEmbeddingMagic.begin(), kEmbeddingMagic.end(), bytes.begin());
}

inline VectorizedEmbedding decode_embedding(const std::string& bytes) {
  if (bytes.size() < 4 || !has_embedding_magic(bytes))
    throw Error(ErrorCode::BadMagic, "cli_io", "not an embedding file (magic MEMB expected)");
  if (bytes.size() < 16) throw Error(ErrorCode::Truncated, "cli_io", "embedding header truncated");
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const auto version = detail::get_u32le(p + 4), m = detail::get_u32le(p + 8), d = detail::get_u32le(p + 12);
  if (version != kEmbeddingVersion)
    throw Error(ErrorCode::ParseError, "cli_io", "unsupported embedding version " + std::to_string(version));
  if (d != 2) throw Error(ErrorCode::ParseError, "cli_io", "embedding dimension must be 2");
  if (m == 0 || m > 65535) throw Error(ErrorCode::ParseError, "cli_io", "bad embedding resolution");
  const std::size_t payload = 8ull * m * m * d;
  if (bytes.size() < 16 + payload) throw Error(ErrorCode::Truncated, "cli_io", "embedding payload truncated");
  if (bytes.size() > 16 + payload) throw Error(ErrorCode::ParseError, "cli_io", "trailing bytes after payload");
  VectorizedEmbedding v{static_cast<int>(m), std::vector<Point2>(static_cast<std::size_t>(m) * m)};
  for (std::size_t k = 0; k < v.values.size(); ++k)
    v.values[k] = {detail::get_f64le(p + 16 + 16 * k), detail::get_f64le(p + 24 + 16 * k)};
  return v;
}

inline void save_embedding(const fs::path& path, const VectorizedEmbedding& v) {
  write_file_atomic(path, encode_embedding(v));
}

inline VectorizedEmbedding load_embedding(const fs::path& path) { return decode_embedding(read_file(path)); }

// ---------------------------------------------------------------------------
// Grayscale images

struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint16_t> pixels;  ///< row-major, row 0 at the top

  std::uint16_t at(int row, int col) const { return pixels[static_cast<std::size_t>(row) * width + col]; }
};

/// PGM, ASCII (P2) or binary (P5), 8 or 16 bit.
inline GrayImage parse_pgm(const std::string& bytes, const std::string& source = "<pgm>") {
  std::size_t pos = 0;
  auto fail = [&](const std::string& msg) { throw Error(ErrorCode::ParseError, "cli_io", source + ": " + msg); };
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_int = [&]() -> long {
    skip_space();
    const std::size_t start = pos;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) ++pos;
    if (start == pos) fail("expected an integer");
    return std::stol(bytes.substr(start, pos - start));
  };
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '2' && bytes[1] != '5')) fail("not a P2/P5 PGM file");
  const bool binary = bytes[1] == '5';
  pos = 2;
  const long w = read_int(), h = read_int(), maxval = read_int();
  if (w <= 0 || h <= 0 || w > 1 << 15 || h > 1 << 15) fail("bad image size");
  if (maxval <= 0 || maxval > 65535) fail("bad maxval");
  GrayImage img{static_cast<int>(w), static_cast<int>(h), {}};
  img.pixels.resize(static_cast<std::size_t>(w * h));
  if (binary) {
    ++pos;  // single whitespace after maxval
    const std::size_t bpp = maxval < 256 ? 1 : 2;
    if (bytes.size() < pos + img.pixels.size() * bpp) fail("pixel data truncated");
    for (std::size_t k = 0; k < img.pixels.size(); ++k) {
      const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + pos + k * bpp);
      img.pixels[k] = static_cast<std::uint16_t>(bpp == 1 ? p[0] : (p[0] << 8) | p[1]);
    }
  } else {
    for (auto& px : img.pixels) {
      const long v = read_int();
      if (v > maxval) fail("pixel value exceeds maxval");
      px = static_cast<std::uint16_t>(v);
    }
  }
  return img;
}

/// IDX image archive (magic 0x00000803, big-endian dimensions).
inline std::vector<GrayImage> parse_idx(const std::string& bytes, std::size_t max_records = SIZE_MAX) {
  if (bytes.size() < 4) throw Error(ErrorCode::Truncated, "cli_io", "IDX header truncated");
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  if (detail::get_u32be(p) != 0x00000803u) throw Error(ErrorCode::BadMagic, "cli_io", "IDX magic 0x00000803 expected");
  if (bytes.size() < 16) throw Error(ErrorCode::Truncated, "cli_io", "IDX header truncated");
  const std::size_t count = detail::get_u32be(p + 4), rows = detail::get_u32be(p + 8), cols = detail::get_u32be(p + 12);
  const std::size_t n = std::min(count, max_records);
  const std::size_t sz = rows * cols;
  if (n > 0 && bytes.size() < 16 + n * sz) throw Error(ErrorCode::Truncated, "cli_io", "IDX payload truncated");
  std::vector<GrayImage> out;
  for (std::size_t r = 0; r < n; ++r) {
    GrayImage img{static_cast<int>(cols), static_cast<int>(rows), std::vector<std::uint16_t>(sz)};
    for (std::size_t k = 0; k < sz; ++k) img.pixels[k] = p[16 + r * sz + k];
    out.push_back(std::move(img));
  }
  return out;
}

inline std::vector<GrayImage> load_idx(const fs::path& path, std::size_t max_records = SIZE_MAX) {
  return parse_idx(read_file(path), max_records);
}

/// One atom per pixel brighter than `threshold` (default: half the brightest
/// pixel), at x = (col + 0.5) / W, y = 1 - (row + 0.5) / H; uniform weights.
inline DiscreteMeasure image_to_pointcloud(const GrayImage& img, std::optional<double> threshold = std::nullopt) {
  if (img.pixels.empty()) throw Error(ErrorCode::ParseError, "cli_io", "empty image");
  const auto peak = *std::max_element(img.pixels.begin(), img.pixels.end());
  const double thr = threshold.value_or(0.5 * peak);
  std::vector<Point2> pts;
  for (int r = 0; r < img.height; ++r)
    for (int c = 0; c < img.width; ++c)
      if (img.at(r, c) > thr) pts.push_back({(c + 0.5) / img.width, 1.0 - (r + 0.5) / img.height});
  if (pts.empty()) throw Error(ErrorCode::AllBelowThreshold, "cli_io", "no pixel above threshold " + format_double(thr));
  return uniform_measure(std::move(pts));
}

/// PGM file or the first record of an IDX archive.
inline DiscreteMeasure image_to_pointcloud(const fs::path& path, std::optional<double> threshold = std::nullopt) {
  const auto bytes = read_file(path);
  if (bytes.size() >= 2 && bytes[0] == 'P') return image_to_pointcloud(parse_pgm(bytes, path.string()), threshold);
  return image_to_pointcloud(parse_idx(bytes, 1).front(), threshold);
}

// ---------------------------------------------------------------------------
// Records

inline std::string format_csv(const std::vector<std::string>& columns, const std::vector<std::vector<double>>& rows) {
  std::string s;
  for (std::size_t c = 0; c < columns.size(); ++c) s += (c ? "," : "") + columns[c];
  s += "\n";
  for (const auto& r : rows) {
    for (std::size_t c = 0; c < r.size(); ++c) s += (c ? "," : "") + format_double(r[c]);
    s += "\n";
  }
  return s;
}

inline json record_metadata(const ExperimentRecord& rec) {
  json checks = json::array();
  for (const auto& c : rec.checks) checks.push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
  return {{"experiment", rec.id}, {"config", rec.config}, {"columns", rec.columns},
          {"summary", rec.summary}, {"checks", checks}, {"passed", rec.passed()}};
}

/// Writes <stem>.csv and <stem>.json into `dir`; `extra` is merged into the sidecar.
inline std::pair<fs::path, fs::path> write_record(const fs::path& dir, const ExperimentRecord& rec,
                                                  const json& extra = json::object(), std::string stem = {}) {
  if (stem.empty()) stem = rec.id;
  const auto csv = dir / (stem + ".csv");
  const auto meta = dir / (stem + ".json");
  json j = record_metadata(rec);
  for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = it.value();
  write_file_atomic(csv, format_csv(rec.columns, rec.rows));
  write_file_atomic(meta, j.dump(2) + "\n");
  return {csv, meta};
}

}  // namespace monge
