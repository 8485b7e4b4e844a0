#include "shapediff/mesh_io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

#include "shapediff/error.hpp"

namespace shapediff {

namespace {

struct Line {
  std::size_t number = 0;
  std::vector<std::string_view> tokens;
};

// Splits text into whitespace-tokenized lines. Blank lines and anything after
// '#' (when `comments` is set) are dropped.
class LineReader {
 public:
  LineReader(std::string_view text, bool comments) : text_(text), comments_(comments) {}

  bool next(Line& line) {
    while (pos_ < text_.size()) {
      auto end = text_.find('\n', pos_);
      if (end == std::string_view::npos) end = text_.size();
      std::string_view raw = text_.substr(pos_, end - pos_);
      pos_ = end + 1;
      ++number_;
      if (comments_) {
        if (auto hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
      }
      line.number = number_;
      line.tokens.clear();
      std::size_t i = 0;
      while (i < raw.size()) {
        while (i < raw.size() && std::isspace(static_cast<unsigned char>(raw[i]))) ++i;
        std::size_t j = i;
        while (j < raw.size() && !std::isspace(static_cast<unsigned char>(raw[j]))) ++j;
        if (j > i) line.tokens.push_back(raw.substr(i, j - i));
        i = j;
      }
      if (!line.tokens.empty()) return true;
    }
    return false;
  }

  std::size_t last_line() const { return number_; }

 private:
  std::string_view text_;
  bool comments_;
  std::size_t pos_ = 0;
  std::size_t number_ = 0;
};

double to_double(std::string_view tok, std::size_t line) {
  double v = 0.0;
  const char* first = tok.data();
  const char* last = tok.data() + tok.size();
  if (!tok.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || !std::isfinite(v)) {
    throw ParseError(line, "expected a finite number, got '" + std::string(tok) + "'");
  }
  return v;
}

std::uint64_t to_count(std::string_view tok, std::size_t line) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    throw ParseError(line, "expected a non-negative integer, got '" + std::string(tok) + "'");
  }
  return v;
}

Vec3 read_xyz_tokens(const Line& line, std::size_t offset = 0) {
  if (line.tokens.size() < offset + 3) throw ParseError(line.number, "expected 3 coordinates");
  return {to_double(line.tokens[offset], line.number),
          to_double(line.tokens[offset + 1], line.number),
          to_double(line.tokens[offset + 2], line.number)};
}

void append_g(std::string& out, double v, int digits) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  out += buf;
}

void append_point(std::string& out, const Vec3& p, int digits) {
  append_g(out, p[0], digits);
  out += ' ';
  append_g(out, p[1], digits);
  out += ' ';
  append_g(out, p[2], digits);
  out += '\n';
}

}  // namespace

TriangleMesh parse_off(std::string_view text) {
  LineReader reader(text, true);
  Line line;
  if (!reader.next(line)) throw ParseError(1, "empty input, expected 'OFF' header");
  const auto header = line.tokens[0];
  std::vector<std::string_view> counts;
  if (header == "OFF") {
    counts.assign(line.tokens.begin() + 1, line.tokens.end());
  } else if (header.size() > 3 && header.substr(0, 3) == "OFF" &&
             std::isdigit(static_cast<unsigned char>(header[3]))) {
    // "OFF490 518 0" as written by some exporters.
    counts.push_back(header.substr(3));
    counts.insert(counts.end(), line.tokens.begin() + 1, line.tokens.end());
  } else {
    throw ParseError(line.number, "expected 'OFF' header, got '" + std::string(header) + "'");
  }
  std::size_t counts_line = line.number;
  if (counts.empty()) {
    if (!reader.next(line)) throw ParseError(reader.last_line() + 1, "missing counts line");
    counts = line.tokens;
    counts_line = line.number;
  }
  if (counts.size() < 2) throw ParseError(counts_line, "counts line needs vertex and face counts");
  const auto nv = to_count(counts[0], counts_line);
  const auto nf = to_count(counts[1], counts_line);

  TriangleMesh mesh;
  mesh.vertices.reserve(nv);
  for (std::uint64_t i = 0; i < nv; ++i) {
    if (!reader.next(line)) {
      throw ParseError(reader.last_line(), "count mismatch: expected " + std::to_string(nv) +
                                               " vertices, found " + std::to_string(i));
    }
    mesh.vertices.push_back(read_xyz_tokens(line));
  }
  for (std::uint64_t f = 0; f < nf; ++f) {
    if (!reader.next(line)) {
      throw ParseError(reader.last_line(), "count mismatch: expected " + std::to_string(nf) +
                                               " faces, found " + std::to_string(f));
    }
    const auto k = to_count(line.tokens[0], line.number);
    if (k < 3) throw ParseError(line.number, "face needs at least 3 vertices");
    if (line.tokens.size() < k + 1) throw ParseError(line.number, "face has fewer indices than declared");
    std::vector<std::uint32_t> idx(k);
    for (std::uint64_t j = 0; j < k; ++j) {
      const auto v = to_count(line.tokens[j + 1], line.number);
      if (v >= nv) {
        throw ParseError(line.number, "vertex index " + std::to_string(v) + " out of range (" +
                                          std::to_string(nv) + " vertices)");
      }
      idx[j] = static_cast<std::uint32_t>(v);
    }
    for (std::uint64_t j = 1; j + 1 < k; ++j) mesh.faces.push_back({idx[0], idx[j], idx[j + 1]});
  }
  if (reader.next(line)) {
    throw ParseError(line.number, "count mismatch: unexpected data after declared faces");
  }
  return mesh;
}

PointCloud parse_ply_ascii(std::string_view text) {
  LineReader reader(text, false);
  Line line;
  if (!reader.next(line) || line.tokens[0] != "ply") throw ParseError(1, "expected 'ply' magic");

  struct Element {
    std::string name;
    std::uint64_t count = 0;
    std::vector<std::string> properties;
  };
  std::vector<Element> elements;
  bool have_format = false;
  while (true) {
    if (!reader.next(line)) throw ParseError(reader.last_line(), "missing 'end_header'");
    const auto key = line.tokens[0];
    if (key == "end_header") break;
    if (key == "comment" || key == "obj_info") continue;
    if (key == "format") {
      if (line.tokens.size() < 2) throw ParseError(line.number, "malformed format line");
      if (line.tokens[1] != "ascii") {
        throw UnsupportedFormatError(line.number,
                                     "unsupported PLY format '" + std::string(line.tokens[1]) +
                                         "', only ascii is supported");
      }
      have_format = true;
    } else if (key == "element") {
      if (line.tokens.size() != 3) throw ParseError(line.number, "malformed element line");
      elements.push_back({std::string(line.tokens[1]), to_count(line.tokens[2], line.number), {}});
    } else if (key == "property") {
      if (elements.empty()) throw ParseError(line.number, "property before any element");
      if (line.tokens.size() < 3) throw ParseError(line.number, "malformed property line");
      elements.back().properties.emplace_back(line.tokens.back());
    } else {
      throw ParseError(line.number, "unknown header keyword '" + std::string(key) + "'");
    }
  }
  if (!have_format) throw ParseError(reader.last_line(), "missing format line");

  PointCloud pc;
  bool have_vertex = false;
  for (const auto& el : elements) {
    std::array<std::size_t, 3> col{};
    const bool is_vertex = el.name == "vertex";
    if (is_vertex) {
      have_vertex = true;
      for (int k = 0; k < 3; ++k) {
        const char* axis[] = {"x", "y", "z"};
        auto it = std::find(el.properties.begin(), el.properties.end(), axis[k]);
        if (it == el.properties.end()) {
          throw ParseError(0, std::string("vertex element lacks property '") + axis[k] + "'");
        }
        col[k] = static_cast<std::size_t>(it - el.properties.begin());
      }
      pc.points.reserve(el.count);
    }
    for (std::uint64_t i = 0; i < el.count; ++i) {
      if (!reader.next(line)) {
        throw ParseError(reader.last_line(), "count mismatch: expected " + std::to_string(el.count) +
                                                 " " + el.name + " records, found " +
                                                 std::to_string(i));
      }
      if (!is_vertex) continue;
      if (line.tokens.size() < el.properties.size()) {
        throw ParseError(line.number, "vertex record has too few values");
      }
      pc.points.push_back({to_double(line.tokens[col[0]], line.number),
                           to_double(line.tokens[col[1]], line.number),
                           to_double(line.tokens[col[2]], line.number)});
    }
  }
  if (!have_vertex) throw ParseError(0, "no vertex element");
  if (reader.next(line)) {
    throw ParseError(line.number, "count mismatch: unexpected data after declared elements");
  }
  return pc;
}

PointCloud parse_xyz(std::string_view text) {
  LineReader reader(text, false);
  Line line;
  PointCloud pc;
  while (reader.next(line)) {
    if (line.tokens.size() != 3) throw ParseError(line.number, "expected exactly 3 values");
    pc.points.push_back(read_xyz_tokens(line));
  }
  return pc;
}

std::string to_off(const TriangleMesh& mesh) {
  std::string out = "OFF\n" + std::to_string(mesh.vertices.size()) + " " +
                    std::to_string(mesh.faces.size()) + " 0\n";
  for (const auto& v : mesh.vertices) append_point(out, v, 17);
  for (const auto& f : mesh.faces) {
    out += "3 " + std::to_string(f[0]) + " " + std::to_string(f[1]) + " " + std::to_string(f[2]) + "\n";
  }
  return out;
}

std::string to_ply_ascii(const PointCloud& pc) {
  std::string out = "ply\nformat ascii 1.0\nelement vertex " + std::to_string(pc.size()) +
                    "\nproperty double x\nproperty double y\nproperty double z\nend_header\n";
  for (const auto& p : pc.points) append_point(out, p, 17);
  return out;
}

std::string to_xyz(const PointCloud& pc) {
  std::string out;
  out.reserve(pc.size() * 40);
  for (const auto& p : pc.points) append_point(out, p, 9);
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw RuntimeError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw RuntimeError("cannot write " + path.string());
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw RuntimeError("write failed: " + path.string());
}

PointCloud load_point_cloud(const std::filesystem::path& path, std::size_t mesh_points,
                            std::uint64_t seed) {
  const auto ext = path.extension().string();
  const auto text = read_file(path);
  try {
    if (ext == ".xyz") return parse_xyz(text);
    if (ext == ".ply") return parse_ply_ascii(text);
    if (ext == ".off") return sample_surface(parse_off(text), mesh_points, seed);
  } catch (const ParseError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  throw ValidationError("unsupported point cloud extension '" + ext + "' for " + path.string());
}

}  // namespace shapediff
