// Copyright 2026 The mambapf Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "mambapf/io.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

namespace mambapf {

namespace {

[[noreturn]] void parse_fail(const std::string& source, std::size_t line, const std::string& what) {
  fail(ErrorCode::parse, source + ":" + std::to_string(line) + ": " + what);
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    const std::size_t j = i;
    while (i < s.size() && !std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    if (i > j) out.push_back(s.substr(j, i - j));
  }
  return out;
}

std::string_view strip_comment(std::string_view s) {
  const auto hash = s.find('#');
  return hash == std::string_view::npos ? s : s.substr(0, hash);
}

bool parse_index(std::string_view token, long long& out) {
  const char* end = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(token.data(), end, out);
  return ec == std::errc() && ptr == end;
}

std::string lower_ext(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return char(std::tolower(c)); });
  return ext;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io, "cannot open '" + path.string() + "' for reading");
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::io, "cannot open '" + path.string() + "' for writing");
  return out;
}

void finish_write(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) fail(ErrorCode::io, "write to '" + path.string() + "' failed");
}

PointCloud to_cloud(const std::vector<double>& xyz) {
  PointCloud cloud(static_cast<Index>(xyz.size() / 3), 3);
  for (Index i = 0; i < cloud.rows(); ++i)
    for (int a = 0; a < 3; ++a) cloud(i, a) = xyz[static_cast<std::size_t>(3 * i + a)];
  return cloud;
}

void write_point_rows(std::ostream& out, const PointCloud& cloud) {
  for (Index i = 0; i < cloud.rows(); ++i) {
    out << format_double17(cloud(i, 0)) << ' ' << format_double17(cloud(i, 1)) << ' '
        << format_double17(cloud(i, 2)) << '\n';
  }
}

void add_polygon(std::vector<std::array<Index, 3>>& faces, const std::vector<Index>& poly, const std::string& source,
                 std::size_t line) {
  if (poly.size() < 3) parse_fail(source, line, "face with fewer than 3 vertices");
  for (std::size_t i = 1; i + 1 < poly.size(); ++i) faces.push_back({poly[0], poly[i], poly[i + 1]});
}

TriangleMesh to_mesh(const std::vector<double>& xyz, const std::vector<std::array<Index, 3>>& faces) {
  TriangleMesh mesh;
  mesh.vertices = to_cloud(xyz);
  mesh.faces.resize(static_cast<Index>(faces.size()), 3);
  for (std::size_t f = 0; f < faces.size(); ++f)
    for (int k = 0; k < 3; ++k) mesh.faces(static_cast<Index>(f), k) = faces[f][static_cast<std::size_t>(k)];
  return mesh;
}

}  // namespace

CloudFormat cloud_format_from_path(const std::filesystem::path& path) {
  const std::string ext = lower_ext(path);
  if (ext == ".xyz" || ext == ".txt" || ext == ".pts") return CloudFormat::xyz;
  if (ext == ".ply") return CloudFormat::ply_ascii;
  fail(ErrorCode::invalid_input, "unknown point-cloud extension '" + ext + "' (expected .xyz or .ply)");
}

MeshFormat mesh_format_from_path(const std::filesystem::path& path) {
  const std::string ext = lower_ext(path);
  if (ext == ".obj") return MeshFormat::obj;
  if (ext == ".off") return MeshFormat::off;
  fail(ErrorCode::invalid_input, "unknown mesh extension '" + ext + "' (expected .obj or .off)");
}

std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string format_double17(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, r.ptr);
}

bool parse_double(std::string_view token, double& out) {
  if (!token.empty() && token.front() == '+') token.remove_prefix(1);
  const char* end = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(token.data(), end, out);
  return ec == std::errc() && ptr == end && !token.empty();
}

PointCloud read_xyz(std::istream& in, const std::string& source) {
  std::vector<double> xyz;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto tokens = split_ws(strip_comment(line));
    if (tokens.empty()) continue;
    if (tokens.size() < 3) parse_fail(source, lineno, "expected 'x y z'");
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      double v;
      if (!parse_double(tokens[i], v) || !std::isfinite(v)) {
        parse_fail(source, lineno, "bad number '" + std::string(tokens[i]) + "'");
      }
      if (i < 3) xyz.push_back(v);
    }
  }
  if (xyz.empty()) fail(ErrorCode::parse, source + ": no points");
  return to_cloud(xyz);
}

PointCloud read_ply(std::istream& in, const std::string& source) {
  struct Element {
    std::string name;
    long long count = 0;
    std::vector<std::string> properties;
    bool has_list = false;
  };
  std::string line;
  std::size_t lineno = 0;
  auto next = [&]() -> bool {
    if (!std::getline(in, line)) return false;
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  };
  if (!next() || line != "ply") parse_fail(source, 1, "missing 'ply' magic");
  std::vector<Element> elements;
  bool ascii = false, header_done = false;
  while (next()) {
    const auto t = split_ws(line);
    if (t.empty()) continue;
    if (t[0] == "comment" || t[0] == "obj_info") continue;
    if (t[0] == "end_header") {
      header_done = true;
      break;
    }
    if (t[0] == "format") {
      if (t.size() < 2 || t[1] != "ascii") parse_fail(source, lineno, "only ascii PLY is supported");
      ascii = true;
    } else if (t[0] == "element") {
      long long n = 0;
      if (t.size() != 3 || !parse_index(t[2], n) || n < 0) parse_fail(source, lineno, "bad element line");
      elements.push_back({std::string(t[1]), n, {}, false});
    } else if (t[0] == "property") {
      if (elements.empty()) parse_fail(source, lineno, "property before element");
      if (t.size() >= 2 && t[1] == "list") {
        if (t.size() != 5) parse_fail(source, lineno, "bad list property");
        elements.back().has_list = true;
        elements.back().properties.emplace_back(t[4]);
      } else {
        if (t.size() != 3) parse_fail(source, lineno, "bad property line");
        elements.back().properties.emplace_back(t[2]);
      }
    } else {
      parse_fail(source, lineno, "unexpected header keyword '" + std::string(t[0]) + "'");
    }
  }
  if (!header_done) parse_fail(source, lineno, "missing end_header");
  if (!ascii) parse_fail(source, lineno, "missing format line");

  std::vector<double> xyz;
  bool saw_vertex = false;
  for (const Element& e : elements) {
    int ix = -1, iy = -1, iz = -1;
    if (e.name == "vertex") {
      saw_vertex = true;
      for (std::size_t p = 0; p < e.properties.size(); ++p) {
        if (e.properties[p] == "x") ix = int(p);
        if (e.properties[p] == "y") iy = int(p);
        if (e.properties[p] == "z") iz = int(p);
      }
      if (ix < 0 || iy < 0 || iz < 0) parse_fail(source, lineno, "vertex element lacks x/y/z");
      if (e.has_list) parse_fail(source, lineno, "list properties on vertices are not supported");
    }
    for (long long r = 0; r < e.count; ++r) {
      if (!next()) {
        parse_fail(source, lineno, "file ends after " + std::to_string(r) + " of " + std::to_string(e.count) + " '" +
                                       e.name + "' rows");
      }
      if (e.name != "vertex") continue;
      const auto t = split_ws(line);
      if (t.size() != e.properties.size()) parse_fail(source, lineno, "vertex row has wrong property count");
      double v[3];
      const int idx[3] = {ix, iy, iz};
      for (int a = 0; a < 3; ++a) {
        if (!parse_double(t[static_cast<std::size_t>(idx[a])], v[a]) || !std::isfinite(v[a])) {
          parse_fail(source, lineno, "bad coordinate");
        }
      }
      xyz.insert(xyz.end(), v, v + 3);
    }
  }
  if (!saw_vertex || xyz.empty()) fail(ErrorCode::parse, source + ": no vertices");
  return to_cloud(xyz);
}

void write_xyz(std::ostream& out, const PointCloud& cloud) { write_point_rows(out, cloud); }

void write_ply(std::ostream& out, const PointCloud& cloud) {
  out << "ply\nformat ascii 1.0\nelement vertex " << cloud.rows()
      << "\nproperty double x\nproperty double y\nproperty double z\nend_header\n";
  write_point_rows(out, cloud);
}

PointCloud load_cloud(const std::filesystem::path& path, CloudFormat format) {
  std::ifstream in = open_in(path);
  return format == CloudFormat::xyz ? read_xyz(in, path.string()) : read_ply(in, path.string());
}

PointCloud load_cloud(const std::filesystem::path& path) { return load_cloud(path, cloud_format_from_path(path)); }

void save_cloud(const std::filesystem::path& path, const PointCloud& cloud, CloudFormat format) {
  std::ofstream out = open_out(path);
  if (format == CloudFormat::xyz) {
    write_xyz(out, cloud);
  } else {
    write_ply(out, cloud);
  }
  finish_write(out, path);
}

void save_cloud(const std::filesystem::path& path, const PointCloud& cloud) {
  save_cloud(path, cloud, cloud_format_from_path(path));
}

TriangleMesh read_obj(std::istream& in, const std::string& source) {
  std::vector<double> xyz;
  std::vector<std::array<Index, 3>> faces;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = split_ws(strip_comment(line));
    if (t.empty()) continue;
    if (t[0] == "v") {
      if (t.size() < 4) parse_fail(source, lineno, "vertex needs 3 coordinates");
      for (int a = 1; a <= 3; ++a) {
        double v;
        if (!parse_double(t[static_cast<std::size_t>(a)], v) || !std::isfinite(v)) {
          parse_fail(source, lineno, "bad coordinate");
        }
        xyz.push_back(v);
      }
    } else if (t[0] == "f") {
      const long long nv = static_cast<long long>(xyz.size() / 3);
      std::vector<Index> poly;
      for (std::size_t i = 1; i < t.size(); ++i) {
        const std::string_view ref = t[i].substr(0, t[i].find('/'));
        long long idx = 0;
        if (!parse_index(ref, idx)) parse_fail(source, lineno, "bad face index '" + std::string(t[i]) + "'");
        if (idx == 0) parse_fail(source, lineno, "face index 0 is invalid (OBJ indices are 1-based)");
        const long long resolved = idx > 0 ? idx - 1 : nv + idx;
        if (resolved < 0 || resolved >= nv) {
          parse_fail(source, lineno, "face index " + std::to_string(idx) + " out of range");
        }
        poly.push_back(static_cast<Index>(resolved));
      }
      add_polygon(faces, poly, source, lineno);
    }
  }
  if (xyz.empty()) fail(ErrorCode::parse, source + ": no vertices");
  return to_mesh(xyz, faces);
}

TriangleMesh read_off(std::istream& in, const std::string& source) {
  std::size_t lineno = 0;
  std::string held;
  // Next non-empty, comment-stripped line split into tokens.
  auto next_tokens = [&]() -> std::vector<std::string_view> {
    while (std::getline(in, held)) {
      ++lineno;
      auto t = split_ws(strip_comment(held));
      if (!t.empty()) return t;
    }
    return {};
  };
  auto t = next_tokens();
  if (t.empty() || (t[0] != "OFF" && t[0].substr(0, 3) != "OFF")) parse_fail(source, lineno, "missing OFF header");
  if (t[0] != "OFF") parse_fail(source, lineno, "unsupported OFF variant '" + std::string(t[0]) + "'");
  std::vector<std::string_view> counts(t.begin() + 1, t.end());
  if (counts.empty()) counts = next_tokens();
  long long nv = 0, nf = 0;
  if (counts.size() < 2 || !parse_index(counts[0], nv) || !parse_index(counts[1], nf) || nv < 0 || nf < 0) {
    parse_fail(source, lineno, "bad OFF counts line");
  }
  std::vector<double> xyz;
  for (long long i = 0; i < nv; ++i) {
    t = next_tokens();
    if (t.size() < 3) parse_fail(source, lineno, "expected vertex " + std::to_string(i));
    for (int a = 0; a < 3; ++a) {
      double v;
      if (!parse_double(t[static_cast<std::size_t>(a)], v) || !std::isfinite(v)) parse_fail(source, lineno, "bad coordinate");
      xyz.push_back(v);
    }
  }
  std::vector<std::array<Index, 3>> faces;
  for (long long f = 0; f < nf; ++f) {
    t = next_tokens();
    long long n = 0;
    if (t.empty() || !parse_index(t[0], n) || n < 0 || t.size() < static_cast<std::size_t>(n) + 1) {
      parse_fail(source, lineno, "expected face " + std::to_string(f));
    }
    std::vector<Index> poly;
    for (long long k = 1; k <= n; ++k) {
      long long idx = 0;
      if (!parse_index(t[static_cast<std::size_t>(k)], idx) || idx < 0 || idx >= nv) {
        parse_fail(source, lineno, "face index out of range");
      }
      poly.push_back(static_cast<Index>(idx));
    }
    add_polygon(faces, poly, source, lineno);
  }
  if (xyz.empty()) fail(ErrorCode::parse, source + ": no vertices");
  return to_mesh(xyz, faces);
}

void write_obj(std::ostream& out, const TriangleMesh& mesh) {
  for (Index i = 0; i < mesh.vertices.rows(); ++i) {
    out << "v " << format_double17(mesh.vertices(i, 0)) << ' ' << format_double17(mesh.vertices(i, 1)) << ' '
        << format_double17(mesh.vertices(i, 2)) << '\n';
  }
  for (Index f = 0; f < mesh.faces.rows(); ++f) {
    out << "f " << mesh.faces(f, 0) + 1 << ' ' << mesh.faces(f, 1) + 1 << ' ' << mesh.faces(f, 2) + 1 << '\n';
  }
}

void write_off(std::ostream& out, const TriangleMesh& mesh) {
  out << "OFF\n" << mesh.vertices.rows() << ' ' << mesh.faces.rows() << " 0\n";
  write_point_rows(out, mesh.vertices);
  for (Index f = 0; f < mesh.faces.rows(); ++f) {
    out << "3 " << mesh.faces(f, 0) << ' ' << mesh.faces(f, 1) << ' ' << mesh.faces(f, 2) << '\n';
  }
}

TriangleMesh load_mesh(const std::filesystem::path& path, MeshFormat format) {
  std::ifstream in = open_in(path);
  return format == MeshFormat::obj ? read_obj(in, path.string()) : read_off(in, path.string());
}

TriangleMesh load_mesh(const std::filesystem::path& path) { return load_mesh(path, mesh_format_from_path(path)); }

void save_mesh(const std::filesystem::path& path, const TriangleMesh& mesh, MeshFormat format) {
  std::ofstream out = open_out(path);
  if (format == MeshFormat::obj) {
    write_obj(out, mesh);
  } else {
    write_off(out, mesh);
  }
  finish_write(out, path);
}

void write_pgm(const std::filesystem::path& path, const Eigen::MatrixXd& image) {
  std::ofstream out = open_out(path);
  out << "P5\n" << image.cols() << ' ' << image.rows() << "\n255\n";
  for (Index r = 0; r < image.rows(); ++r) {
    for (Index c = 0; c < image.cols(); ++c) {
      const double v = std::isfinite(image(r, c)) ? std::clamp(image(r, c), 0.0, 1.0) : 0.0;
      out.put(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0))));
    }
  }
  finish_write(out, path);
}

Eigen::MatrixXd read_pgm(const std::filesystem::path& path) {
  std::ifstream in = open_in(path);
  std::string magic;
  long long w = 0, h = 0, maxval = 0;
  in >> magic >> w >> h >> maxval;
  if (!in || magic != "P5" || w <= 0 || h <= 0 || maxval <= 0 || maxval > 255) {
    fail(ErrorCode::parse, path.string() + ": not an 8-bit binary PGM");
  }
  in.get();
  Eigen::MatrixXd image(h, w);
  for (long long r = 0; r < h; ++r) {
    for (long long c = 0; c < w; ++c) {
      const int byte = in.get();
      if (byte == EOF) fail(ErrorCode::parse, path.string() + ": truncated pixel data");
      image(r, c) = double(byte) / double(maxval);
    }
  }
  return image;
}

}  // namespace mambapf
