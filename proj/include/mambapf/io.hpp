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

#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include <Eigen/Core>

#include "mambapf/geometry.hpp"

namespace mambapf {

enum class CloudFormat { xyz, ply_ascii };
enum class MeshFormat { obj, off };

/// By extension: .xyz/.txt/.pts -> xyz, .ply -> ply_ascii.
CloudFormat cloud_format_from_path(const std::filesystem::path& path);
MeshFormat mesh_format_from_path(const std::filesystem::path& path);

/// Shortest text that parses back to the same double.
std::string format_double(double v);
/// 17 significant digits.
std::string format_double17(double v);
/// Whole-token parse; false on trailing garbage or out-of-range input.
bool parse_double(std::string_view token, double& out);

PointCloud read_xyz(std::istream& in, const std::string& source = "<stream>");
PointCloud read_ply(std::istream& in, const std::string& source = "<stream>");
void write_xyz(std::ostream& out, const PointCloud& cloud);
void write_ply(std::ostream& out, const PointCloud& cloud);

PointCloud load_cloud(const std::filesystem::path& path, CloudFormat format);
PointCloud load_cloud(const std::filesystem::path& path);
void save_cloud(const std::filesystem::path& path, const PointCloud& cloud, CloudFormat format);
void save_cloud(const std::filesystem::path& path, const PointCloud& cloud);

/// Polygons are fan-triangulated. OBJ indices are 1-based; negative indices
/// count back from the latest vertex.
TriangleMesh read_obj(std::istream& in, const std::string& source = "<stream>");
TriangleMesh read_off(std::istream& in, const std::string& source = "<stream>");
void write_obj(std::ostream& out, const TriangleMesh& mesh);
void write_off(std::ostream& out, const TriangleMesh& mesh);

TriangleMesh load_mesh(const std::filesystem::path& path, MeshFormat format);
TriangleMesh load_mesh(const std::filesystem::path& path);
void save_mesh(const std::filesystem::path& path, const TriangleMesh& mesh, MeshFormat format);

/// Binary (P5) 8-bit graymap; values are clamped to [0, 1].
void write_pgm(const std::filesystem::path& path, const Eigen::MatrixXd& image);
Eigen::MatrixXd read_pgm(const std::filesystem::path& path);

}  // namespace mambapf
