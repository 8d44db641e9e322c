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

#include "mambapf/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <istream>
#include <ostream>

#include "mambapf/io.hpp"

namespace mambapf {

namespace {

struct Field {
  const char* key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

[[noreturn]] void bad_value(const std::string& key, const std::string& value) {
  fail(ErrorCode::parse, "config: bad value '" + value + "' for '" + key + "'");
}

template <typename T>
T parse_integer(const std::string& key, const std::string& value) {
  T out{};
  const char* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end || value.empty()) bad_value(key, value);
  return out;
}

double parse_real(const std::string& key, const std::string& value) {
  double out = 0.0;
  if (!parse_double(value, out)) bad_value(key, value);
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  bad_value(key, value);
}

#define MAMBAPF_INT(name) \
  Field { #name, [](RunConfig& c, const std::string& v) { c.name = parse_integer<int>(#name, v); }, \
          [](const RunConfig& c) { return std::to_string(c.name); } }
#define MAMBAPF_REAL(name) \
  Field { #name, [](RunConfig& c, const std::string& v) { c.name = parse_real(#name, v); }, \
          [](const RunConfig& c) { return format_double(c.name); } }
#define MAMBAPF_TEXT(name) \
  Field { #name, [](RunConfig& c, const std::string& v) { c.name = v; }, [](const RunConfig& c) { return c.name; } }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      MAMBAPF_INT(modules),
      MAMBAPF_INT(iterations),
      MAMBAPF_INT(mamba_layers),
      MAMBAPF_INT(patch_size),
      MAMBAPF_INT(k_graph),
      MAMBAPF_INT(width),
      MAMBAPF_INT(state_dim),
      MAMBAPF_INT(expand),
      MAMBAPF_INT(conv_width),
      MAMBAPF_REAL(max_step),
      MAMBAPF_TEXT(scan),
      MAMBAPF_REAL(alpha),
      MAMBAPF_INT(views),
      MAMBAPF_INT(image_size),
      MAMBAPF_INT(depth_bins),
      MAMBAPF_REAL(splat_sigma),
      MAMBAPF_REAL(lr),
      MAMBAPF_REAL(beta1),
      MAMBAPF_REAL(beta2),
      MAMBAPF_REAL(adam_eps),
      MAMBAPF_REAL(grad_clip),
      MAMBAPF_INT(epochs),
      MAMBAPF_REAL(noise_sigma),
      MAMBAPF_TEXT(noise_reference),
      MAMBAPF_REAL(sigma_start),
      MAMBAPF_REAL(sigma_end),
      Field{"seed", [](RunConfig& c, const std::string& v) { c.seed = parse_integer<std::uint64_t>("seed", v); },
            [](const RunConfig& c) { return std::to_string(c.seed); }},
      Field{"normalize", [](RunConfig& c, const std::string& v) { c.normalize = parse_bool("normalize", v); },
            [](const RunConfig& c) { return std::string(c.normalize ? "true" : "false"); }},
  };
  return table;
}

#undef MAMBAPF_INT
#undef MAMBAPF_REAL
#undef MAMBAPF_TEXT

const Field& field(const std::string& key) {
  for (const Field& f : fields())
    if (key == f.key) return f;
  fail(ErrorCode::parse, "config: unknown key '" + key + "'");
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

void RunConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) fail(ErrorCode::invalid_input, "config: " + what);
  };
  require(modules >= 1 && iterations >= 1 && mamba_layers >= 0 && epochs >= 0, "counts must be >= 1");
  require(patch_size >= 2 && k_graph >= 1 && k_graph < patch_size, "need 1 <= k_graph < patch_size");
  require(width >= 2 && state_dim >= 1 && expand >= 1 && conv_width >= 1, "bad network widths");
  require(max_step > 0.0, "max_step must be positive");
  require(scan == "associative" || scan == "sequential", "scan must be 'associative' or 'sequential'");
  require(alpha >= 0.0, "alpha must be >= 0");
  require(noise_sigma >= 0.0, "noise_sigma must be >= 0");
  require(noise_reference == "bounding_sphere_radius" || noise_reference == "bbox_diagonal",
          "noise_reference must be 'bounding_sphere_radius' or 'bbox_diagonal'");
  require(grad_clip >= 0.0, "grad_clip must be >= 0");
  render().validate();
  adam().validate();
  schedule().validate();
}

NetConfig RunConfig::net() const {
  NetConfig n;
  n.width = width;
  n.mamba_layers = mamba_layers;
  n.state_dim = state_dim;
  n.expand = expand;
  n.conv_width = conv_width;
  n.k_graph = k_graph;
  n.max_step = max_step;
  n.scan = scan == "sequential" ? ssm::ScanAlgorithm::sequential : ssm::ScanAlgorithm::associative;
  return n;
}

RenderConfig RunConfig::render() const {
  RenderConfig r;
  r.views = views;
  r.image_size = image_size;
  r.depth_bins = depth_bins;
  r.splat_sigma = splat_sigma;
  return r;
}

AdamConfig RunConfig::adam() const { return AdamConfig{lr, beta1, beta2, adam_eps}; }

IterationSchedule RunConfig::schedule() const { return IterationSchedule{iterations, sigma_start, sigma_end}; }

NoiseReference RunConfig::reference() const {
  return noise_reference == "bbox_diagonal" ? NoiseReference::bbox_diagonal : NoiseReference::bounding_sphere_radius;
}

const std::vector<std::string>& architecture_keys() {
  static const std::vector<std::string> keys = {"modules", "mamba_layers", "width",    "state_dim",
                                                "expand",  "conv_width",   "k_graph",  "max_step"};
  return keys;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const Field& f : fields()) keys.emplace_back(f.key);
  return keys;
}

void set_config_value(RunConfig& config, const std::string& key, const std::string& value) {
  field(key).set(config, value);
}

std::string get_config_value(const RunConfig& config, const std::string& key) { return field(key).get(config); }

RunConfig parse_config(std::istream& in, const std::string& source, RunConfig base) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    const std::string body = trim(hash == std::string::npos ? line : line.substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      fail(ErrorCode::parse, source + ":" + std::to_string(lineno) + ": expected 'key = value'");
    }
    try {
      set_config_value(base, trim(body.substr(0, eq)), trim(body.substr(eq + 1)));
    } catch (const Error& e) {
      fail(ErrorCode::parse, source + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return base;
}

RunConfig load_config(const std::filesystem::path& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io, "cannot open config '" + path.string() + "'");
  return parse_config(in, path.string(), std::move(base));
}

void write_config(std::ostream& out, const RunConfig& config) {
  for (const Field& f : fields()) out << f.key << " = " << f.get(config) << '\n';
}

std::vector<std::string> architecture_mismatches(const RunConfig& a, const RunConfig& b) {
  std::vector<std::string> out;
  for (const auto& key : architecture_keys())
    if (get_config_value(a, key) != get_config_value(b, key)) out.push_back(key);
  return out;
}

}  // namespace mambapf
