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

#include "mambapf/checkpoint.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include "mambapf/io.hpp"

namespace mambapf {

namespace {

constexpr const char* kMagic = "mambapf-checkpoint";

[[noreturn]] void bad(const std::string& source, std::size_t line, const std::string& what) {
  fail(ErrorCode::parse, source + ":" + std::to_string(line) + ": " + what);
}

}  // namespace

void write_checkpoint(std::ostream& out, const RunConfig& config, const DenoiseModel& model) {
  out << kMagic << ' ' << kCheckpointVersion << "\nconfig\n";
  write_config(out, config);
  out << "end config\n";
  model.visit([&out](const std::string& name, const ad::Tensor& t) {
    out << "param " << name << ' ' << t.rows() << ' ' << t.cols() << '\n';
    for (Index r = 0; r < t.rows(); ++r) {
      for (Index c = 0; c < t.cols(); ++c) out << (c ? " " : "") << format_double(t(r, c));
      out << '\n';
    }
  });
  out << "end\n";
}

Checkpoint read_checkpoint(std::istream& in, const std::string& source) {
  std::string line;
  std::size_t lineno = 0;
  auto next = [&]() {
    if (!std::getline(in, line)) bad(source, lineno, "unexpected end of checkpoint");
    ++lineno;
  };
  next();
  {
    std::istringstream head(line);
    std::string magic;
    int version = -1;
    head >> magic >> version;
    if (magic != kMagic) bad(source, lineno, "not a mambapf checkpoint");
    if (version != kCheckpointVersion) {
      fail(ErrorCode::checkpoint_mismatch, source + ": checkpoint format version " + std::to_string(version) +
                                               ", this build reads version " + std::to_string(kCheckpointVersion));
    }
  }
  next();
  if (line != "config") bad(source, lineno, "expected 'config'");
  std::ostringstream cfg_text;
  for (next(); line != "end config"; next()) cfg_text << line << '\n';
  std::istringstream cfg_in(cfg_text.str());
  Checkpoint ck;
  ck.config = parse_config(cfg_in, source + " [config]");
  ck.config.validate();

  std::map<std::string, ad::Tensor> tensors;
  for (next(); line != "end"; next()) {
    std::istringstream head(line);
    std::string tag, name;
    long long rows = -1, cols = -1;
    head >> tag >> name >> rows >> cols;
    if (tag != "param" || rows < 0 || cols < 0) bad(source, lineno, "expected 'param <name> <rows> <cols>'");
    ad::Tensor t(rows, cols);
    for (long long r = 0; r < rows; ++r) {
      next();
      std::istringstream row(line);
      std::string tok;
      for (long long c = 0; c < cols; ++c) {
        double v = 0.0;
        if (!(row >> tok) || !parse_double(tok, v)) bad(source, lineno, "bad value in '" + name + "'");
        t(r, c) = v;
      }
      if (row >> tok) bad(source, lineno, "extra values in '" + name + "'");
    }
    if (!tensors.emplace(name, std::move(t)).second) bad(source, lineno, "duplicate parameter '" + name + "'");
  }

  ck.model = init_model(ck.config.net(), ck.config.modules, 0);
  std::size_t matched = 0;
  ck.model.visit([&](const std::string& name, ad::Tensor& t) {
    const auto it = tensors.find(name);
    if (it == tensors.end()) fail(ErrorCode::checkpoint_mismatch, source + ": missing parameter '" + name + "'");
    if (it->second.rows() != t.rows() || it->second.cols() != t.cols()) {
      fail(ErrorCode::checkpoint_mismatch, source + ": parameter '" + name + "' has shape " +
                                               std::to_string(it->second.rows()) + "x" +
                                               std::to_string(it->second.cols()) + ", config implies " +
                                               std::to_string(t.rows()) + "x" + std::to_string(t.cols()));
    }
    t = it->second;
    ++matched;
  });
  if (matched != tensors.size()) {
    fail(ErrorCode::checkpoint_mismatch, source + ": checkpoint holds parameters the config does not describe");
  }
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const RunConfig& config, const DenoiseModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::io, "cannot open '" + path.string() + "' for writing");
  write_checkpoint(out, config, model);
  out.flush();
  if (!out) fail(ErrorCode::io, "write to '" + path.string() + "' failed");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io, "cannot open checkpoint '" + path.string() + "'");
  return read_checkpoint(in, path.string());
}

void require_compatible(const RunConfig& checkpoint_config, const RunConfig& requested) {
  const auto diff = architecture_mismatches(checkpoint_config, requested);
  if (diff.empty()) return;
  std::string msg = "checkpoint (format v" + std::to_string(kCheckpointVersion) + ") was saved with a different ";
  for (std::size_t i = 0; i < diff.size(); ++i) {
    msg += (i ? ", " : "") + diff[i] + " (" + get_config_value(checkpoint_config, diff[i]) + " vs " +
           get_config_value(requested, diff[i]) + ")";
  }
  fail(ErrorCode::checkpoint_mismatch, msg);
}

}  // namespace mambapf
