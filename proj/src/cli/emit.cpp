/*
 * Copyright 2026 The CollabEdit Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "collabedit/cli/emit.h"

#include <charconv>
#include <cmath>
#include <system_error>

#include "collabedit/errors.h"

namespace collabedit::cli {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw Error("format_double: conversion failed");
  return std::string(buf, end);
}

Cell::Cell(std::string_view v) {
  if (v.find_first_of(",\"\n\r") == std::string_view::npos) {
    text_ = v;
    return;
  }
  text_ = "\"";
  for (char c : v) {
    if (c == '"') text_ += '"';
    text_ += c;
  }
  text_ += '"';
}

CsvWriter::CsvWriter(const std::filesystem::path& path, std::vector<std::string> header)
    : path_(path), out_(path, std::ios::binary | std::ios::trunc), width_(header.size()) {
  if (!out_) throw Error("cannot open " + path.string() + " for writing");
  for (std::size_t i = 0; i < header.size(); ++i) out_ << (i ? "," : "") << header[i];
  out_ << '\n';
}

void CsvWriter::row(std::initializer_list<Cell> cells) {
  if (cells.size() != width_) {
    throw InvalidArgument("CsvWriter: row has " + std::to_string(cells.size()) +
                          " cells, header has " + std::to_string(width_));
  }
  bool first = true;
  for (const auto& c : cells) {
    if (!first) out_ << ',';
    out_ << c.text();
    first = false;
  }
  out_ << '\n';
}

void CsvWriter::close() {
  out_.close();
  if (!out_) throw Error("failed writing " + path_.string());
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
  if (!out) throw Error("failed writing " + path.string());
}

std::filesystem::path command_dir(const std::filesystem::path& out_dir, std::string_view command) {
  const auto dir = out_dir / std::string(command);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error("cannot create " + dir.string() + ": " + ec.message());
  return dir;
}

nlohmann::json to_json(const RoundReport& report) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : report.layers) {
    nlohmann::json o{{"layer_id", l.layer_id}, {"delta_norm", l.delta_norm}};
    o["gap_to_global"] = l.gap_to_global ? nlohmann::json(*l.gap_to_global) : nlohmann::json();
    layers.push_back(std::move(o));
  }
  return {{"round", report.round},         {"strategy", report.strategy},
          {"n_clients", report.n_clients}, {"n_edits", report.n_edits},
          {"layers", std::move(layers)},   {"elapsed_ms", report.elapsed_ms}};
}

JsonLinesWriter::JsonLinesWriter(const std::filesystem::path& path)
    : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
  if (!out_) throw Error("cannot open " + path.string() + " for writing");
}

void JsonLinesWriter::write(const nlohmann::json& j) {
  out_ << j.dump() << '\n';
  out_.flush();
  if (!out_) throw Error("failed writing " + path_.string());
}

}  // namespace collabedit::cli
