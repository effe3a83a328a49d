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

#ifndef COLLABEDIT_CLI_EMIT_H_
#define COLLABEDIT_CLI_EMIT_H_

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "collabedit/collab.h"

namespace collabedit::cli {

// Shortest text that parses back to the same double; "nan", "inf", "-inf"
// for non-finite values.
std::string format_double(double v);

// One CSV cell. Implicit constructors keep call sites compact.
class Cell {
 public:
  Cell(double v) : text_(format_double(v)) {}
  Cell(bool v) : text_(v ? "1" : "0") {}
  Cell(int v) : text_(std::to_string(v)) {}
  Cell(unsigned v) : text_(std::to_string(v)) {}
  Cell(long v) : text_(std::to_string(v)) {}
  Cell(unsigned long v) : text_(std::to_string(v)) {}
  Cell(long long v) : text_(std::to_string(v)) {}
  Cell(unsigned long long v) : text_(std::to_string(v)) {}
  Cell(std::string_view v);
  Cell(const char* v) : Cell(std::string_view(v)) {}
  Cell(const std::string& v) : Cell(std::string_view(v)) {}

  const std::string& text() const noexcept { return text_; }

 private:
  std::string text_;
};

// Writes RFC 4180 CSV with '\n' line endings. Row width must match the header.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, std::vector<std::string> header);

  void row(std::initializer_list<Cell> cells);
  void close();

 private:
  std::filesystem::path path_;
  std::ofstream out_;
  std::size_t width_;
};

void write_json(const std::filesystem::path& path, const nlohmann::json& j);

// Creates <out_dir>/<command> and returns it.
std::filesystem::path command_dir(const std::filesystem::path& out_dir, std::string_view command);

nlohmann::json to_json(const RoundReport& report);

// Appends one JSON object per line.
class JsonLinesWriter {
 public:
  explicit JsonLinesWriter(const std::filesystem::path& path);
  void write(const nlohmann::json& j);

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

}  // namespace collabedit::cli

#endif  // COLLABEDIT_CLI_EMIT_H_
