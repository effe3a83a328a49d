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

#ifndef COLLABEDIT_CLI_COMMANDS_H_
#define COLLABEDIT_CLI_COMMANDS_H_

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "collabedit/cli/run_config.h"

namespace collabedit::cli {

inline constexpr std::array<std::string_view, 7> kCommandNames = {
    "gate", "merge-bench", "overlap", "conflict", "forgetting", "privacy", "packet"};

enum class PacketAction { kEncode, kDecode, kInspect };

struct PacketArgs {
  PacketAction action = PacketAction::kInspect;
  // Packet file to write (encode) or read (decode, inspect). Empty means
  // <out-dir>/packet/packet.cedp.
  std::filesystem::path file;
  std::uint32_t client_id = 0;
};

// Every command writes <out_dir>/<command>/results.csv and summary.json. The
// summary echoes the full config under "config" and is also returned.
nlohmann::json run_gate(const RunConfig& config, const std::filesystem::path& out_dir);
nlohmann::json run_merge_bench(const RunConfig& config, const std::filesystem::path& out_dir);
nlohmann::json run_overlap(const RunConfig& config, const std::filesystem::path& out_dir);
nlohmann::json run_conflict(const RunConfig& config, const std::filesystem::path& out_dir);
nlohmann::json run_forgetting(const RunConfig& config, const std::filesystem::path& out_dir);
nlohmann::json run_privacy(const RunConfig& config, const std::filesystem::path& out_dir);
nlohmann::json run_packet(const RunConfig& config, const PacketArgs& args,
                          const std::filesystem::path& out_dir, std::ostream& out);

// Dispatches by name; throws ConfigError for an unknown command.
nlohmann::json run_command(std::string_view command, const RunConfig& config,
                           const std::filesystem::path& out_dir, const PacketArgs& packet,
                           std::ostream& out);

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitIo = 1;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitNumerical = 3;

// Maps the exception currently being handled to an exit code.
int exit_code_for_current_exception() noexcept;

}  // namespace collabedit::cli

#endif  // COLLABEDIT_CLI_COMMANDS_H_
