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

// collabedit: command-line front end for the experiment harnesses.
//
//   collabedit <command> [--config FILE] [--seed N] [--out-dir DIR] [--set key=value]...
//   collabedit packet {encode|decode|inspect} [--file FILE] [--client ID] ...

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "collabedit/cli/commands.h"
#include "collabedit/cli/run_config.h"

namespace {

using collabedit::cli::PacketAction;

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir = "out";
  std::vector<std::string> overrides;
};

void add_common(CLI::App& cmd, Options& o) {
  cmd.add_option("--config", o.config_path, "JSON run configuration");
  cmd.add_option("--seed", o.seed, "Master seed (overrides the config)");
  cmd.add_option("--out-dir", o.out_dir, "Output root; results go to <out-dir>/<command>/")
      ->capture_default_str();
  cmd.add_option("--set", o.overrides, "Config override key=value (repeatable)");
}

collabedit::cli::RunConfig resolve(const Options& o) {
  nlohmann::json j = o.config_path.empty()
                         ? collabedit::cli::to_json(collabedit::cli::RunConfig{})
                         : collabedit::cli::to_json(collabedit::cli::load_config(o.config_path));
  for (const auto& s : o.overrides) collabedit::cli::apply_override(j, s);
  if (o.seed) j["seed"] = *o.seed;
  return collabedit::cli::config_from_json(j);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Collaborative closed-form knowledge editing experiments"};
  app.require_subcommand(1);

  Options opts;
  collabedit::cli::PacketArgs packet;
  std::string packet_file;

  const char* descriptions[] = {
      "Gap curves of every merge strategy against the joint edit",
      "One-round comparison of merge strategies",
      "Residual trace of a repeatedly applied edit",
      "Conflict injection, detection and resolution study",
      "Old-edit retention under immutable and dynamic covariance",
      "Gram identity check and key ambiguity sweep",
      "Encode, decode or inspect a CEDP edit packet",
  };
  std::vector<CLI::App*> commands;
  for (std::size_t i = 0; i < collabedit::cli::kCommandNames.size(); ++i) {
    auto* cmd = app.add_subcommand(std::string(collabedit::cli::kCommandNames[i]), descriptions[i]);
    add_common(*cmd, opts);
    commands.push_back(cmd);
  }

  CLI::App* packet_cmd = commands.back();
  packet_cmd->require_subcommand(1);
  const std::pair<const char*, PacketAction> actions[] = {
      {"encode", PacketAction::kEncode},
      {"decode", PacketAction::kDecode},
      {"inspect", PacketAction::kInspect},
  };
  for (const auto& [name, action] : actions) {
    auto* sub = packet_cmd->add_subcommand(name);
    sub->add_option("--file", packet_file, "Packet file (default <out-dir>/packet/packet.cedp)");
    sub->add_option("--client", packet.client_id, "Client id of the encoded packet");
    add_common(*sub, opts);
    sub->callback([&packet, action = action] { packet.action = action; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? collabedit::cli::kExitOk : collabedit::cli::kExitValidation;
  }

  std::string command;
  for (auto* cmd : commands)
    if (cmd->parsed()) command = cmd->get_name();
  packet.file = packet_file;

  try {
    const collabedit::cli::RunConfig config = resolve(opts);
    collabedit::cli::run_command(command, config, opts.out_dir, packet, std::cout);
  } catch (const std::exception& e) {
    std::cerr << "collabedit " << command << ": " << e.what() << '\n';
    return collabedit::cli::exit_code_for_current_exception();
  }
  return collabedit::cli::kExitOk;
}
