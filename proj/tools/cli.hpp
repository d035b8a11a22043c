#pragma once

#include <iosfwd>
#include <string_view>
#include <utility>

#include "essl/scheduler.hpp"
#include "essl/synthlab.hpp"

namespace essl::cli {

// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitInvalid = 2;
inline constexpr int kExitDegenerate = 3;

struct TrainConfig {
  LabConfig lab;
  SchedulerConfig scheduler;
};

// `key = value` training config; absent keys keep their defaults.
TrainConfig parse_train_config(std::string_view text);

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace essl::cli
