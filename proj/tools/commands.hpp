#pragma once

#include <functional>

#include <CLI11.hpp>

namespace chordvae::cli {

using Action = std::function<void()>;

// Each register_* adds a subcommand to `app`; after a successful parse the
// selected subcommand stores its runner in `action`.
void register_synth(CLI::App& app, Action& action);
void register_train(CLI::App& app, Action& action);
void register_estimate(CLI::App& app, Action& action);
void register_eval(CLI::App& app, Action& action);
void register_inspect(CLI::App& app, Action& action);
void register_vocab(CLI::App& app, Action& action);

inline constexpr const char* kThreadsEnv = "CHORDVAE_THREADS";

}  // namespace chordvae::cli
