#include <charconv>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <iostream>

#include "chordvae/error.hpp"
#include "commands.hpp"

int main(int argc, char** argv) {
  namespace cli = chordvae::cli;
  CLI::App app{"Chord estimation with a variational autoencoder over chroma sequences"};
  app.require_subcommand(1, 1);
  app.set_config("--config", "", "TOML/INI file of option values; [subcommand] sections apply");
  cli::Action action;
  cli::register_synth(app, action);
  cli::register_train(app, action);
  cli::register_estimate(app, action);
  cli::register_eval(app, action);
  cli::register_inspect(app, action);
  cli::register_vocab(app, action);
  // The option parser silently ignores an environment value that fails validation.
  if (const char* env = std::getenv(cli::kThreadsEnv)) {
    int n = 0;
    const char* end = env + std::strlen(env);
    const auto [ptr, ec] = std::from_chars(env, end, n);
    if (ec != std::errc() || ptr != end || n < 1) {
      std::cerr << "error: " << cli::kThreadsEnv << " must be a positive integer, got '" << env
                << "'\n";
      return static_cast<int>(chordvae::ErrorKind::kUsage);
    }
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(chordvae::ErrorKind::kUsage);
  }
  try {
    action();
  } catch (const chordvae::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.exit_code();
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(chordvae::ErrorKind::kIo);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
