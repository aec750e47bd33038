#include "run_dir.hpp"

#include <chrono>
#include <fstream>
#include <sstream>

#include "chordvae/error.hpp"

#ifndef CHORDVAE_BUILD_ID
#define CHORDVAE_BUILD_ID "unknown"
#endif

namespace chordvae::cli {

namespace fs = std::filesystem;

StagedDir::StagedDir(fs::path target, bool force) : target_(std::move(target)), force_(force) {
  if (target_.empty()) throw UsageError("output path is empty");
  if (!target_.has_filename()) target_ = target_.parent_path();
  std::error_code ec;
  if (fs::exists(target_, ec) && !force_) {
    if (!fs::is_directory(target_) || !fs::is_empty(target_)) {
      throw UsageError("output " + target_.string() + " already exists; pass --force to replace it");
    }
  }
  staging_ = target_.parent_path() / ("." + target_.filename().string() + ".staging");
  fs::remove_all(staging_, ec);
  fs::create_directories(staging_, ec);
  if (ec) throw IoError("cannot create " + staging_.string() + ": " + ec.message());
}

StagedDir::~StagedDir() {
  if (!committed_) {
    std::error_code ec;
    fs::remove_all(staging_, ec);
  }
}

void StagedDir::commit() {
  std::error_code ec;
  if (fs::exists(target_, ec)) fs::remove_all(target_, ec);
  if (ec) throw IoError("cannot replace " + target_.string() + ": " + ec.message());
  fs::rename(staging_, target_, ec);
  if (ec) throw IoError("cannot move output into " + target_.string() + ": " + ec.message());
  committed_ = true;
}

void write_text(const fs::path& file, const std::string& text) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + file.string());
  out << text;
  if (!out) throw IoError("failed writing " + file.string());
}

void write_json(const fs::path& file, const nlohmann::json& j) { write_text(file, j.dump(2) + "\n"); }

std::string read_text(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError("cannot open " + file.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

nlohmann::json read_json(const fs::path& file) {
  try {
    return nlohmann::json::parse(read_text(file));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("malformed JSON in " + file.string() + ": " + e.what());
  }
}

nlohmann::json run_manifest(const RunInfo& info) {
  nlohmann::json m = {{"command", info.command},
                      {"config", info.config},
                      {"seed", info.seed},
                      {"build", CHORDVAE_BUILD_ID},
                      {"inputs", info.inputs},
                      {"outputs", info.outputs},
                      {"wall_clock", nullptr}};
  if (info.timestamp) {
    const auto now = std::chrono::system_clock::now();
    m["wall_clock"] = std::chrono::duration_cast<std::chrono::seconds>(now.time_since_epoch()).count();
  }
  return m;
}

}  // namespace chordvae::cli
