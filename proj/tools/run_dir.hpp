#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace chordvae::cli {

// An output directory built under a hidden sibling and renamed into place by
// commit(). Destruction without commit removes everything written so far.
class StagedDir {
 public:
  StagedDir(std::filesystem::path target, bool force);
  ~StagedDir();
  StagedDir(const StagedDir&) = delete;
  StagedDir& operator=(const StagedDir&) = delete;

  const std::filesystem::path& path() const { return staging_; }
  std::filesystem::path operator/(const std::string& name) const { return staging_ / name; }
  const std::filesystem::path& target() const { return target_; }
  void commit();

 private:
  std::filesystem::path target_;
  std::filesystem::path staging_;
  bool force_;
  bool committed_ = false;
};

void write_text(const std::filesystem::path& file, const std::string& text);
void write_json(const std::filesystem::path& file, const nlohmann::json& j);
nlohmann::json read_json(const std::filesystem::path& file);
std::string read_text(const std::filesystem::path& file);

struct RunInfo {
  std::string command;
  nlohmann::json config = nlohmann::json::object();
  std::uint64_t seed = 0;
  nlohmann::json inputs = nlohmann::json::object();
  nlohmann::json outputs = nlohmann::json::array();
  bool timestamp = false;
};

// Wall-clock is recorded only on request so that reruns stay byte-identical.
nlohmann::json run_manifest(const RunInfo& info);

inline constexpr const char* kRunManifestName = "run_manifest.json";

}  // namespace chordvae::cli
