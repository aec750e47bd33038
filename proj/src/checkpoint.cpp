#include "chordvae/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "chordvae/binary_io.hpp"
#include "chordvae/error.hpp"

namespace chordvae {
namespace {
constexpr char kMagic[4] = {'C', 'V', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;
}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ParamStore& params,
                     const nlohmann::json& manifest) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out.write(kMagic, 4);
  binio::put<std::uint32_t>(out, kVersion);
  const std::string text = manifest.dump();
  binio::put<std::uint64_t>(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const std::string& name = params.name(i);
    binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    const Tensor& t = params.value(i);
    binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) binio::put<std::uint64_t>(out, d);
    for (double v : t.data()) binio::put<double>(out, v);
  }
  if (!out) throw IoError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    throw CheckpointMismatch(path.string() + " is not a checkpoint file");
  }
  const auto version = binio::get<std::uint32_t>(in, "checkpoint version");
  if (version != kVersion) {
    throw CheckpointMismatch("unsupported checkpoint version " + std::to_string(version));
  }
  const auto mlen = binio::get<std::uint64_t>(in, "manifest length");
  std::string text(mlen, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(mlen))) {
    throw ValidationError("truncated checkpoint manifest in " + path.string());
  }
  Checkpoint ck;
  try {
    ck.manifest = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("malformed checkpoint manifest: " + std::string(e.what()));
  }
  const auto count = binio::get<std::uint32_t>(in, "tensor count");
  for (std::uint32_t k = 0; k < count; ++k) {
    const auto nlen = binio::get<std::uint32_t>(in, "tensor name");
    std::string name(nlen, '\0');
    if (!in.read(name.data(), nlen)) throw ValidationError("truncated tensor name");
    const auto rank = binio::get<std::uint32_t>(in, "tensor rank");
    if (rank < 1 || rank > 3) throw ValidationError("bad tensor rank for " + name);
    std::vector<std::size_t> shape(rank);
    for (auto& d : shape) d = binio::get<std::uint64_t>(in, "tensor shape");
    Tensor t(shape);
    for (double& v : t.data()) v = binio::get<double>(in, "tensor " + name);
    ck.params.add(std::move(name), std::move(t));
  }
  return ck;
}

void require_config_hash(const nlohmann::json& manifest, const std::string& expected) {
  const std::string got = manifest.value("config_hash", std::string{});
  if (got != expected) {
    throw CheckpointMismatch("checkpoint config hash " + got + " does not match expected " +
                             expected);
  }
}

}  // namespace chordvae
