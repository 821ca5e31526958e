#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace dropkit {

/// Provenance written next to every artifact as `<file>.manifest.json`.
struct ArtifactManifest {
  std::string command;
  std::map<std::string, std::string> inputs;  // input label -> SHA-256
  std::map<std::string, std::uint64_t> seeds;
  std::map<std::string, std::string> notes;
};

/// A workspace root with fixed areas: logs/, datasets/, models/, reports/, campaigns/, cache/.
/// Artifacts are write-once: writing to an existing path fails with exit class cant_create.
class Workspace {
public:
  static constexpr std::string_view kAreas[] = {"logs", "datasets", "models", "reports", "campaigns", "cache"};

  /// Creates the root and its areas when missing.
  explicit Workspace(std::filesystem::path root);

  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path area(std::string_view name) const;

  /// `area/name`, after checking that `name` is a plain file name (no separators, no "..").
  std::filesystem::path path(std::string_view area, std::string_view name) const;

  bool exists(std::string_view area, std::string_view name) const;
  std::string read(std::string_view area, std::string_view name) const;

  /// Writes the artifact and its manifest; returns the artifact's SHA-256.
  std::string write(std::string_view area, std::string_view name, std::string_view content,
                    const ArtifactManifest& manifest) const;

  /// Fails (cant_create) if the artifact exists; used before expensive work.
  void ensure_absent(std::string_view area, std::string_view name) const;

  /// Every file under the root except cache/, relative path -> SHA-256, sorted.
  std::map<std::string, std::string> artifact_hashes() const;

private:
  std::filesystem::path root_;
};

void validate_artifact_name(std::string_view name);

}  // namespace dropkit
