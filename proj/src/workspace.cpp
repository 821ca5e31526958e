#include "dropkit/workspace.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

#include <json.hpp>

#include "dropkit/error.hpp"
#include "dropkit/util.hpp"

namespace dropkit {

namespace fs = std::filesystem;

void validate_artifact_name(std::string_view name) {
  const bool ok = !name.empty() && name.front() != '.' && name.size() <= 200 &&
                  std::all_of(name.begin(), name.end(), [](char c) {
                    return std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '_' || c == '-';
                  });
  if (!ok || name.find("..") != std::string_view::npos)
    throw Error(ErrorClass::usage, "invalid artifact name '" + std::string(name) +
                                       "' (letters, digits, '.', '_', '-' only; no leading dot)");
}

Workspace::Workspace(fs::path root) : root_(std::move(root)) {
  std::error_code ec;
  fs::create_directories(root_, ec);
  for (auto a : kAreas) fs::create_directories(root_ / a, ec);
  if (ec || !fs::is_directory(root_)) throw Error(ErrorClass::cant_create, "cannot create workspace " + root_.string());
}

fs::path Workspace::area(std::string_view name) const {
  if (std::find(std::begin(kAreas), std::end(kAreas), name) == std::end(kAreas))
    throw Error(ErrorClass::usage, "unknown workspace area '" + std::string(name) + "'");
  return root_ / name;
}

fs::path Workspace::path(std::string_view area_name, std::string_view name) const {
  // Campaigns are directories of files; allow one level "campaign/file" there.
  if (area_name == "campaigns") {
    const auto slash = name.find('/');
    if (slash != std::string_view::npos) {
      validate_artifact_name(name.substr(0, slash));
      validate_artifact_name(name.substr(slash + 1));
      return area(area_name) / name.substr(0, slash) / name.substr(slash + 1);
    }
  }
  validate_artifact_name(name);
  return area(area_name) / name;
}

bool Workspace::exists(std::string_view area_name, std::string_view name) const {
  return fs::exists(path(area_name, name));
}

std::string Workspace::read(std::string_view area_name, std::string_view name) const {
  const auto p = path(area_name, name);
  if (!fs::exists(p))
    throw Error(ErrorClass::io, "no such artifact: " + (fs::path(area_name) / name).string());
  return read_file(p.string());
}

void Workspace::ensure_absent(std::string_view area_name, std::string_view name) const {
  const auto p = path(area_name, name);
  if (fs::exists(p)) throw Error(ErrorClass::cant_create, "refusing to overwrite existing artifact " + p.string());
}

std::string Workspace::write(std::string_view area_name, std::string_view name, std::string_view content,
                             const ArtifactManifest& manifest) const {
  const auto p = path(area_name, name);
  ensure_absent(area_name, name);
  std::error_code ec;
  fs::create_directories(p.parent_path(), ec);
  {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw Error(ErrorClass::cant_create, "cannot create " + p.string());
    out << content;
    if (!out) throw Error(ErrorClass::io, "write failed for " + p.string());
  }
  const std::string digest = sha256_hex(content);
  nlohmann::json j;
  j["artifact"] = p.filename().string();
  j["sha256"] = digest;
  j["command"] = manifest.command;
  j["inputs"] = manifest.inputs;
  j["seeds"] = manifest.seeds;
  if (!manifest.notes.empty()) j["notes"] = manifest.notes;
  auto mp = p;
  mp += ".manifest.json";
  std::ofstream out(mp, std::ios::binary);
  if (!out) throw Error(ErrorClass::cant_create, "cannot create " + mp.string());
  out << j.dump(2) << "\n";
  return digest;
}

std::map<std::string, std::string> Workspace::artifact_hashes() const {
  std::map<std::string, std::string> out;
  for (const auto& entry : fs::recursive_directory_iterator(root_)) {
    if (!entry.is_regular_file()) continue;
    const auto rel = fs::relative(entry.path(), root_);
    if (*rel.begin() == "cache") continue;
    out[rel.generic_string()] = sha256_file(entry.path().string());
  }
  return out;
}

}  // namespace dropkit
