#pragma once

// Dataset manifest: JSON with "images" and "queries". Paths inside the file
// are relative to the manifest's directory and are resolved on read.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "selconv/error.hpp"

namespace selconv {

enum class ImageRole { database, query, heldout };

inline std::string to_string(ImageRole r) {
  switch (r) {
    case ImageRole::database: return "database";
    case ImageRole::query: return "query";
    case ImageRole::heldout: return "heldout";
  }
  return "database";
}

inline ImageRole parse_role(const std::string& s) {
  if (s == "database") return ImageRole::database;
  if (s == "query") return ImageRole::query;
  if (s == "heldout") return ImageRole::heldout;
  throw ValidationError("unknown image role: " + s);
}

struct ImageEntry {
  std::string id;
  std::filesystem::path tensor_path;
  std::optional<std::filesystem::path> keypoints_path;
  ImageRole role = ImageRole::database;
};

struct QueryEntry {
  std::string query_id;
  std::vector<std::string> positive_ids;
  std::vector<std::string> junk_ids;
};

struct DatasetManifest {
  std::vector<ImageEntry> images;
  std::vector<QueryEntry> queries;

  const ImageEntry* find(const std::string& id) const {
    auto it = std::find_if(images.begin(), images.end(), [&](const ImageEntry& e) { return e.id == id; });
    return it == images.end() ? nullptr : &*it;
  }

  std::vector<const ImageEntry*> with_role(ImageRole role) const {
    std::vector<const ImageEntry*> out;
    for (const auto& e : images)
      if (e.role == role) out.push_back(&e);
    return out;
  }

  /// Throws ValidationError naming the first offending id.
  void validate() const {
    std::set<std::string> ids;
    for (const auto& e : images) {
      if (e.id.empty()) throw ValidationError("image with empty id");
      if (!ids.insert(e.id).second) throw ValidationError("duplicate image id: " + e.id);
    }
    std::set<std::string> seen_queries;
    for (const auto& q : queries) {
      if (!ids.count(q.query_id)) throw ValidationError("query references unknown id: " + q.query_id);
      if (!seen_queries.insert(q.query_id).second) throw ValidationError("duplicate query: " + q.query_id);
      std::set<std::string> pos;
      for (const auto& p : q.positive_ids) {
        if (!ids.count(p)) throw ValidationError("query " + q.query_id + " references unknown id: " + p);
        if (p == q.query_id) throw ValidationError("query lists itself as positive: " + p);
        pos.insert(p);
      }
      for (const auto& j : q.junk_ids) {
        if (!ids.count(j)) throw ValidationError("query " + q.query_id + " references unknown id: " + j);
        if (j == q.query_id) throw ValidationError("query lists itself as junk: " + j);
        if (pos.count(j)) throw ValidationError("id is both positive and junk: " + j);
      }
    }
  }
};

namespace detail {

inline std::vector<std::string> string_list(const nlohmann::json& j, const char* key) {
  std::vector<std::string> out;
  if (!j.contains(key)) return out;
  for (const auto& v : j.at(key)) out.push_back(v.get<std::string>());
  return out;
}

}  // namespace detail

inline DatasetManifest parse_manifest(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  DatasetManifest m;
  try {
    for (const auto& img : j.at("images")) {
      ImageEntry e;
      e.id = img.at("id").get<std::string>();
      e.tensor_path = base_dir / img.at("tensor_path").get<std::string>();
      if (img.contains("keypoints_path") && !img.at("keypoints_path").is_null())
        e.keypoints_path = base_dir / img.at("keypoints_path").get<std::string>();
      e.role = parse_role(img.value("role", std::string("database")));
      m.images.push_back(std::move(e));
    }
    if (j.contains("queries")) {
      for (const auto& q : j.at("queries")) {
        QueryEntry e;
        e.query_id = q.at("query_id").get<std::string>();
        e.positive_ids = detail::string_list(q, "positive_ids");
        e.junk_ids = detail::string_list(q, "junk_ids");
        m.queries.push_back(std::move(e));
      }
    }
  } catch (const nlohmann::json::exception& ex) {
    throw FormatError(std::string("malformed manifest: ") + ex.what());
  }
  m.validate();
  return m;
}

inline DatasetManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& ex) {
    throw FormatError(std::string("manifest is not valid JSON: ") + ex.what());
  }
  return parse_manifest(j, path.parent_path());
}

/// Serializes with paths made relative to `base_dir`.
inline nlohmann::json manifest_to_json(const DatasetManifest& m, const std::filesystem::path& base_dir) {
  namespace fs = std::filesystem;
  const fs::path base = fs::absolute(base_dir).lexically_normal();
  auto rel = [&](const fs::path& p) { return fs::absolute(p).lexically_normal().lexically_relative(base).generic_string(); };
  nlohmann::json images = nlohmann::json::array();
  for (const auto& e : m.images) {
    nlohmann::json o;
    o["id"] = e.id;
    o["tensor_path"] = rel(e.tensor_path);
    if (e.keypoints_path) o["keypoints_path"] = rel(*e.keypoints_path);
    o["role"] = to_string(e.role);
    images.push_back(std::move(o));
  }
  nlohmann::json queries = nlohmann::json::array();
  for (const auto& q : m.queries)
    queries.push_back({{"query_id", q.query_id}, {"positive_ids", q.positive_ids}, {"junk_ids", q.junk_ids}});
  return {{"images", std::move(images)}, {"queries", std::move(queries)}};
}

inline void write_manifest(const DatasetManifest& m, const std::filesystem::path& path) {
  m.validate();
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << manifest_to_json(m, path.parent_path()).dump(2) << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace selconv
