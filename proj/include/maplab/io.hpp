#pragma once

// JSON encoding of specs, content hashes and atomic report output.

#include "maplab/map_model.hpp"

#include <json.hpp>

#include <filesystem>
#include <memory>
#include <string>

namespace maplab::io {

using json = nlohmann::json;

json spec_to_json(const MapSpec& spec);
MapSpec spec_from_json(const json& j);

json ct_spec_to_json(const CtMapSpec& spec);
std::shared_ptr<const CtMapSpec> ct_spec_from_json(const json& j);

/// True for documents carrying a "generator" field.
bool is_ct_json(const json& j);

/// FNV-1a 64 over the canonical (sorted-key, compact) JSON text, as 16 hex digits.
std::string content_hash(const json& j);
std::string spec_hash(const MapSpec& spec);
std::string spec_hash(const CtMapSpec& spec);

json read_json_file(const std::filesystem::path& path);

/// Writes through a temporary file in the same directory followed by a rename.
void write_atomic(const std::filesystem::path& path, const std::string& content);

Vector vector_from_json(const json& j);
Matrix matrix_from_json(const json& j);
json to_json(const Vector& v);
json to_json(const Matrix& m);

}  // namespace maplab::io
