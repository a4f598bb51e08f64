#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "rag/metadata.hpp"

namespace rag {

struct Document {
  std::string id;
  std::string text;  // normalized
  Metadata metadata;
  std::string source_path;

  bool operator==(const Document&) const = default;
};

struct ManifestEntry {
  std::string id;
  std::string path;  // relative to the manifest location
  Metadata metadata;

  bool operator==(const ManifestEntry&) const = default;
};

struct Manifest {
  std::vector<ManifestEntry> entries;

  bool operator==(const Manifest&) const = default;
};

/// Metadata keys the chunker attaches to every chunk; a manifest may not
/// use them.
inline constexpr std::string_view kDocIdKey = "doc_id";
inline constexpr std::string_view kChunkIndexKey = "chunk_index";

/// Parses a JSONL manifest. Blank lines are skipped; line numbers in errors
/// are 1-based.
Manifest parse_manifest(std::string_view bytes);
std::string serialize_manifest(const Manifest& manifest);

/// Reads and normalizes one document. Relative entry paths resolve against
/// `base_dir`.
Document load_document(const ManifestEntry& entry, const std::filesystem::path& base_dir = {});

/// Text extraction for the HTML subset we accept: tags removed, script and
/// style bodies dropped, block-level boundaries emitted as newlines, common
/// entities decoded. The result is not normalized.
std::string strip_html(std::string_view html);

std::string normalize_text(std::string_view raw);

bool is_valid_utf8(std::string_view bytes);

}  // namespace rag
