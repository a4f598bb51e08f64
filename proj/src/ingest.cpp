#include "rag/ingest.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <iterator>
#include <sstream>
#include <unordered_set>

#include "rag/errors.hpp"

namespace rag {
namespace {

std::string to_lower_ascii(std::string_view s) {
  std::string out(s);
  for (auto& c : out) {
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

bool is_block_tag(std::string_view name) {
  static const std::unordered_set<std::string_view> kBlock = {
      "address", "article", "aside",   "blockquote", "br",      "dd",     "div",
      "dl",      "dt",      "figcaption", "figure",  "footer",  "form",   "h1",
      "h2",      "h3",      "h4",      "h5",         "h6",      "header", "hr",
      "li",      "main",    "nav",     "ol",         "p",       "pre",    "section",
      "table",   "tbody",   "td",      "tfoot",      "th",      "thead",  "tr",
      "ul",      "title",   "body",    "html",       "head"};
  return kBlock.contains(name);
}

void append_utf8(std::string& out, std::uint32_t cp) {
  if (cp == 0 || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
    cp = 0xFFFD;
  }
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

// Decodes the entity starting at html[pos] == '&'. Returns consumed length,
// 0 if it is not a recognized entity.
std::size_t decode_entity(std::string_view html, std::size_t pos, std::string& out) {
  const auto semi = html.find(';', pos);
  if (semi == std::string_view::npos || semi - pos > 10) {
    return 0;
  }
  const auto body = html.substr(pos + 1, semi - pos - 1);
  if (body.empty()) {
    return 0;
  }
  if (body[0] == '#') {
    std::uint32_t cp = 0;
    const bool hex = body.size() > 1 && (body[1] == 'x' || body[1] == 'X');
    const auto digits = body.substr(hex ? 2 : 1);
    if (digits.empty()) {
      return 0;
    }
    for (char c : digits) {
      const auto uc = static_cast<unsigned char>(c);
      std::uint32_t d;
      if (std::isdigit(uc)) {
        d = static_cast<std::uint32_t>(c - '0');
      } else if (hex && std::isxdigit(uc)) {
        d = static_cast<std::uint32_t>(std::tolower(uc) - 'a' + 10);
      } else {
        return 0;
      }
      cp = cp * (hex ? 16 : 10) + d;
      if (cp > 0x10FFFF) {
        cp = 0x110000;
      }
    }
    append_utf8(out, cp);
    return semi - pos + 1;
  }
  static const std::array<std::pair<std::string_view, std::string_view>, 6> kNamed = {{
      {"amp", "&"}, {"lt", "<"}, {"gt", ">"}, {"quot", "\""}, {"apos", "'"}, {"nbsp", " "}}};
  for (const auto& [name, text] : kNamed) {
    if (body == name) {
      out.append(text);
      return semi - pos + 1;
    }
  }
  return 0;
}

// Parses a tag name after '<' or '</'. Empty if the character run is not a
// tag name.
std::string_view tag_name_at(std::string_view html, std::size_t pos) {
  std::size_t end = pos;
  while (end < html.size() &&
         (std::isalnum(static_cast<unsigned char>(html[end])) || html[end] == '-')) {
    ++end;
  }
  if (end == pos || !std::isalpha(static_cast<unsigned char>(html[pos]))) {
    return {};
  }
  return html.substr(pos, end - pos);
}

// Finds the '>' closing a tag, skipping quoted attribute values.
std::size_t tag_end(std::string_view html, std::size_t pos) {
  char quote = 0;
  for (std::size_t i = pos; i < html.size(); ++i) {
    const char c = html[i];
    if (quote != 0) {
      if (c == quote) {
        quote = 0;
      }
    } else if (c == '"' || c == '\'') {
      quote = c;
    } else if (c == '>') {
      return i;
    }
  }
  return std::string_view::npos;
}

std::size_t find_ci(std::string_view haystack, std::string_view needle, std::size_t from) {
  const auto lower = to_lower_ascii(haystack.substr(std::min(from, haystack.size())));
  const auto hit = lower.find(needle);
  return hit == std::string::npos ? std::string_view::npos : from + hit;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::FileNotFound, path.string());
  }
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

Manifest parse_manifest(std::string_view bytes) {
  Manifest manifest;
  std::unordered_set<std::string> seen;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < bytes.size()) {
    auto end = bytes.find('\n', start);
    if (end == std::string_view::npos) {
      end = bytes.size();
    }
    ++line_no;
    auto line = bytes.substr(start, end - start);
    start = end + 1;
    if (line_no == 1 && line.starts_with("\xEF\xBB\xBF")) {
      line.remove_prefix(3);
    }
    if (std::all_of(line.begin(), line.end(),
                    [](char c) { return std::isspace(static_cast<unsigned char>(c)); })) {
      continue;
    }

    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorCode::MalformedLine, "line " + std::to_string(line_no) + ": " + e.what(),
                  line_no);
    }
    if (!obj.is_object()) {
      throw Error(ErrorCode::MalformedLine, "line " + std::to_string(line_no) + ": not an object",
                  line_no);
    }
    const auto id_it = obj.find("id");
    const auto path_it = obj.find("path");
    if (id_it == obj.end() || !id_it->is_string() || id_it->get<std::string>().empty() ||
        path_it == obj.end() || !path_it->is_string()) {
      throw Error(ErrorCode::MalformedLine,
                  "line " + std::to_string(line_no) + ": requires string keys 'id' and 'path'",
                  line_no);
    }

    ManifestEntry entry;
    entry.id = id_it->get<std::string>();
    entry.path = path_it->get<std::string>();
    if (!seen.insert(entry.id).second) {
      throw Error(ErrorCode::DuplicateId, entry.id, line_no);
    }
    for (const auto& [key, value] : obj.items()) {
      if (key == "id" || key == "path") {
        continue;
      }
      if (key.empty() || key == kDocIdKey || key == kChunkIndexKey) {
        throw Error(ErrorCode::ReservedMetadataKey, entry.id + ": '" + key + "'", line_no);
      }
      auto scalar = meta_from_json(value);
      if (!scalar) {
        throw Error(ErrorCode::NonScalarMetadata, entry.id + ": '" + key + "'", line_no);
      }
      entry.metadata.emplace(key, std::move(*scalar));
    }
    manifest.entries.push_back(std::move(entry));
  }
  return manifest;
}

std::string serialize_manifest(const Manifest& manifest) {
  std::string out;
  for (const auto& entry : manifest.entries) {
    auto obj = metadata_to_json(entry.metadata);
    obj["id"] = entry.id;
    obj["path"] = entry.path;
    out += obj.dump();
    out += '\n';
  }
  return out;
}

bool is_valid_utf8(std::string_view bytes) {
  std::size_t i = 0;
  while (i < bytes.size()) {
    const auto c = static_cast<unsigned char>(bytes[i]);
    std::size_t len;
    std::uint32_t cp;
    if (c < 0x80) {
      ++i;
      continue;
    } else if ((c & 0xE0) == 0xC0) {
      len = 2;
      cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
      len = 3;
      cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
      len = 4;
      cp = c & 0x07;
    } else {
      return false;
    }
    if (i + len > bytes.size()) {
      return false;
    }
    for (std::size_t k = 1; k < len; ++k) {
      const auto cc = static_cast<unsigned char>(bytes[i + k]);
      if ((cc & 0xC0) != 0x80) {
        return false;
      }
      cp = (cp << 6) | (cc & 0x3F);
    }
    // overlong forms, surrogates, out of range
    if ((len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) || (len == 4 && cp < 0x10000) ||
        cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
      return false;
    }
    i += len;
  }
  return true;
}

std::string strip_html(std::string_view html) {
  std::string out;
  out.reserve(html.size());
  std::size_t i = 0;
  while (i < html.size()) {
    const char c = html[i];
    if (c == '&') {
      if (const auto used = decode_entity(html, i, out); used > 0) {
        i += used;
        continue;
      }
      out.push_back(c);
      ++i;
      continue;
    }
    if (c != '<') {
      out.push_back(c);
      ++i;
      continue;
    }

    if (html.substr(i).starts_with("<!--")) {
      const auto close = html.find("-->", i + 4);
      i = close == std::string_view::npos ? html.size() : close + 3;
      continue;
    }
    if (i + 1 < html.size() && (html[i + 1] == '!' || html[i + 1] == '?')) {
      const auto close = tag_end(html, i + 1);
      i = close == std::string_view::npos ? html.size() : close + 1;
      continue;
    }

    const bool closing = i + 1 < html.size() && html[i + 1] == '/';
    const auto name = to_lower_ascii(tag_name_at(html, i + (closing ? 2 : 1)));
    if (name.empty()) {
      // A bare '<' that does not open a tag is text.
      out.push_back(c);
      ++i;
      continue;
    }
    const auto close = tag_end(html, i + 1);
    if (close == std::string_view::npos) {
      break;  // unterminated tag at end of input
    }
    i = close + 1;
    if (is_block_tag(name)) {
      out.push_back('\n');
    }
    if (!closing && (name == "script" || name == "style")) {
      const bool self_closed = close > 0 && html[close - 1] == '/';
      if (!self_closed) {
        const auto end_tag = find_ci(html, "</" + name, i);
        if (end_tag == std::string_view::npos) {
          i = html.size();
        } else {
          const auto end_close = tag_end(html, end_tag + 2);
          i = end_close == std::string_view::npos ? html.size() : end_close + 1;
        }
      }
    }
  }
  return out;
}

std::string normalize_text(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  bool pending_space = false;
  bool pending_newline = false;
  for (const char c : raw) {
    switch (c) {
      case '\r':
        break;
      case '\n':
        pending_newline = true;
        break;
      case ' ':
      case '\t':
      case '\v':
      case '\f':
        pending_space = true;
        break;
      default:
        if (!out.empty()) {
          if (pending_newline) {
            out.push_back('\n');
          } else if (pending_space) {
            out.push_back(' ');
          }
        }
        pending_space = false;
        pending_newline = false;
        out.push_back(c);
    }
  }
  return out;
}

Document load_document(const ManifestEntry& entry, const std::filesystem::path& base_dir) {
  std::filesystem::path path(entry.path);
  if (path.is_relative() && !base_dir.empty()) {
    path = base_dir / path;
  }
  const auto ext = to_lower_ascii(path.extension().string());
  const bool html = ext == ".html" || ext == ".htm";
  if (!html && ext != ".txt" && ext != ".md") {
    throw Error(ErrorCode::UnsupportedExtension,
                entry.id + ": '" + ext + "' (convert to text externally first)");
  }
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) {
    throw Error(ErrorCode::FileNotFound, entry.id + ": " + path.string());
  }

  auto bytes = read_file(path);
  std::string_view content(bytes);
  if (content.starts_with("\xEF\xBB\xBF")) {
    content.remove_prefix(3);
  }
  if (!is_valid_utf8(content)) {
    throw Error(ErrorCode::InvalidEncoding, entry.id + ": " + path.string());
  }

  Document doc;
  doc.id = entry.id;
  doc.metadata = entry.metadata;
  doc.source_path = path.string();
  doc.text = html ? normalize_text(strip_html(content)) : normalize_text(content);
  return doc;
}

}  // namespace rag
