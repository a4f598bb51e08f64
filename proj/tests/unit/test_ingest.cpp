#include <gtest/gtest.h>

#include <random>

#include "rag/errors.hpp"
#include "rag/ingest.hpp"
#include "test_util.hpp"

using namespace rag;
using rag::testing::TempDir;
using rag::testing::write_file;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an Error";
  return ErrorCode::IoError;
}

}  // namespace

TEST(ParseManifest, SingleEntryWithMetadata) {
  const auto m = parse_manifest(R"({"id":"d1","path":"a.txt","year":2020})");
  ASSERT_EQ(m.entries.size(), 1u);
  EXPECT_EQ(m.entries[0].id, "d1");
  EXPECT_EQ(m.entries[0].path, "a.txt");
  ASSERT_EQ(m.entries[0].metadata.size(), 1u);
  EXPECT_EQ(m.entries[0].metadata.at("year"), MetaValue(std::int64_t{2020}));
}

TEST(ParseManifest, EmptyInput) {
  EXPECT_TRUE(parse_manifest("").entries.empty());
  EXPECT_TRUE(parse_manifest("\n  \n").entries.empty());
}

TEST(ParseManifest, KeepsFileOrderAndScalarTypes) {
  const auto m = parse_manifest(
      "{\"id\":\"b\",\"path\":\"b.md\",\"score\":1.5,\"ok\":true,\"region\":\"EU\"}\n"
      "\n"
      "{\"id\":\"a\",\"path\":\"a.md\"}\n");
  ASSERT_EQ(m.entries.size(), 2u);
  EXPECT_EQ(m.entries[0].id, "b");
  EXPECT_EQ(m.entries[1].id, "a");
  EXPECT_EQ(m.entries[0].metadata.at("score"), MetaValue(1.5));
  EXPECT_EQ(m.entries[0].metadata.at("ok"), MetaValue(true));
  EXPECT_EQ(m.entries[0].metadata.at("region"), MetaValue(std::string("EU")));
}

TEST(ParseManifest, DuplicateId) {
  try {
    parse_manifest("{\"id\":\"d1\",\"path\":\"a.txt\"}\n{\"id\":\"d1\",\"path\":\"b.txt\"}\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DuplicateId);
    EXPECT_NE(std::string(e.what()).find("d1"), std::string::npos);
  }
}

TEST(ParseManifest, MalformedLineReportsLineNumber) {
  try {
    parse_manifest("{\"id\":\"d1\",\"path\":\"a.txt\"}\n{not json\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MalformedLine);
    EXPECT_EQ(e.position(), 2u);
  }
  EXPECT_EQ(code_of([] { parse_manifest("[1,2]"); }), ErrorCode::MalformedLine);
  EXPECT_EQ(code_of([] { parse_manifest("{\"path\":\"a.txt\"}"); }), ErrorCode::MalformedLine);
  EXPECT_EQ(code_of([] { parse_manifest("{\"id\":\"\",\"path\":\"a.txt\"}"); }),
            ErrorCode::MalformedLine);
  EXPECT_EQ(code_of([] { parse_manifest("{\"id\":7,\"path\":\"a.txt\"}"); }),
            ErrorCode::MalformedLine);
}

TEST(ParseManifest, NonScalarMetadata) {
  EXPECT_EQ(code_of([] { parse_manifest(R"({"id":"d","path":"a","tags":["x"]})"); }),
            ErrorCode::NonScalarMetadata);
  EXPECT_EQ(code_of([] { parse_manifest(R"({"id":"d","path":"a","m":{"k":1}})"); }),
            ErrorCode::NonScalarMetadata);
  EXPECT_EQ(code_of([] { parse_manifest(R"({"id":"d","path":"a","n":null})"); }),
            ErrorCode::NonScalarMetadata);
}

TEST(ParseManifest, ReservedKeys) {
  EXPECT_EQ(code_of([] { parse_manifest(R"({"id":"d","path":"a","doc_id":"x"})"); }),
            ErrorCode::ReservedMetadataKey);
  EXPECT_EQ(code_of([] { parse_manifest(R"({"id":"d","path":"a","chunk_index":1})"); }),
            ErrorCode::ReservedMetadataKey);
}

TEST(ParseManifest, RoundTripProperty) {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> kind(0, 3);
  for (int iter = 0; iter < 300; ++iter) {
    Manifest m;
    const int n = static_cast<int>(rng() % 6);
    for (int i = 0; i < n; ++i) {
      ManifestEntry e;
      e.id = "doc-" + std::to_string(iter) + "-" + std::to_string(i) + (i % 2 ? "\"q\"" : "é");
      e.path = "dir/file " + std::to_string(i) + ".txt";
      const int keys = static_cast<int>(rng() % 4);
      for (int k = 0; k < keys; ++k) {
        const auto key = "k" + std::to_string(k);
        switch (kind(rng)) {
          case 0: e.metadata[key] = static_cast<std::int64_t>(rng()) ; break;
          case 1: e.metadata[key] = std::ldexp(static_cast<double>(rng() % 100000), -7) + 0.5; break;
          case 2: e.metadata[key] = (rng() % 2) == 0; break;
          default: e.metadata[key] = std::string("v\n\t") + std::to_string(rng() % 1000); break;
        }
      }
      m.entries.push_back(std::move(e));
    }
    EXPECT_EQ(parse_manifest(serialize_manifest(m)), m);
  }
}

TEST(LoadDocument, HtmlTagStripping) {
  TempDir dir;
  write_file(dir / "a.html", "<p>Hello <b>world</b></p>");
  const auto doc = load_document({"d1", "a.html", {}}, dir.path());
  EXPECT_EQ(doc.text, "Hello world");
  EXPECT_EQ(doc.id, "d1");
}

TEST(LoadDocument, TextWhitespaceNormalization) {
  TempDir dir;
  write_file(dir / "a.txt", "x  y\r\nz");
  EXPECT_EQ(load_document({"d1", "a.txt", {}}, dir.path()).text, "x y\nz");
}

TEST(LoadDocument, MarkdownPassesThrough) {
  TempDir dir;
  write_file(dir / "n.md", "# Title\n\n* item <b>kept</b>\n");
  EXPECT_EQ(load_document({"n", "n.md", {}}, dir.path()).text, "# Title\n* item <b>kept</b>");
}

TEST(LoadDocument, CarriesMetadataAndStripsBom) {
  TempDir dir;
  write_file(dir / "a.txt", "\xEF\xBB\xBFhello");
  const auto doc = load_document({"d1", "a.txt", {{"year", std::int64_t{2020}}}}, dir.path());
  EXPECT_EQ(doc.text, "hello");
  EXPECT_EQ(doc.metadata.at("year"), MetaValue(std::int64_t{2020}));
}

TEST(LoadDocument, Errors) {
  TempDir dir;
  write_file(dir / "a.pdf", "%PDF-1.4");
  write_file(dir / "bad.txt", "ok \xC3\x28 bad");
  EXPECT_EQ(code_of([&] { load_document({"d", "a.pdf", {}}, dir.path()); }),
            ErrorCode::UnsupportedExtension);
  EXPECT_EQ(code_of([&] { load_document({"d", "missing.txt", {}}, dir.path()); }),
            ErrorCode::FileNotFound);
  EXPECT_EQ(code_of([&] { load_document({"d", "bad.txt", {}}, dir.path()); }),
            ErrorCode::InvalidEncoding);
}

TEST(NormalizeText, Examples) {
  EXPECT_EQ(normalize_text("a\t\tb"), "a b");
  EXPECT_EQ(normalize_text("a\n\n\nb"), "a\nb");
  EXPECT_EQ(normalize_text(""), "");
  EXPECT_EQ(normalize_text("  a  \n  b  "), "a\nb");
  EXPECT_EQ(normalize_text("a \r\n \r\n b"), "a\nb");
  EXPECT_EQ(normalize_text(" \n\t "), "");
}

TEST(NormalizeText, IdempotenceProperty) {
  std::mt19937_64 rng(11);
  const std::string alphabet = "ab \t\r\n\n\xC3\xA9.";
  for (int iter = 0; iter < 5000; ++iter) {
    std::string s;
    const auto len = rng() % 40;
    for (std::size_t i = 0; i < len; ++i) {
      s.push_back(alphabet[rng() % alphabet.size()]);
    }
    const auto once = normalize_text(s);
    EXPECT_EQ(normalize_text(once), once) << "input: " << s;
    EXPECT_EQ(once.find('\r'), std::string::npos);
    EXPECT_EQ(once.find('\t'), std::string::npos);
    EXPECT_EQ(once.find("  "), std::string::npos);
    EXPECT_EQ(once.find("\n\n"), std::string::npos);
    if (!once.empty()) {
      EXPECT_NE(once.front(), ' ');
      EXPECT_NE(once.back(), '\n');
    }
  }
}

TEST(StripHtml, ScriptStyleCommentsEntities) {
  EXPECT_EQ(normalize_text(strip_html(
                "<html><head><style>p{color:red}</style><script>if (a<b) x();</script></head>"
                "<body><!-- hidden --><h1>T&amp;C</h1><div>a &lt; b &#65;&#x42;</div></body></html>")),
            "T&C\na < b AB");
  EXPECT_EQ(normalize_text(strip_html("1 < 2 and 3<4")), "1 < 2 and 3<4");
  EXPECT_EQ(normalize_text(strip_html("line<br>break<BR/>again")), "line\nbreak\nagain");
}

namespace {

// Naive reference: the generator knows what every fragment renders to.
struct GeneratedHtml {
  std::string html;
  std::string expected;
};

GeneratedHtml generate_html(std::mt19937_64& rng) {
  static const std::vector<std::string> words = {"alpha", "beta", "gamma", "delta", "trade"};
  static const std::vector<std::string> inline_tags = {"b", "i", "span", "a href=\"x\""};
  static const std::vector<std::string> block_tags = {"p", "div", "li", "h2"};
  GeneratedHtml g;
  std::vector<std::string> open;
  const auto steps = 1 + rng() % 30;
  for (std::size_t s = 0; s < steps; ++s) {
    switch (rng() % 7) {
      case 0:
      case 1: {
        const auto& w = words[rng() % words.size()];
        g.html += " " + w;
        g.expected += " " + w;
        break;
      }
      case 2: {
        const auto& t = inline_tags[rng() % inline_tags.size()];
        g.html += "<" + t + ">";
        open.push_back(t.substr(0, t.find(' ')));
        break;
      }
      case 3: {
        const auto& t = block_tags[rng() % block_tags.size()];
        g.html += "<" + t + ">";
        g.expected += "\n";
        open.push_back(t);
        break;
      }
      case 4:
        if (!open.empty()) {
          const auto t = open.back();
          open.pop_back();
          g.html += "</" + t + ">";
          if (std::find(block_tags.begin(), block_tags.end(), t) != block_tags.end()) {
            g.expected += "\n";
          }
        }
        break;
      case 5:
        g.html += rng() % 2 ? "<script>var x = '<p>nope</p>';</script>" : "<!-- <b>gone</b> -->";
        break;
      default:
        g.html += " &amp;";
        g.expected += " &";
        break;
    }
  }
  return g;
}

}  // namespace

TEST(StripHtml, MatchesReferenceStripperOnGeneratedHtml) {
  std::mt19937_64 rng(3);
  for (int iter = 0; iter < 2000; ++iter) {
    const auto g = generate_html(rng);
    const auto got = normalize_text(strip_html(g.html));
    EXPECT_EQ(got, normalize_text(g.expected)) << g.html;
    EXPECT_EQ(got.find('<'), std::string::npos) << g.html;
  }
}

TEST(Utf8, Validation) {
  EXPECT_TRUE(is_valid_utf8("plain"));
  EXPECT_TRUE(is_valid_utf8("\xC3\xA9\xE2\x82\xAC\xF0\x9F\x98\x80"));
  EXPECT_FALSE(is_valid_utf8("\xC3"));
  EXPECT_FALSE(is_valid_utf8("\xC0\xAF"));          // overlong
  EXPECT_FALSE(is_valid_utf8("\xED\xA0\x80"));      // surrogate
  EXPECT_FALSE(is_valid_utf8("\xF4\x90\x80\x80"));  // above U+10FFFF
}
