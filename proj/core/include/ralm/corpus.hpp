#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

namespace ralm {

struct document {
    std::string doc_id;
    std::optional<std::string> title;
    std::string text;
};

/// Half-open [start, end) word range into the source document.
struct word_span {
    std::size_t start = 0;
    std::size_t end = 0;

    std::size_t size() const noexcept { return end - start; }
    friend bool operator==(const word_span&, const word_span&) = default;
};

struct passage {
    std::size_t passage_id = 0;
    std::string source_doc_id;
    std::optional<std::string> title;
    word_span span;
    std::string text;

    friend bool operator==(const passage&, const passage&) = default;
};

/// Ordered passages plus a SHA-256 over their texts. Immutable once built.
class passage_set {
  public:
    passage_set() : passage_set(std::vector<passage>{}) {}
    /// Takes ownership; passage ids must be exactly 0..size-1.
    explicit passage_set(std::vector<passage> passages);

    const std::vector<passage>& passages() const noexcept { return m_passages; }
    const passage& operator[](std::size_t id) const { return m_passages.at(id); }
    std::size_t size() const noexcept { return m_passages.size(); }
    bool empty() const noexcept { return m_passages.empty(); }
    const std::string& fingerprint() const noexcept { return m_fingerprint; }

    friend bool operator==(const passage_set&, const passage_set&) = default;

  private:
    std::vector<passage> m_passages;
    std::string m_fingerprint;
};

inline constexpr std::size_t default_words_per_passage = 100;

/// Reads line-delimited JSON records {"id", "title"?, "text"}. Blank lines are skipped.
std::vector<document> ingest(const std::filesystem::path& path);
std::vector<document> parse_documents(std::istream& in);

passage_set chunk_documents(const std::vector<document>& docs,
                            std::size_t words_per_passage = default_words_per_passage);

struct exclusion_result {
    std::vector<document> kept;
    std::size_t removed_count = 0;
    std::vector<std::string> warnings;
};

/// Drops documents whose id, or normalized title, appears in `blocklist`.
/// Blocklist entries are normalized the same way before title comparison.
exclusion_result exclude_documents(const std::vector<document>& docs,
                                   const std::vector<std::string>& blocklist);

/// Case-folds and collapses whitespace runs to one space, trimming the ends.
std::string normalize_title(std::string_view title);

/// Reads a blocklist file: one key per line, blank lines ignored.
std::vector<std::string> read_blocklist(const std::filesystem::path& path);

std::string sha256_hex(std::string_view bytes);

void persist(const passage_set& set, const std::filesystem::path& path);
passage_set load_passages(const std::filesystem::path& path);

}  // namespace ralm
