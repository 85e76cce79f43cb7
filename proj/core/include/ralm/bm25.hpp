#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ralm/corpus.hpp"

namespace ralm {

/// Retrieval-side analyzer switches. Both are off by default.
struct analyzer_options {
    bool remove_stopwords = false;
    bool stem = false;  // Harman's S-stemmer (plural stripping)

    std::uint32_t flags() const noexcept;
    static analyzer_options from_flags(std::uint32_t flags);
    friend bool operator==(const analyzer_options&, const analyzer_options&) = default;
};

/// Case-folded maximal alphanumeric runs, in order.
std::vector<std::string> analyze(std::string_view text, const analyzer_options& opts = {});

std::string s_stem(std::string_view word);
bool is_stopword(std::string_view word);

struct bm25_params {
    double k1 = 0.9;
    double b = 0.4;
    friend bool operator==(const bm25_params&, const bm25_params&) = default;
};

/// ln(1 + (N - n_t + 0.5) / (n_t + 0.5)); nonnegative for 0 <= n_t <= N.
double bm25_idf(std::size_t num_passages, std::size_t doc_freq);

struct posting {
    std::uint32_t passage_id = 0;
    std::uint32_t tf = 0;
    friend bool operator==(const posting&, const posting&) = default;
};

struct query_result {
    std::size_t passage_id = 0;
    double score = 0.0;
    friend bool operator==(const query_result&, const query_result&) = default;
};

/// Immutable BM25 index over a passage set. Concurrent searches are safe.
class inverted_index {
  public:
    inverted_index() = default;

    static inverted_index build(const passage_set& passages, bm25_params params = {},
                                analyzer_options analyzer = {});

    /// Top-k passages with score > 0, by descending score then ascending id.
    /// Each query-term occurrence contributes separately.
    std::vector<query_result> search(std::string_view query_text, std::size_t k) const;

    std::size_t size() const noexcept { return m_doc_len.size(); }
    double avgdl() const noexcept { return m_avgdl; }
    const bm25_params& params() const noexcept { return m_params; }
    const analyzer_options& analyzer() const noexcept { return m_analyzer; }
    std::span<const std::uint32_t> doc_lengths() const noexcept { return m_doc_len; }
    const std::map<std::string, std::vector<posting>, std::less<>>& postings() const noexcept
    {
        return m_postings;
    }
    /// SHA-256 of the passage set the index was built from.
    const std::string& corpus_fingerprint() const noexcept { return m_fingerprint; }

    void save(const std::filesystem::path& path) const;
    static inverted_index load(const std::filesystem::path& path);

    friend bool operator==(const inverted_index&, const inverted_index&) = default;

  private:
    bm25_params m_params;
    analyzer_options m_analyzer;
    double m_avgdl = 0.0;
    std::vector<std::uint32_t> m_doc_len;
    std::map<std::string, std::vector<posting>, std::less<>> m_postings;
    std::string m_fingerprint;
};

}  // namespace ralm
