#include "ralm/bm25.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <unordered_map>
#include <unordered_set>

#include "ralm/error.hpp"

namespace ralm {

namespace {

bool is_term_byte(unsigned char c)
{
    return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c >= 0x80;
}

constexpr std::uint32_t flag_stopwords = 1u << 0;
constexpr std::uint32_t flag_stem = 1u << 1;

constexpr std::array<char, 8> index_magic = {'R', 'A', 'L', 'M', 'B', 'M', '2', '5'};
constexpr std::uint32_t index_version = 1;

// Little-endian host assumed; the header magic catches foreign files.
class writer {
  public:
    explicit writer(std::ofstream& out) : m_out(out) {}
    template <typename T>
    void pod(const T& v)
    {
        m_out.write(reinterpret_cast<const char*>(&v), sizeof(T));
    }
    void bytes(std::string_view s)
    {
        pod(static_cast<std::uint32_t>(s.size()));
        m_out.write(s.data(), static_cast<std::streamsize>(s.size()));
    }

  private:
    std::ofstream& m_out;
};

class reader {
  public:
    reader(std::string data, std::string source) : m_data(std::move(data)), m_source(std::move(source)) {}

    template <typename T>
    T pod()
    {
        need(sizeof(T));
        T v;
        std::memcpy(&v, m_data.data() + m_pos, sizeof(T));
        m_pos += sizeof(T);
        return v;
    }
    std::string bytes()
    {
        auto len = pod<std::uint32_t>();
        need(len);
        std::string s = m_data.substr(m_pos, len);
        m_pos += len;
        return s;
    }
    bool at_end() const { return m_pos == m_data.size(); }
    data_error corrupt(const std::string& why) const
    {
        return data_error("corrupt index " + m_source + ": " + why);
    }

  private:
    void need(std::size_t n) const
    {
        if (m_data.size() - m_pos < n) {
            throw corrupt("unexpected end of file at byte " + std::to_string(m_pos));
        }
    }

    std::string m_data;
    std::string m_source;
    std::size_t m_pos = 0;
};

}  // namespace

std::uint32_t analyzer_options::flags() const noexcept
{
    return (remove_stopwords ? flag_stopwords : 0u) | (stem ? flag_stem : 0u);
}

analyzer_options analyzer_options::from_flags(std::uint32_t flags)
{
    if ((flags & ~(flag_stopwords | flag_stem)) != 0) {
        throw data_error("unknown analyzer flags " + std::to_string(flags));
    }
    return {(flags & flag_stopwords) != 0, (flags & flag_stem) != 0};
}

bool is_stopword(std::string_view word)
{
    static const std::unordered_set<std::string_view> words = {
        "a",    "an",   "and",  "are",   "as",   "at",   "be",    "but",  "by",   "for",
        "if",   "in",   "into", "is",    "it",   "no",   "not",   "of",   "on",   "or",
        "such", "that", "the",  "their", "then", "there", "these", "they", "this", "to",
        "was",  "will", "with",
    };
    return words.contains(word);
}

std::string s_stem(std::string_view w)
{
    auto ends = [&](std::string_view suf) {
        return w.size() >= suf.size() && w.substr(w.size() - suf.size()) == suf;
    };
    if (ends("ies") && !ends("eies") && !ends("aies")) {
        return std::string(w.substr(0, w.size() - 3)) + "y";
    }
    if (ends("es") && !ends("aes") && !ends("ees") && !ends("oes")) {
        return std::string(w.substr(0, w.size() - 1));
    }
    if (ends("s") && !ends("us") && !ends("ss")) {
        return std::string(w.substr(0, w.size() - 1));
    }
    return std::string(w);
}

std::vector<std::string> analyze(std::string_view text, const analyzer_options& opts)
{
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && !is_term_byte(static_cast<unsigned char>(text[i]))) {
            ++i;
        }
        std::string term;
        while (i < text.size() && is_term_byte(static_cast<unsigned char>(text[i]))) {
            char c = text[i++];
            term.push_back((c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c);
        }
        if (term.empty()) {
            continue;
        }
        if (opts.remove_stopwords && is_stopword(term)) {
            continue;
        }
        if (opts.stem) {
            term = s_stem(term);
        }
        out.push_back(std::move(term));
    }
    return out;
}

double bm25_idf(std::size_t num_passages, std::size_t doc_freq)
{
    const double n = static_cast<double>(num_passages);
    const double df = static_cast<double>(doc_freq);
    return std::log(1.0 + (n - df + 0.5) / (df + 0.5));
}

inverted_index inverted_index::build(const passage_set& passages, bm25_params params,
                                     analyzer_options analyzer)
{
    if (!(params.k1 >= 0.0)) {
        throw usage_error("BM25 k1 must be >= 0");
    }
    if (!(params.b >= 0.0 && params.b <= 1.0)) {
        throw usage_error("BM25 b must lie in [0, 1]");
    }
    inverted_index ix;
    ix.m_params = params;
    ix.m_analyzer = analyzer;
    ix.m_fingerprint = passages.fingerprint();
    ix.m_doc_len.reserve(passages.size());

    std::uint64_t total = 0;
    for (const auto& p : passages.passages()) {
        auto terms = analyze(p.text, analyzer);
        std::unordered_map<std::string, std::uint32_t> tf;
        for (auto& t : terms) {
            ++tf[std::move(t)];
        }
        for (auto& [term, count] : tf) {
            // passages are visited in id order, so each list stays sorted
            ix.m_postings[term].push_back({static_cast<std::uint32_t>(p.passage_id), count});
        }
        ix.m_doc_len.push_back(static_cast<std::uint32_t>(terms.size()));
        total += terms.size();
    }
    if (!ix.m_doc_len.empty()) {
        ix.m_avgdl = static_cast<double>(total) / static_cast<double>(ix.m_doc_len.size());
    }
    return ix;
}

std::vector<query_result> inverted_index::search(std::string_view query_text, std::size_t k) const
{
    if (k == 0 || m_doc_len.empty()) {
        return {};
    }
    const auto terms = analyze(query_text, m_analyzer);
    const std::size_t n = m_doc_len.size();
    std::vector<double> acc(n, 0.0);
    std::vector<std::uint32_t> touched;

    // term-at-a-time, exhaustive
    for (const auto& term : terms) {
        auto it = m_postings.find(term);
        if (it == m_postings.end()) {
            continue;
        }
        const auto& list = it->second;
        const double idf = bm25_idf(n, list.size());
        for (const auto& p : list) {
            const double tf = p.tf;
            const double norm = 1.0 - m_params.b + m_params.b * m_doc_len[p.passage_id] / m_avgdl;
            const double contribution = idf * tf * (m_params.k1 + 1.0) / (tf + m_params.k1 * norm);
            if (acc[p.passage_id] == 0.0) {
                touched.push_back(p.passage_id);
            }
            acc[p.passage_id] += contribution;
        }
    }

    std::vector<query_result> results;
    results.reserve(touched.size());
    for (auto id : touched) {
        if (acc[id] > 0.0) {
            results.push_back({id, acc[id]});
        }
    }
    auto better = [](const query_result& a, const query_result& b) {
        return a.score != b.score ? a.score > b.score : a.passage_id < b.passage_id;
    };
    const std::size_t keep = std::min(k, results.size());
    std::partial_sort(results.begin(), results.begin() + static_cast<std::ptrdiff_t>(keep),
                      results.end(), better);
    results.resize(keep);
    return results;
}

// Layout: magic[8] | u32 version | u64 N | f64 avgdl | f64 k1 | f64 b |
// u32 analyzer flags | str fingerprint | u32 doc_len[N] | u64 term count |
// { str term | u64 postings offset | u64 postings count }* |
// u64 total postings | { u32 passage_id | u32 tf }*
// where str = u32 length + bytes.
void inverted_index::save(const std::filesystem::path& path) const
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw data_error("cannot write index " + path.string());
    }
    writer w(out);
    out.write(index_magic.data(), index_magic.size());
    w.pod(index_version);
    w.pod(static_cast<std::uint64_t>(m_doc_len.size()));
    w.pod(m_avgdl);
    w.pod(m_params.k1);
    w.pod(m_params.b);
    w.pod(m_analyzer.flags());
    w.bytes(m_fingerprint);
    for (auto len : m_doc_len) {
        w.pod(len);
    }
    w.pod(static_cast<std::uint64_t>(m_postings.size()));
    std::uint64_t offset = 0;
    for (const auto& [term, list] : m_postings) {
        w.bytes(term);
        w.pod(offset);
        w.pod(static_cast<std::uint64_t>(list.size()));
        offset += list.size();
    }
    w.pod(offset);
    for (const auto& [term, list] : m_postings) {
        for (const auto& p : list) {
            w.pod(p.passage_id);
            w.pod(p.tf);
        }
    }
    if (!out) {
        throw data_error("failed writing index " + path.string());
    }
}

inverted_index inverted_index::load(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw data_error("cannot open index " + path.string());
    }
    std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    reader r(std::move(data), path.string());

    std::array<char, 8> magic{};
    for (auto& c : magic) {
        c = r.pod<char>();
    }
    if (magic != index_magic) {
        throw r.corrupt("bad magic");
    }
    if (auto v = r.pod<std::uint32_t>(); v != index_version) {
        throw r.corrupt("unsupported version " + std::to_string(v));
    }
    inverted_index ix;
    const auto n = r.pod<std::uint64_t>();
    ix.m_avgdl = r.pod<double>();
    ix.m_params.k1 = r.pod<double>();
    ix.m_params.b = r.pod<double>();
    try {
        ix.m_analyzer = analyzer_options::from_flags(r.pod<std::uint32_t>());
    } catch (const data_error& e) {
        throw r.corrupt(e.what());
    }
    ix.m_fingerprint = r.bytes();
    ix.m_doc_len.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) {
        ix.m_doc_len.push_back(r.pod<std::uint32_t>());
    }

    struct entry {
        std::string term;
        std::uint64_t offset;
        std::uint64_t count;
    };
    std::vector<entry> dict;
    const auto term_count = r.pod<std::uint64_t>();
    std::uint64_t expected_offset = 0;
    for (std::uint64_t i = 0; i < term_count; ++i) {
        entry e{r.bytes(), r.pod<std::uint64_t>(), r.pod<std::uint64_t>()};
        if (e.offset != expected_offset || (!dict.empty() && !(dict.back().term < e.term))) {
            throw r.corrupt("term dictionary out of order");
        }
        expected_offset += e.count;
        dict.push_back(std::move(e));
    }
    if (r.pod<std::uint64_t>() != expected_offset) {
        throw r.corrupt("postings count mismatch");
    }
    for (auto& e : dict) {
        std::vector<posting> list;
        list.reserve(e.count);
        for (std::uint64_t i = 0; i < e.count; ++i) {
            posting p{r.pod<std::uint32_t>(), r.pod<std::uint32_t>()};
            if (p.passage_id >= n || (!list.empty() && list.back().passage_id >= p.passage_id)) {
                throw r.corrupt("postings for '" + e.term + "' out of range or unsorted");
            }
            list.push_back(p);
        }
        ix.m_postings.emplace_hint(ix.m_postings.end(), std::move(e.term), std::move(list));
    }
    if (!r.at_end()) {
        throw r.corrupt("trailing bytes");
    }
    return ix;
}

}  // namespace ralm
