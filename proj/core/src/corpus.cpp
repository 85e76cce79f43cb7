#include "ralm/corpus.hpp"

#include <fstream>
#include <sstream>
#include <unordered_map>

#include <json.hpp>
#include <openssl/evp.h>
#include <spdlog/spdlog.h>

#include "ralm/error.hpp"
#include "ralm/text.hpp"

namespace ralm {

using json = nlohmann::json;

namespace {

constexpr const char* passage_format = "ralm.passages";
constexpr int passage_format_version = 1;

std::string fingerprint_of(const std::vector<passage>& passages)
{
    // Length-prefixed so that moving bytes across a passage boundary changes the hash.
    std::string buf;
    for (const auto& p : passages) {
        buf += std::to_string(p.text.size());
        buf.push_back(':');
        buf += p.text;
    }
    return sha256_hex(buf);
}

}  // namespace

std::string sha256_hex(std::string_view bytes)
{
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw std::runtime_error("sha256 failed");
    }
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xF]);
    }
    return out;
}

passage_set::passage_set(std::vector<passage> passages) : m_passages(std::move(passages))
{
    for (std::size_t i = 0; i < m_passages.size(); ++i) {
        if (m_passages[i].passage_id != i) {
            throw data_error("passage ids must be 0..N-1 in order; found id "
                             + std::to_string(m_passages[i].passage_id) + " at position "
                             + std::to_string(i));
        }
    }
    m_fingerprint = fingerprint_of(m_passages);
}

std::vector<document> parse_documents(std::istream& in)
{
    std::vector<document> docs;
    std::unordered_map<std::string, std::size_t> seen;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) {
            continue;
        }
        auto where = [&] { return "line " + std::to_string(line_no) + ": "; };
        json rec;
        try {
            rec = json::parse(line);
        } catch (const json::parse_error& e) {
            throw data_error(where() + "malformed record: " + e.what());
        }
        if (!rec.is_object()) {
            throw data_error(where() + "record is not an object");
        }
        if (!rec.contains("id") || !rec["id"].is_string() || rec["id"].get<std::string>().empty()) {
            throw data_error(where() + "missing or empty string field 'id'");
        }
        if (!rec.contains("text") || !rec["text"].is_string()) {
            throw data_error(where() + "missing string field 'text'");
        }
        document doc;
        doc.doc_id = rec["id"].get<std::string>();
        doc.text = rec["text"].get<std::string>();
        if (rec.contains("title") && !rec["title"].is_null()) {
            if (!rec["title"].is_string()) {
                throw data_error(where() + "field 'title' must be a string");
            }
            doc.title = rec["title"].get<std::string>();
        }
        if (auto [it, inserted] = seen.emplace(doc.doc_id, line_no); !inserted) {
            throw data_error(where() + "duplicate doc_id '" + doc.doc_id + "' (first seen on line "
                             + std::to_string(it->second) + ")");
        }
        docs.push_back(std::move(doc));
    }
    return docs;
}

std::vector<document> ingest(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw data_error("cannot open corpus file " + path.string());
    }
    return parse_documents(in);
}

passage_set chunk_documents(const std::vector<document>& docs, std::size_t words_per_passage)
{
    if (words_per_passage == 0) {
        throw usage_error("words_per_passage must be >= 1");
    }
    std::vector<passage> out;
    for (const auto& doc : docs) {
        const auto words = split_whitespace(doc.text);
        for (std::size_t start = 0; start < words.size(); start += words_per_passage) {
            const std::size_t end = std::min(words.size(), start + words_per_passage);
            passage p;
            p.passage_id = out.size();
            p.source_doc_id = doc.doc_id;
            p.title = doc.title;
            p.span = {start, end};
            for (std::size_t w = start; w < end; ++w) {
                if (w > start) {
                    p.text.push_back(' ');
                }
                p.text.append(words[w]);
            }
            out.push_back(std::move(p));
        }
    }
    return passage_set(std::move(out));
}

std::string normalize_title(std::string_view title)
{
    std::string out;
    for (auto word : split_whitespace(title)) {
        if (!out.empty()) {
            out.push_back(' ');
        }
        out += ascii_lower(word);
    }
    return out;
}

exclusion_result exclude_documents(const std::vector<document>& docs,
                                   const std::vector<std::string>& blocklist)
{
    std::unordered_map<std::string, bool> by_id;
    std::unordered_map<std::string, bool> by_title;
    for (const auto& key : blocklist) {
        by_id.emplace(key, false);
        by_title.emplace(normalize_title(key), false);
    }

    exclusion_result result;
    for (const auto& doc : docs) {
        bool hit = false;
        if (auto it = by_id.find(doc.doc_id); it != by_id.end()) {
            it->second = true;
            hit = true;
        }
        if (doc.title) {
            if (auto it = by_title.find(normalize_title(*doc.title)); it != by_title.end()) {
                it->second = true;
                hit = true;
            }
        }
        if (hit) {
            ++result.removed_count;
        } else {
            result.kept.push_back(doc);
        }
    }

    for (const auto& key : blocklist) {
        if (!by_id.at(key) && !by_title.at(normalize_title(key))) {
            result.warnings.push_back("blocklist entry '" + key + "' matched no document");
        }
    }
    for (const auto& w : result.warnings) {
        spdlog::warn("{}", w);
    }
    return result;
}

std::vector<std::string> read_blocklist(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw data_error("cannot open blocklist " + path.string());
    }
    std::vector<std::string> keys;
    std::string line;
    while (std::getline(in, line)) {
        auto key = trim(line);
        if (!key.empty()) {
            keys.push_back(std::move(key));
        }
    }
    return keys;
}

// Store layout: a header line {"format","version","count","fingerprint"}
// followed by one JSON object per passage, one per line.
void persist(const passage_set& set, const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw data_error("cannot write passage store " + path.string());
    }
    json header = {{"format", passage_format},
                   {"version", passage_format_version},
                   {"count", set.size()},
                   {"fingerprint", set.fingerprint()}};
    out << header.dump() << '\n';
    for (const auto& p : set.passages()) {
        json rec = {{"id", p.passage_id},
                    {"doc", p.source_doc_id},
                    {"start", p.span.start},
                    {"end", p.span.end},
                    {"text", p.text}};
        if (p.title) {
            rec["title"] = *p.title;
        }
        out << rec.dump() << '\n';
    }
    if (!out) {
        throw data_error("failed writing passage store " + path.string());
    }
}

passage_set load_passages(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw data_error("cannot open passage store " + path.string());
    }
    auto corrupt = [&](const std::string& why) {
        return data_error("corrupt passage store " + path.string() + ": " + why);
    };
    std::string line;
    if (!std::getline(in, line)) {
        throw corrupt("missing header");
    }
    std::size_t count = 0;
    std::string fingerprint;
    try {
        auto header = json::parse(line);
        if (header.at("format") != passage_format) {
            throw corrupt("unexpected format tag");
        }
        if (header.at("version") != passage_format_version) {
            throw corrupt("unsupported version " + header.at("version").dump());
        }
        count = header.at("count").get<std::size_t>();
        fingerprint = header.at("fingerprint").get<std::string>();
    } catch (const json::exception& e) {
        throw corrupt(std::string("bad header: ") + e.what());
    }

    std::vector<passage> passages;
    passages.reserve(count);
    while (passages.size() < count && std::getline(in, line)) {
        try {
            auto rec = json::parse(line);
            passage p;
            p.passage_id = rec.at("id").get<std::size_t>();
            p.source_doc_id = rec.at("doc").get<std::string>();
            p.span = {rec.at("start").get<std::size_t>(), rec.at("end").get<std::size_t>()};
            p.text = rec.at("text").get<std::string>();
            if (rec.contains("title")) {
                p.title = rec["title"].get<std::string>();
            }
            passages.push_back(std::move(p));
        } catch (const json::exception& e) {
            throw corrupt("record " + std::to_string(passages.size()) + ": " + e.what());
        }
    }
    if (passages.size() != count) {
        throw corrupt("expected " + std::to_string(count) + " passages, found "
                      + std::to_string(passages.size()));
    }
    passage_set set = [&] {
        try {
            return passage_set(std::move(passages));
        } catch (const data_error& e) {
            throw corrupt(e.what());
        }
    }();
    if (set.fingerprint() != fingerprint) {
        throw corrupt("fingerprint mismatch");
    }
    return set;
}

}  // namespace ralm
