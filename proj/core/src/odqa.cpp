#include "ralm/odqa.hpp"

#include <fstream>

#include "ralm/error.hpp"
#include "ralm/text.hpp"

namespace ralm {

using json = nlohmann::json;

namespace {

std::string checked_question(std::string_view question)
{
    auto q = trim(question);
    if (q.empty()) {
        throw usage_error("question must be nonempty");
    }
    return q;
}

bool is_punct(unsigned char c)
{
    return (c >= 33 && c <= 47) || (c >= 58 && c <= 64) || (c >= 91 && c <= 96) || (c >= 123 && c <= 126);
}

}  // namespace

std::string build_closed_book_prompt(std::string_view question)
{
    return "Answer these questions:\nQ: " + checked_question(question) + "\nA:";
}

std::string build_open_book_prompt(std::span<const titled_passage> passages, std::string_view question)
{
    if (passages.empty()) {
        throw usage_error("open-book prompt needs at least one passage; use the closed-book prompt instead");
    }
    const auto q = checked_question(question);
    std::string out;
    for (const auto& p : passages) {
        out += p.title;
        out += "\n\n";
        out += p.text;
        out += "\n\n";
    }
    out += "Based on these texts, answer these questions:\nQ: " + q + "\nA:";
    return out;
}

std::string normalize_answer(std::string_view text)
{
    std::string cleaned;
    cleaned.reserve(text.size());
    for (char c : ascii_lower(text)) {
        if (!is_punct(static_cast<unsigned char>(c))) {
            cleaned.push_back(c);
        }
    }
    std::string out;
    for (auto word : split_whitespace(cleaned)) {
        if (word == "a" || word == "an" || word == "the") {
            continue;
        }
        if (!out.empty()) {
            out.push_back(' ');
        }
        out += word;
    }
    return out;
}

int exact_match(std::string_view prediction, std::span<const std::string> gold_answers)
{
    const auto pred = normalize_answer(prediction);
    for (const auto& gold : gold_answers) {
        if (normalize_answer(gold) == pred) {
            return 1;
        }
    }
    return 0;
}

std::vector<qa_item> load_questions(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw data_error("cannot open questions file " + path.string());
    }
    std::vector<qa_item> items;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) {
            continue;
        }
        try {
            const auto j = json::parse(line);
            qa_item item{j.at("question").get<std::string>(), j.at("answers").get<std::vector<std::string>>()};
            if (trim(item.question).empty() || item.gold_answers.empty()) {
                throw data_error("line " + std::to_string(line_no) + ": empty question or answer list");
            }
            items.push_back(std::move(item));
        } catch (const json::exception& e) {
            throw data_error("line " + std::to_string(line_no) + ": malformed question record: " + e.what());
        }
    }
    return items;
}

json qa_report::to_json() const
{
    json rows = json::array();
    for (const auto& r : results) {
        json row = {{"question", r.item.question},
                    {"answers", r.item.gold_answers},
                    {"prompt", r.prompt},
                    {"prediction", r.prediction},
                    {"exact_match", r.exact_match},
                    {"passages_used", r.passages_used}};
        if (r.error) {
            row["error"] = *r.error;
        }
        rows.push_back(std::move(row));
    }
    return {{"exact_match", exact_match}, {"count", results.size()}, {"results", std::move(rows)}};
}

qa_report evaluate_qa(std::span<const qa_item> items, const lm_backend& backend, const qa_options& options,
                      const inverted_index* index, const passage_set* passages)
{
    if (options.use_retrieval) {
        if (index == nullptr || passages == nullptr) {
            throw usage_error("open-book QA needs an index and its passages");
        }
        if (options.num_docs == 0) {
            throw usage_error("open-book QA needs num_docs >= 1");
        }
    }
    qa_report report;
    std::size_t hits = 0;
    for (const auto& item : items) {
        qa_result r;
        r.item = item;
        std::vector<titled_passage> blocks;
        if (options.use_retrieval) {
            for (const auto& hit : index->search(item.question, options.num_docs)) {
                const auto& p = (*passages)[hit.passage_id];
                r.passages_used.push_back(p.passage_id);
                blocks.push_back({p.title.value_or(p.source_doc_id),
                                  trim(truncate_to_tokens(p.text, options.max_passage_tokens))});
            }
        }
        // nothing retrieved falls back to the closed-book format
        r.prompt = blocks.empty() ? build_closed_book_prompt(item.question)
                                  : build_open_book_prompt(blocks, item.question);
        try {
            r.prediction = trim(backend.generate_greedy(r.prompt, options.max_new_tokens, "\n"));
            r.exact_match = exact_match(r.prediction, r.item.gold_answers);
        } catch (const error& e) {
            r.error = e.what();
            r.exact_match = 0;
        }
        hits += static_cast<std::size_t>(r.exact_match);
        report.results.push_back(std::move(r));
    }
    if (!report.results.empty()) {
        report.exact_match = 100.0 * static_cast<double>(hits) / static_cast<double>(report.results.size());
    }
    return report;
}

}  // namespace ralm
