#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ralm/bm25.hpp"
#include "ralm/corpus.hpp"
#include "ralm/lm.hpp"

namespace ralm {

struct qa_item {
    std::string question;
    std::vector<std::string> gold_answers;
};

struct qa_result {
    qa_item item;
    std::string prompt;
    std::string prediction;
    int exact_match = 0;
    std::vector<std::size_t> passages_used;
    std::optional<std::string> error;
};

struct qa_report {
    double exact_match = 0.0;  // percent
    std::vector<qa_result> results;

    nlohmann::json to_json() const;
};

struct titled_passage {
    std::string title;
    std::string text;
};

/// "Answer these questions:\nQ: {question}\nA:" with the question trimmed.
std::string build_closed_book_prompt(std::string_view question);

/// "{title}\n\n{text}\n\n" per passage, then
/// "Based on these texts, answer these questions:\nQ: {question}\nA:".
std::string build_open_book_prompt(std::span<const titled_passage> passages, std::string_view question);

/// Lower-case, strip punctuation, drop the articles a/an/the, collapse spaces.
std::string normalize_answer(std::string_view text);
int exact_match(std::string_view prediction, std::span<const std::string> gold_answers);

/// Line-delimited {"question": str, "answers": [str, ...]}.
std::vector<qa_item> load_questions(const std::filesystem::path& path);

struct qa_options {
    bool use_retrieval = false;
    std::size_t num_docs = 2;
    std::size_t max_new_tokens = 32;
    std::size_t max_passage_tokens = 256;
};

/// Closed-book, or open-book with the top `num_docs` BM25 passages for the
/// raw question. Answers are generated greedily up to the first newline.
/// A failed generation scores 0 and is annotated; the run continues.
qa_report evaluate_qa(std::span<const qa_item> items, const lm_backend& backend, const qa_options& options,
                      const inverted_index* index = nullptr, const passage_set* passages = nullptr);

}  // namespace ralm
