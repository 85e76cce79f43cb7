#pragma once

// Deterministic topic-structured text generator for engine tests.
//
// A fixed pseudo-word vocabulary is split into common words (Zipf-weighted)
// and topic clusters. Each document picks one topic and draws every word
// either from the common pool or from its topic cluster. Evaluation texts
// are shuffled concatenations of whole corpus passages, so the passage a
// text is currently drawn from is always retrievable.

#include <algorithm>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "ralm/corpus.hpp"

namespace ralm::testing {

struct synthetic_params {
    std::size_t vocab_size = 1500;
    std::size_t common_words = 60;
    std::size_t topics = 40;
    std::size_t words_per_topic = 25;
    double topic_prob = 0.65;
    std::size_t corpus_docs = 80;
    std::size_t words_per_doc = 300;
    std::size_t lm_training_words = 30000;
    std::size_t eval_texts = 2;
    std::size_t passages_per_eval_text = 6;
};

struct synthetic_suite {
    std::string lm_training_text;
    std::vector<document> corpus;
    passage_set passages;
    std::vector<std::string> eval_texts;
};

class synthetic_generator {
  public:
    synthetic_generator(std::uint64_t seed, synthetic_params params = {}) : m_rng(seed), m_params(params)
    {
        std::uniform_int_distribution<int> letter(0, 25);
        std::uniform_int_distribution<int> length(3, 8);
        std::vector<std::string> words;
        while (words.size() < params.vocab_size) {
            std::string w;
            const int len = length(m_rng);
            for (int i = 0; i < len; ++i) {
                w.push_back(static_cast<char>('a' + letter(m_rng)));
            }
            if (std::find(words.begin(), words.end(), w) == words.end()) {
                words.push_back(std::move(w));
            }
        }
        m_common.assign(words.begin(), words.begin() + static_cast<std::ptrdiff_t>(params.common_words));
        std::vector<std::string> rest(words.begin() + static_cast<std::ptrdiff_t>(params.common_words), words.end());
        for (std::size_t t = 0; t < params.topics; ++t) {
            std::shuffle(rest.begin(), rest.end(), m_rng);
            m_topics.emplace_back(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(params.words_per_topic));
        }
        std::vector<double> zipf;
        for (std::size_t r = 1; r <= params.common_words; ++r) {
            zipf.push_back(1.0 / static_cast<double>(r));
        }
        m_common_dist = std::discrete_distribution<std::size_t>(zipf.begin(), zipf.end());
    }

    std::string document_text(std::size_t topic, std::size_t words)
    {
        std::bernoulli_distribution from_topic(m_params.topic_prob);
        std::uniform_int_distribution<std::size_t> topic_word(0, m_params.words_per_topic - 1);
        std::string out;
        for (std::size_t i = 0; i < words; ++i) {
            if (i > 0) {
                out.push_back(' ');
            }
            out += from_topic(m_rng) ? m_topics[topic][topic_word(m_rng)] : m_common[m_common_dist(m_rng)];
        }
        return out;
    }

    std::size_t random_topic()
    {
        return std::uniform_int_distribution<std::size_t>(0, m_params.topics - 1)(m_rng);
    }

    synthetic_suite make_suite()
    {
        synthetic_suite s;
        for (std::size_t produced = 0; produced < m_params.lm_training_words; produced += 200) {
            if (!s.lm_training_text.empty()) {
                s.lm_training_text.push_back('\n');
            }
            s.lm_training_text += document_text(random_topic(), 200);
        }
        for (std::size_t d = 0; d < m_params.corpus_docs; ++d) {
            s.corpus.push_back({"doc" + std::to_string(d), "Topic article " + std::to_string(d),
                                document_text(random_topic(), m_params.words_per_doc)});
        }
        s.passages = chunk_documents(s.corpus);
        std::uniform_int_distribution<std::size_t> pick(0, s.passages.size() - 1);
        for (std::size_t e = 0; e < m_params.eval_texts; ++e) {
            std::vector<std::size_t> ids;
            while (ids.size() < m_params.passages_per_eval_text) {
                auto id = pick(m_rng);
                if (std::find(ids.begin(), ids.end(), id) == ids.end()) {
                    ids.push_back(id);
                }
            }
            std::string text;
            for (auto id : ids) {
                if (!text.empty()) {
                    text.push_back(' ');
                }
                text += s.passages[id].text;
            }
            s.eval_texts.push_back(std::move(text));
        }
        return s;
    }

    std::mt19937_64& rng() { return m_rng; }

  private:
    std::mt19937_64 m_rng;
    synthetic_params m_params;
    std::vector<std::string> m_common;
    std::vector<std::vector<std::string>> m_topics;
    std::discrete_distribution<std::size_t> m_common_dist;
};

inline synthetic_suite make_synthetic_suite(std::uint64_t seed, synthetic_params params = {})
{
    return synthetic_generator(seed, params).make_suite();
}

}  // namespace ralm::testing
