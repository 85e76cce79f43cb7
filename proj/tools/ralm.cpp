// ralm: command-line driver for ingestion, indexing, retrieval-augmented
// perplexity evaluation, sweeps, reranker training and ODQA.
//
// Exit codes: 0 success, 2 usage error, 3 data/fingerprint error, 4 backend error.
// Failures print one JSON line {"error":{"kind","message"}} on stderr.

#include <chrono>
#include <ctime>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <httplib.h>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "ralm/bm25.hpp"
#include "ralm/cache_ngram_lm.hpp"
#include "ralm/corpus.hpp"
#include "ralm/engine.hpp"
#include "ralm/error.hpp"
#include "ralm/odqa.hpp"
#include "ralm/protocol.hpp"
#include "ralm/rerank.hpp"

namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

int exit_code(ralm::error_kind kind)
{
    switch (kind) {
    case ralm::error_kind::usage: return 2;
    case ralm::error_kind::data: return 3;
    case ralm::error_kind::backend: return 4;
    }
    return 1;
}

int fail(ralm::error_kind kind, const std::string& message)
{
    std::cerr << json{{"error", {{"kind", ralm::to_string(kind)}, {"message", message}}}}.dump() << '\n';
    return exit_code(kind);
}

std::string utc_timestamp()
{
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string read_file(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ralm::data_error("cannot open " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Training/evaluation text: raw text, or document texts joined by blank
/// lines when the file has a .jsonl extension.
std::string read_text_or_corpus(const fs::path& path)
{
    if (path.extension() != ".jsonl") {
        return read_file(path);
    }
    std::string out;
    for (const auto& doc : ralm::ingest(path)) {
        if (!out.empty()) {
            out += "\n\n";
        }
        out += doc.text;
    }
    return out;
}

void write_file(const fs::path& path, const std::string& content)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw ralm::data_error("cannot write " + path.string());
    }
    out << content;
}

json manifest(const std::string& command, json config)
{
    return {{"command", command},
            {"config", std::move(config)},
            {"tool_version", RALM_VERSION},
            {"timestamp", utc_timestamp()}};
}

void emit(const std::string& report_path, const json& doc)
{
    const auto text = doc.dump(2) + "\n";
    if (report_path.empty() || report_path == "-") {
        std::cout << text;
    } else {
        write_file(report_path, text);
    }
}

json backend_json(const ralm::lm_backend& backend, const std::string& spec)
{
    const auto info = backend.info();
    return {{"spec", spec}, {"name", info.name}, {"max_context_tokens", info.max_context_tokens}};
}

/// Passages + index pair, or an empty pair when retrieval is off.
struct retrieval_data {
    ralm::passage_set passages;
    ralm::inverted_index index;
    std::string index_sha256;
};

retrieval_data load_retrieval(const std::string& index_path, const std::string& passages_path)
{
    retrieval_data d;
    if (index_path.empty() && passages_path.empty()) {
        d.index = ralm::inverted_index::build(d.passages);
        return d;
    }
    if (index_path.empty() || passages_path.empty()) {
        throw ralm::usage_error("--index and --passages must be given together");
    }
    d.passages = ralm::load_passages(passages_path);
    d.index = ralm::inverted_index::load(index_path);
    if (d.index.corpus_fingerprint() != d.passages.fingerprint()) {
        throw ralm::data_error("fingerprint mismatch: index " + index_path + " was built from "
                               + d.index.corpus_fingerprint() + ", passages " + passages_path + " are "
                               + d.passages.fingerprint());
    }
    d.index_sha256 = ralm::sha256_hex(read_file(index_path));
    return d;
}

/// Flags shared by eval-ppl, sweep and rerank-collect.
struct engine_flags {
    std::string text;
    std::string index;
    std::string passages;
    std::string backend;
    std::size_t stride = 4;
    std::size_t query_len = 32;
    std::size_t top_k = 16;
    std::string rerank = "none";
    std::string rerank_backend;
    std::size_t rerank_window = 16;
    std::string rerank_model;
    std::size_t max_passage_tokens = 256;
    bool no_retrieval = false;
    std::string report;
    bool with_strides = false;

    void add_to(CLI::App& cmd, bool rerank_options)
    {
        cmd.add_option("--index", index, "BM25 index file")->check(CLI::ExistingFile);
        cmd.add_option("--passages", passages, "passage store the index was built from")->check(CLI::ExistingFile);
        cmd.add_option("--backend", backend, "builtin:PATH or http:URL")->required();
        cmd.add_option("--stride", stride, "retrieval stride s")->capture_default_str();
        cmd.add_option("--query-len", query_len, "retrieval query length")->capture_default_str();
        cmd.add_option("--topk", top_k, "retrieved candidates per stride")->capture_default_str();
        cmd.add_option("--max-passage-tokens", max_passage_tokens, "passage truncation")->capture_default_str();
        if (rerank_options) {
            cmd.add_option("--rerank", rerank, "none|zero-shot|predictive|oracle")
                ->check(CLI::IsMember({"none", "zero-shot", "predictive", "oracle"}))
                ->capture_default_str();
            cmd.add_option("--rerank-backend", rerank_backend, "backend for zero-shot reranking");
            cmd.add_option("--rerank-window", rerank_window, "zero-shot rerank window")->capture_default_str();
            cmd.add_option("--rerank-model", rerank_model, "trained predictive reranker")->check(CLI::ExistingFile);
            cmd.add_flag("--no-retrieval", no_retrieval, "score without retrieved passages");
        }
    }

    ralm::ralm_config config() const
    {
        ralm::ralm_config cfg;
        cfg.stride = stride;
        cfg.query_len = query_len;
        cfg.top_k = top_k;
        cfg.rerank = ralm::parse_rerank_mode(rerank);
        cfg.rerank_window = rerank_window;
        cfg.max_passage_tokens = max_passage_tokens;
        cfg.retrieval_enabled = !no_retrieval;
        cfg.validate();
        return cfg;
    }

    void check_combinations() const
    {
        if (rerank == "predictive" && rerank_model.empty()) {
            throw ralm::usage_error("--rerank predictive requires --rerank-model");
        }
        if (!rerank_backend.empty() && rerank != "zero-shot") {
            throw ralm::usage_error("--rerank-backend only applies to --rerank zero-shot");
        }
        if (!no_retrieval && (index.empty() || passages.empty())) {
            throw ralm::usage_error("retrieval needs --index and --passages (or pass --no-retrieval)");
        }
    }
};

/// Everything an engine run needs, kept alive together.
struct engine_session {
    retrieval_data data;
    std::unique_ptr<ralm::lm_backend> generator;
    std::unique_ptr<ralm::lm_backend> rerank_backend;
    std::optional<ralm::predictive_reranker> model;
    std::unique_ptr<ralm::ralm_engine> engine;
    json manifest_config;

    explicit engine_session(const engine_flags& f)
    {
        f.check_combinations();
        const auto cfg = f.config();
        if (f.no_retrieval) {
            data = load_retrieval("", "");
        } else {
            data = load_retrieval(f.index, f.passages);
        }
        generator = ralm::open_backend(f.backend);
        engine = std::make_unique<ralm::ralm_engine>(data.index, data.passages, *generator, cfg);
        if (!f.rerank_backend.empty()) {
            rerank_backend = ralm::open_backend(f.rerank_backend);
            engine->set_rerank_backend(*rerank_backend);
        }
        if (!f.rerank_model.empty()) {
            model = ralm::predictive_reranker::load(f.rerank_model);
            engine->set_predictive_model(*model);
        }
        manifest_config = cfg.to_json();
        manifest_config["backend"] = backend_json(*generator, f.backend);
        if (rerank_backend) {
            manifest_config["rerank_backend"] = backend_json(*rerank_backend, f.rerank_backend);
        }
        if (model) {
            manifest_config["rerank_model"] = {{"path", f.rerank_model}, {"feature_spec", model->feature_spec}};
        }
        manifest_config["passages_fingerprint"] = data.passages.fingerprint();
        manifest_config["index_sha256"] = data.index_sha256;
    }
};

std::vector<std::size_t> parse_values(const std::string& csv)
{
    std::vector<std::size_t> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = ralm::trim(item);
        if (item.empty()) {
            continue;
        }
        std::size_t pos = 0;
        unsigned long long v = 0;
        try {
            v = std::stoull(item, &pos);
        } catch (const std::exception&) {
            pos = 0;
        }
        if (pos != item.size() || v == 0) {
            throw ralm::usage_error("--values must be a comma-separated list of positive integers, got '" + csv + "'");
        }
        out.push_back(static_cast<std::size_t>(v));
    }
    if (out.empty()) {
        throw ralm::usage_error("--values is empty");
    }
    return out;
}

/// Runs the protocol conformance suite; builtin backends are served on a
/// loopback port for the duration of the check.
json check_backend(const std::string& spec)
{
    std::vector<ralm::conformance_check> checks;
    if (spec.rfind("builtin:", 0) == 0) {
        auto backend = ralm::open_backend(spec);
        httplib::Server server;
        ralm::mount_protocol(server, *backend);
        const int port = server.bind_to_any_port("127.0.0.1");
        std::thread thread([&] { server.listen_after_bind(); });
        server.wait_until_ready();
        checks = ralm::run_protocol_conformance("http://127.0.0.1:" + std::to_string(port));
        server.stop();
        thread.join();
    } else if (spec.rfind("http:", 0) == 0) {
        auto rest = spec.substr(5);
        checks = ralm::run_protocol_conformance(rest.rfind("//", 0) == 0 ? "http:" + rest : rest);
    } else {
        throw ralm::usage_error("backend must be builtin:PATH or http:URL");
    }
    json rows = json::array();
    bool all = true;
    for (const auto& c : checks) {
        rows.push_back({{"check", c.name}, {"passed", c.passed}, {"detail", c.detail}});
        all = all && c.passed;
    }
    return {{"passed", all}, {"checks", rows}};
}

}  // namespace

int main(int argc, char** argv)
{
    spdlog::set_default_logger(spdlog::stderr_color_st("ralm"));
    spdlog::set_pattern("%l: %v");

    CLI::App app{"In-context retrieval-augmented language modeling toolkit"};
    app.set_version_flag("--version", std::string(RALM_VERSION));
    app.set_config("--config", "", "TOML/INI file with the same keys as the flags; flags take precedence");
    app.require_subcommand(1);
    app.fallthrough();
    bool verbose = false;
    app.add_flag("-v,--verbose", verbose, "debug logging");

    // ingest
    auto* ingest = app.add_subcommand("ingest", "chunk a JSONL corpus into 100-word passages");
    std::string ingest_corpus, ingest_out, ingest_exclude;
    std::size_t words_per_passage = ralm::default_words_per_passage;
    ingest->add_option("--corpus", ingest_corpus, "JSONL corpus {id, title?, text}")->required()->check(CLI::ExistingFile);
    ingest->add_option("--out", ingest_out, "passage store to write")->required();
    ingest->add_option("--exclude", ingest_exclude, "blocklist of titles or ids, one per line")->check(CLI::ExistingFile);
    ingest->add_option("--words-per-passage", words_per_passage)->capture_default_str();

    // index
    auto* index = app.add_subcommand("index", "build a BM25 index over a passage store");
    std::string index_passages, index_out;
    ralm::bm25_params bm25;
    ralm::analyzer_options analyzer;
    index->add_option("--passages", index_passages)->required()->check(CLI::ExistingFile);
    index->add_option("--out", index_out)->required();
    index->add_option("--k1", bm25.k1)->capture_default_str();
    index->add_option("--b", bm25.b)->capture_default_str();
    index->add_flag("--stopwords", analyzer.remove_stopwords, "drop English stopwords");
    index->add_flag("--stem", analyzer.stem, "apply the S-stemmer");

    // search
    auto* search = app.add_subcommand("search", "query a BM25 index");
    std::string search_index, search_passages, search_query;
    std::size_t search_k = 10;
    search->add_option("--index", search_index)->required()->check(CLI::ExistingFile);
    search->add_option("--query", search_query)->required();
    search->add_option("--k", search_k)->capture_default_str();
    search->add_option("--passages", search_passages, "include passage text in the output")->check(CLI::ExistingFile);

    // lm-train
    auto* lm_train = app.add_subcommand("lm-train", "train the built-in cache n-gram LM");
    std::string lm_corpus, lm_out;
    ralm::cache_ngram_options lm_opts;
    lm_train->add_option("--corpus", lm_corpus, "raw text, or a .jsonl corpus")->required()->check(CLI::ExistingFile);
    lm_train->add_option("--order", lm_opts.order)->capture_default_str();
    lm_train->add_option("--alpha", lm_opts.alpha)->capture_default_str();
    lm_train->add_option("--lambda", lm_opts.lambda)->capture_default_str();
    lm_train->add_option("--gamma", lm_opts.gamma)->capture_default_str();
    lm_train->add_option("--max-context", lm_opts.max_context_tokens)->capture_default_str();
    lm_train->add_option("--out", lm_out)->required();

    // eval-ppl
    auto* eval = app.add_subcommand("eval-ppl", "retrieval-augmented perplexity");
    engine_flags eval_flags;
    eval->add_option("--text", eval_flags.text, "raw text, or a .jsonl corpus")->required()->check(CLI::ExistingFile);
    eval_flags.add_to(*eval, true);
    eval->add_option("--report", eval_flags.report, "JSON report path ('-' for stdout)")->required();
    eval->add_flag("--strides", eval_flags.with_strides, "include per-stride records in the report");

    // sweep
    auto* sweep = app.add_subcommand("sweep", "perplexity across stride or query-length values");
    engine_flags sweep_flags;
    std::string sweep_axis = "stride", sweep_values, sweep_csv_path;
    sweep->add_option("--axis", sweep_axis)->check(CLI::IsMember({"stride", "query-len"}))->capture_default_str();
    sweep->add_option("--values", sweep_values, "comma-separated values")->required();
    sweep->add_option("--text", sweep_flags.text)->required()->check(CLI::ExistingFile);
    sweep_flags.add_to(*sweep, true);
    sweep->add_option("--report", sweep_flags.report)->required();
    sweep->add_option("--csv", sweep_csv_path, "also write the table as CSV");

    // rerank-collect
    auto* collect = app.add_subcommand("rerank-collect", "collect predictive-reranker training examples");
    engine_flags collect_flags;
    std::size_t collect_num = 0;
    std::uint64_t collect_seed = 0;
    std::string collect_out;
    collect->add_option("--corpus", collect_flags.text, "training text, or a .jsonl corpus")->required()->check(CLI::ExistingFile);
    collect_flags.add_to(*collect, false);
    collect->add_option("--num", collect_num)->required();
    collect->add_option("--seed", collect_seed)->capture_default_str();
    collect->add_option("--out", collect_out)->required();

    // rerank-train
    auto* rtrain = app.add_subcommand("rerank-train", "train the predictive reranker");
    std::string rtrain_examples, rtrain_out, rtrain_report;
    ralm::train_options topts;
    rtrain->add_option("--examples", rtrain_examples)->required()->check(CLI::ExistingFile);
    rtrain->add_option("--lr", topts.learning_rate)->capture_default_str();
    rtrain->add_option("--steps", topts.steps)->capture_default_str();
    rtrain->add_option("--seed", topts.seed)->capture_default_str();
    rtrain->add_option("--query-len", topts.query_len)->capture_default_str();
    rtrain->add_option("--out", rtrain_out)->required();
    rtrain->add_option("--report", rtrain_report, "training report (default stdout)");

    // odqa
    auto* odqa = app.add_subcommand("odqa", "closed- or open-book question answering");
    std::string qa_questions, qa_backend, qa_index, qa_passages, qa_report_path;
    ralm::qa_options qa_opts;
    odqa->add_option("--questions", qa_questions, "JSONL {question, answers}")->required()->check(CLI::ExistingFile);
    odqa->add_option("--backend", qa_backend)->required();
    odqa->add_flag("--open-book", qa_opts.use_retrieval, "prepend retrieved passages");
    odqa->add_option("--num-docs", qa_opts.num_docs)->capture_default_str();
    odqa->add_option("--retriever", "retriever for open-book mode")->check(CLI::IsMember({"bm25"}))->default_val("bm25");
    odqa->add_option("--index", qa_index)->check(CLI::ExistingFile);
    odqa->add_option("--passages", qa_passages)->check(CLI::ExistingFile);
    odqa->add_option("--max-new-tokens", qa_opts.max_new_tokens)->capture_default_str();
    odqa->add_option("--report", qa_report_path)->required();

    // check-backend
    auto* check = app.add_subcommand("check-backend", "run the protocol conformance suite against a backend");
    std::string check_spec;
    check->add_option("--backend", check_spec)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return fail(ralm::error_kind::usage, e.what());
    }
    if (verbose) {
        spdlog::set_level(spdlog::level::debug);
    }

    try {
        if (*ingest) {
            auto docs = ralm::ingest(ingest_corpus);
            json summary = {{"documents", docs.size()}};
            if (!ingest_exclude.empty()) {
                auto excluded = ralm::exclude_documents(docs, ralm::read_blocklist(ingest_exclude));
                summary["removed"] = excluded.removed_count;
                summary["warnings"] = excluded.warnings;
                docs = std::move(excluded.kept);
            }
            const auto set = ralm::chunk_documents(docs, words_per_passage);
            ralm::persist(set, ingest_out);
            summary["passages"] = set.size();
            summary["fingerprint"] = set.fingerprint();
            emit("-", {{"manifest", manifest("ingest", {{"corpus", ingest_corpus},
                                                        {"exclude", ingest_exclude},
                                                        {"words_per_passage", words_per_passage},
                                                        {"out", ingest_out}})},
                       {"result", summary}});
        } else if (*index) {
            const auto passages = ralm::load_passages(index_passages);
            const auto ix = ralm::inverted_index::build(passages, bm25, analyzer);
            ix.save(index_out);
            emit("-", {{"manifest", manifest("index", {{"passages", index_passages},
                                                       {"passages_fingerprint", passages.fingerprint()},
                                                       {"k1", bm25.k1},
                                                       {"b", bm25.b},
                                                       {"stopwords", analyzer.remove_stopwords},
                                                       {"stem", analyzer.stem},
                                                       {"out", index_out}})},
                       {"result", {{"passages", ix.size()}, {"avgdl", ix.avgdl()}, {"terms", ix.postings().size()}}}});
        } else if (*search) {
            const auto ix = ralm::inverted_index::load(search_index);
            std::optional<ralm::passage_set> passages;
            if (!search_passages.empty()) {
                passages = ralm::load_passages(search_passages);
                if (passages->fingerprint() != ix.corpus_fingerprint()) {
                    throw ralm::data_error("fingerprint mismatch between index and passages");
                }
            }
            if (search_k == 0) {
                throw ralm::usage_error("--k must be >= 1");
            }
            json hits = json::array();
            for (const auto& r : ix.search(search_query, search_k)) {
                json hit = {{"passage_id", r.passage_id}, {"score", r.score}};
                if (passages) {
                    hit["text"] = (*passages)[r.passage_id].text;
                }
                hits.push_back(std::move(hit));
            }
            emit("-", {{"manifest", manifest("search", {{"index", search_index},
                                                        {"index_fingerprint", ix.corpus_fingerprint()},
                                                        {"query", search_query},
                                                        {"k", search_k}})},
                       {"result", hits}});
        } else if (*lm_train) {
            const auto lm = ralm::cache_ngram_lm::train(read_text_or_corpus(lm_corpus), lm_opts);
            lm.save(lm_out);
            emit("-", {{"manifest", manifest("lm-train", {{"corpus", lm_corpus},
                                                          {"order", lm.options().order},
                                                          {"alpha", lm.options().alpha},
                                                          {"eta", lm.options().eta},
                                                          {"lambda", lm.options().lambda},
                                                          {"gamma", lm.options().gamma},
                                                          {"max_context_tokens", lm.options().max_context_tokens},
                                                          {"out", lm_out}})},
                       {"result", {{"vocab_size", lm.vocab_size()}}}});
        } else if (*eval) {
            engine_session session(eval_flags);
            const auto text = read_text_or_corpus(eval_flags.text);
            auto config = session.manifest_config;
            config["text"] = eval_flags.text;
            config["text_sha256"] = ralm::sha256_hex(text);
            const auto report = session.engine->evaluate_perplexity(text);
            emit(eval_flags.report, {{"manifest", manifest("eval-ppl", config)},
                                     {"result", report.to_json(eval_flags.with_strides)}});
        } else if (*sweep) {
            const auto values = parse_values(sweep_values);
            engine_session session(sweep_flags);
            const auto text = read_text_or_corpus(sweep_flags.text);
            auto config = session.manifest_config;
            config["text"] = sweep_flags.text;
            config["text_sha256"] = ralm::sha256_hex(text);
            config["axis"] = sweep_axis;
            config["values"] = values;
            const auto rows = session.engine->sweep(text, ralm::parse_sweep_axis(sweep_axis), values);
            json table = json::array();
            for (const auto& row : rows) {
                auto r = row.report.to_json(false);
                r["axis_value"] = row.value;
                table.push_back(std::move(r));
            }
            emit(sweep_flags.report, {{"manifest", manifest("sweep", config)}, {"result", table}});
            if (!sweep_csv_path.empty()) {
                write_file(sweep_csv_path, ralm::sweep_csv(rows));
            }
        } else if (*collect) {
            engine_session session(collect_flags);
            const auto text = read_text_or_corpus(collect_flags.text);
            const auto examples = ralm::collect_training_examples(text, *session.engine, collect_num, collect_seed);
            ralm::save_examples(examples, collect_out);
            auto config = session.manifest_config;
            config["corpus"] = collect_flags.text;
            config["num"] = collect_num;
            config["seed"] = collect_seed;
            config["out"] = collect_out;
            emit("-", {{"manifest", manifest("rerank-collect", config)}, {"result", {{"examples", examples.size()}}}});
        } else if (*rtrain) {
            const auto examples = ralm::load_examples(rtrain_examples);
            const auto result = ralm::train(examples, topts);
            result.model.save(rtrain_out);
            emit(rtrain_report, {{"manifest", manifest("rerank-train", {{"examples", rtrain_examples},
                                                                        {"lr", topts.learning_rate},
                                                                        {"steps", topts.steps},
                                                                        {"seed", topts.seed},
                                                                        {"query_len", topts.query_len},
                                                                        {"out", rtrain_out}})},
                                 {"result", {{"weights", result.model.weights},
                                             {"bias", result.model.bias},
                                             {"initial_loss", result.loss_history.front()},
                                             {"final_loss", result.loss_history.back()},
                                             {"loss_history", result.loss_history}}}});
        } else if (*odqa) {
            if (qa_opts.use_retrieval && (qa_index.empty() || qa_passages.empty())) {
                throw ralm::usage_error("--open-book requires --index and --passages");
            }
            const auto items = ralm::load_questions(qa_questions);
            const auto backend = ralm::open_backend(qa_backend);
            retrieval_data data;
            if (qa_opts.use_retrieval) {
                data = load_retrieval(qa_index, qa_passages);
            }
            const auto report = ralm::evaluate_qa(items, *backend, qa_opts, qa_opts.use_retrieval ? &data.index : nullptr,
                                                  qa_opts.use_retrieval ? &data.passages : nullptr);
            emit(qa_report_path, {{"manifest", manifest("odqa", {{"questions", qa_questions},
                                                                 {"backend", backend_json(*backend, qa_backend)},
                                                                 {"open_book", qa_opts.use_retrieval},
                                                                 {"num_docs", qa_opts.num_docs},
                                                                 {"retriever", "bm25"},
                                                                 {"max_new_tokens", qa_opts.max_new_tokens},
                                                                 {"passages_fingerprint", data.passages.fingerprint()},
                                                                 {"index_sha256", data.index_sha256}})},
                                  {"result", report.to_json()}});
        } else if (*check) {
            const auto result = check_backend(check_spec);
            emit("-", {{"manifest", manifest("check-backend", {{"backend", check_spec}})}, {"result", result}});
            if (!result["passed"].get<bool>()) {
                return fail(ralm::error_kind::backend, "backend failed protocol conformance");
            }
        }
    } catch (const ralm::error& e) {
        return fail(e.kind(), e.what());
    } catch (const std::exception& e) {
        return fail(ralm::error_kind::data, e.what());
    }
    return 0;
}
