#pragma once

#include <stdexcept>
#include <string>

namespace ralm {

/// Broad failure category. The CLI maps each kind to its exit code.
enum class error_kind {
    usage,    // bad arguments or violated preconditions
    data,     // malformed input, corruption, fingerprint mismatch
    backend,  // language-model backend failures, including window overflow
};

class error : public std::runtime_error {
  public:
    error(error_kind kind, const std::string& what) : std::runtime_error(what), m_kind(kind) {}
    error_kind kind() const noexcept { return m_kind; }

  private:
    error_kind m_kind;
};

class usage_error : public error {
  public:
    explicit usage_error(const std::string& what) : error(error_kind::usage, what) {}
};

class data_error : public error {
  public:
    explicit data_error(const std::string& what) : error(error_kind::data, what) {}
};

class backend_error : public error {
  public:
    explicit backend_error(const std::string& what) : error(error_kind::backend, what) {}
};

/// Raised when context + continuation does not fit the model window.
class overflow_error : public backend_error {
  public:
    using backend_error::backend_error;
};

const char* to_string(error_kind kind) noexcept;

}  // namespace ralm
