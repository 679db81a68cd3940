#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace skelmorph {

enum class ErrorCode {
    parse,
    empty_input,
    size,
    parameter,
    shape,
    numeric,
    budget_exceeded,
    domain,
    reference,
    duplicate,
    degenerate,
    precondition,
    config,
    io,
};

std::string_view to_string(ErrorCode code) noexcept;

// Exit code used by the command-line front end for each error family.
int exit_code(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
    throw Error(code, message);
}

}  // namespace skelmorph
