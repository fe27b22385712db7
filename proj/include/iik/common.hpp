#pragma once

#include <stdexcept>
#include <string>

namespace iik {

// Exit codes used by the CLI; exceptions carry the category.
enum class ErrorCode : int { ok = 0, config = 2, io = 3, numeric = 4 };

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct IoError : std::runtime_error {
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace iik
