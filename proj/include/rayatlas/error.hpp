#pragma once

#include <stdexcept>
#include <string>

namespace rayatlas {

// All library failures carry a short machine-readable code (e.g. "SideRequired")
// next to the human-readable message.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& detail)
        : std::runtime_error(code + ": " + detail), code_(std::move(code)) {}

    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

} // namespace rayatlas
