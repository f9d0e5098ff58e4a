#pragma once

#include <stdexcept>
#include <string>

namespace taleweaver {

// Base for recoverable engine errors. `code()` is the stable snake_case
// identifier that also travels on the wire in protocol error frames.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& message)
        : std::runtime_error(message), code_(std::move(code))
    {
    }

    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

}  // namespace taleweaver
