#pragma once

#include <stdexcept>
#include <string>

namespace bkmr {

// Values double as CLI exit statuses and must stay stable.
enum class ErrorCode : int {
    input = 2,
    invalid_state = 3,
    numerical = 4,
    schema = 5,
    initialization = 6,
    singular_design = 7,
    io = 8,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what);
    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace bkmr
