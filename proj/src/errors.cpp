#include "bkmr/errors.hpp"

namespace bkmr {

const char* error_code_name(ErrorCode code) {
    switch (code) {
        case ErrorCode::input: return "input";
        case ErrorCode::invalid_state: return "invalid-state";
        case ErrorCode::numerical: return "numerical";
        case ErrorCode::schema: return "schema";
        case ErrorCode::initialization: return "initialization";
        case ErrorCode::singular_design: return "singular-design";
        case ErrorCode::io: return "io";
    }
    return "unknown";
}

Error::Error(ErrorCode code, const std::string& what)
    : std::runtime_error(std::string(error_code_name(code)) + " error: " + what), code_(code) {}

}  // namespace bkmr
