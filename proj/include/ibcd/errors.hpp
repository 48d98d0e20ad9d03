#pragma once

#include <stdexcept>
#include <string>

namespace ibcd {

struct invalid_geometry_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct invalid_config_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct invalid_input_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// The patch is larger than the admissible bound the search relies on.
struct assumption_violation_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct generation_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct undefined_rate_error : std::domain_error {
    using std::domain_error::domain_error;
};

// Failure talking to an external classifier process; carries the raw payload.
struct bridge_error : std::runtime_error {
    bridge_error(const std::string& what, std::string payload_text = {})
        : std::runtime_error(payload_text.empty() ? what : what + " (payload: " + payload_text + ")"),
          payload(std::move(payload_text)) {}

    std::string payload;
};

}  // namespace ibcd
