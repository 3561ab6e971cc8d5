#pragma once

#include <stdexcept>
#include <string>

namespace rdlab {

// Invalid user input: bad config fields, malformed maps, bad parameters.
class config_error : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// A numerical procedure honestly failed to certify its result
// (non-convergent pullback, uncertifiable series tail, covering failure).
class certification_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Access outside the populated symbol window of a base path.
class window_error : public std::out_of_range {
public:
    window_error(long requested, long first, long last)
        : std::out_of_range("index " + std::to_string(requested) +
                            " outside populated window [" + std::to_string(first) + ", " +
                            std::to_string(last) + "]; extend " +
                            (requested < first ? "n_back to " + std::to_string(-requested)
                                               : "n_fwd to " + std::to_string(requested))),
          requested_(requested) {}

    long requested() const noexcept { return requested_; }

private:
    long requested_;
};

} // namespace rdlab
