#ifndef FADEMAC_ERROR_HPP
#define FADEMAC_ERROR_HPP

#include <stdexcept>
#include <string>

namespace fademac {

/// Input rejected by a precondition check. The message names the offending entry.
class InvalidInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Input is valid in principle but the closed form is numerically unusable
/// (near-coincident exponential rates). Callers should fall back to sampling.
class IllConditioned : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// A distributed processor was asked to update before its neighbor caches
/// were filled for the current round.
class ProtocolError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

namespace detail {

inline void require(bool ok, const std::string& what) {
    if (!ok) throw InvalidInput(what);
}

}  // namespace detail
}  // namespace fademac

#endif
