#pragma once

#include <stdexcept>
#include <string>

namespace phasereg {

/// A non-finite value appeared during evolution or optimisation.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Unreadable input, unwritable output, or malformed file.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace phasereg
