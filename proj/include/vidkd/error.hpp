#pragma once

#include <stdexcept>
#include <string>

namespace vidkd {

/// Root of the library's exception hierarchy.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Filesystem failures: missing inputs, unwritable outputs.
class IoError : public Error {
public:
    using Error::Error;
};

/// A file parsed but violates its schema, or an archive is corrupt.
class FormatError : public Error {
public:
    using Error::Error;
};

/// Invalid arguments, configs or contract violations detected before any work starts.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Tensor or model dimension mismatch.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Argument outside a function's mathematical domain (non-finite logits, bad target index).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Non-finite loss during optimization.
class DivergenceError : public Error {
public:
    DivergenceError(const std::string& what, int epoch, long step)
        : Error(what), epoch_(epoch), step_(step) {}

    int epoch() const noexcept { return epoch_; }
    long step() const noexcept { return step_; }

private:
    int epoch_;
    long step_;
};

}  // namespace vidkd
