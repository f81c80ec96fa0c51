#pragma once

#include <stdexcept>
#include <string>

namespace uad {

enum class ErrorKind {
    InvalidInput,
    InvalidTemperature,
    InvalidConfig,
    Divergence,
    Io,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

struct InvalidInput : Error {
    explicit InvalidInput(const std::string& what) : Error(ErrorKind::InvalidInput, what) {}
};

struct InvalidTemperature : Error {
    explicit InvalidTemperature(const std::string& what) : Error(ErrorKind::InvalidTemperature, what) {}
};

struct InvalidConfig : Error {
    explicit InvalidConfig(const std::string& what) : Error(ErrorKind::InvalidConfig, what) {}
};

struct DivergenceError : Error {
    explicit DivergenceError(const std::string& what) : Error(ErrorKind::Divergence, what) {}
};

struct IoError : Error {
    explicit IoError(const std::string& what) : Error(ErrorKind::Io, what) {}
};

/// Throws the subclass that matches `kind`.
[[noreturn]] inline void throw_error(ErrorKind kind, const std::string& what) {
    switch (kind) {
        case ErrorKind::InvalidInput: throw InvalidInput(what);
        case ErrorKind::InvalidTemperature: throw InvalidTemperature(what);
        case ErrorKind::InvalidConfig: throw InvalidConfig(what);
        case ErrorKind::Divergence: throw DivergenceError(what);
        case ErrorKind::Io: throw IoError(what);
    }
    throw Error(kind, what);
}

}  // namespace uad
