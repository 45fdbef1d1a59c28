#pragma once

#include <stdexcept>
#include <string>

namespace dcfr {

// Numeric values double as CLI exit codes and C API status codes.
enum class ErrorKind : int {
    io = 2,
    contract = 3,
    singularity = 4,
    selection = 5,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

// Argument outside the domain of a function (time outside [a,b], df >= n-2, ...).
// Reported with the contract exit code.
class DomainError : public Error {
public:
    explicit DomainError(const std::string& what) : Error(ErrorKind::contract, "domain error: " + what) {}
};

class ContractError : public Error {
public:
    explicit ContractError(const std::string& what) : Error(ErrorKind::contract, "contract error: " + what) {}
};

class SingularityError : public Error {
public:
    explicit SingularityError(const std::string& what) : Error(ErrorKind::singularity, "singular system: " + what) {}
};

class SelectionError : public Error {
public:
    explicit SelectionError(const std::string& what) : Error(ErrorKind::selection, "lambda selection: " + what) {}
};

class FormatError : public Error {
public:
    explicit FormatError(const std::string& what) : Error(ErrorKind::io, what) {}
};

} // namespace dcfr
