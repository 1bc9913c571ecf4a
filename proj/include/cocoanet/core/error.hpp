#pragma once

#include <stdexcept>
#include <string>

namespace cocoanet {

// Error taxonomy maps onto CLI exit codes: InputError -> 2 (bad files,
// bad flags, shape mismatches caused by user data), RuntimeFailure -> 3
// (training diverged, I/O gave out mid-run). Programming-contract breaches
// inside the library stay std::logic_error / std::invalid_argument.

class InputError : public std::runtime_error {
public:
    explicit InputError(const std::string& what) : std::runtime_error(what) {}
};

class RuntimeFailure : public std::runtime_error {
public:
    explicit RuntimeFailure(const std::string& what) : std::runtime_error(what) {}
};

class ConfigError : public InputError {
public:
    explicit ConfigError(const std::string& what) : InputError(what) {}
};

class ImageDecodeError : public InputError {
public:
    explicit ImageDecodeError(const std::string& what) : InputError(what) {}
};

class TrainingDiverged : public RuntimeFailure {
public:
    explicit TrainingDiverged(const std::string& what) : RuntimeFailure(what) {}
};

} // namespace cocoanet
