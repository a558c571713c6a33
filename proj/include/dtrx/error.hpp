#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace dtrx {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Operand shapes or lengths do not agree.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// Config file unreadable, unknown key, or invalid value.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Model file is corrupt, truncated, or has an unexpected header.
class ModelFormatError : public Error {
public:
    using Error::Error;
};

/// Model file is well formed but its dimensions do not fit the link config.
class ModelShapeError : public Error {
public:
    using Error::Error;
};

class TrainingDivergedError : public Error {
public:
    using Error::Error;
};

/// Wraps an error raised inside one stage of the link chain.
class StageError : public Error {
public:
    StageError(std::string stage, const std::string& what)
        : Error(stage + ": " + what), stage_(std::move(stage)) {}
    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

} // namespace dtrx
