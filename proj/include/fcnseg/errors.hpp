#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fcnseg {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Tensor or raster extents do not satisfy an operation's contract.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Malformed or inconsistent data (bad labels, unpaired items, schema drift).
class DataError : public Error {
public:
    using Error::Error;
};

/// Invalid configuration value.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Checkpoint container is unreadable or does not fit the target model.
class CheckpointError : public Error {
public:
    using Error::Error;
};

/// Encoded image is not in the expected format.
class FormatError : public Error {
public:
    using Error::Error;
};

/// Annotation ingestion failure; carries the XML element path that failed.
class IngestionError : public Error {
public:
    IngestionError(std::string element_path, const std::string& what)
        : Error(element_path + ": " + what), path_(std::move(element_path)) {}

    const std::string& element_path() const noexcept { return path_; }

private:
    std::string path_;
};

/// Training produced a non-finite loss.
class DivergenceError : public Error {
public:
    DivergenceError(std::size_t batch_index, const std::string& what)
        : Error("batch " + std::to_string(batch_index) + ": " + what), batch_(batch_index) {}

    std::size_t batch_index() const noexcept { return batch_; }

private:
    std::size_t batch_;
};

/// A tier-plan stage failed; the message names the stage.
class StageError : public Error {
public:
    StageError(std::string stage, const std::string& what)
        : Error("stage '" + stage + "': " + what), stage_(std::move(stage)) {}

    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

}  // namespace fcnseg
