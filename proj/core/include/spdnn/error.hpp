#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace spdnn {

/// Base class of every error raised by the library. The category decides
/// how front ends (the CLI in particular) report the failure.
class Error : public std::runtime_error {
public:
    enum class Category { Parse, Validation, Shape, Numeric, Io };

    Error(Category category, const std::string& what)
        : std::runtime_error(what), category_(category) {}

    Category category() const noexcept { return category_; }

private:
    Category category_;
};

/// Malformed input text or bytes. `offset()` is the byte position of the
/// failure when one is known.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t offset);
    explicit ParseError(const std::string& what);

    std::size_t offset() const noexcept { return offset_; }
    bool has_offset() const noexcept { return has_offset_; }

private:
    std::size_t offset_ = 0;
    bool has_offset_ = false;
};

/// Structurally invalid network, graph or parameter set. Carries the
/// offending node id when one exists.
class ValidationError : public Error {
public:
    explicit ValidationError(const std::string& what, std::string node_id = {});

    const std::string& node_id() const noexcept { return node_id_; }

private:
    std::string node_id_;
};

class ShapeError : public Error {
public:
    explicit ShapeError(const std::string& what, std::string node_id = {});

    const std::string& node_id() const noexcept { return node_id_; }

private:
    std::string node_id_;
};

class NumericError : public Error {
public:
    explicit NumericError(const std::string& what) : Error(Category::Numeric, what) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error(Category::Io, what) {}
};

} // namespace spdnn
