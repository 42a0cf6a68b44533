#pragma once

#include <stdexcept>
#include <string>

namespace lsd2 {

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class InvalidInputError : public Error {
public:
    explicit InvalidInputError(const std::string& msg) : Error(msg) {}
};

class InvalidParameterError : public Error {
public:
    explicit InvalidParameterError(const std::string& msg) : Error(msg) {}
};

class OutOfRangeError : public Error {
public:
    explicit OutOfRangeError(const std::string& msg) : Error(msg) {}
};

class DimensionError : public Error {
public:
    explicit DimensionError(const std::string& msg) : Error(msg) {}
};

// Thrown when a blur trajectory would need a kernel larger than the cap.
// Carries the radius that would have been required so callers can report it.
class OversizedBlurError : public Error {
public:
    OversizedBlurError(const std::string& msg, int required_radius)
        : Error(msg), required_radius_(required_radius) {}
    int required_radius() const { return required_radius_; }

private:
    int required_radius_;
};

class TrainingError : public Error {
public:
    explicit TrainingError(const std::string& msg) : Error(msg) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& msg) : Error(msg) {}
};

} // namespace lsd2
