#pragma once

#include <stdexcept>
#include <string>

namespace cachetune {

// Base class for every error raised by the library. The concrete type tells
// callers which contract was violated; what() carries the detail.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IndexError : public Error { using Error::Error; };
class ShapeError : public Error { using Error::Error; };
class InvalidPlan : public Error { using Error::Error; };
class InvalidParam : public Error { using Error::Error; };
class IoError : public Error { using Error::Error; };
// Stored bytes are readable but do not form a valid CTKV file.
class FormatError : public IoError { using IoError::IoError; };
class NotFound : public Error { using Error::Error; };
class AlreadyExists : public Error { using Error::Error; };
class ObjectiveError : public Error { using Error::Error; };
class ProfileError : public Error { using Error::Error; };

}  // namespace cachetune
