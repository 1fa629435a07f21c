#pragma once

#include <stdexcept>
#include <string>

namespace nilm {

/// Base class for all library errors.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct NonIntegralCycles : Error { using Error::Error; };
struct DuplicateClassName : Error { using Error::Error; };
struct FormatError : Error { using Error::Error; };
struct LengthMismatch : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };
struct OutOfRange : Error { using Error::Error; };
struct UnknownAppliance : Error { using Error::Error; };
struct DegenerateSignal : Error { using Error::Error; };
struct DimsTooLarge : Error { using Error::Error; };
struct EmptyConfig : Error { using Error::Error; };
struct KTooLarge : Error { using Error::Error; };
struct DimMismatch : Error { using Error::Error; };
struct SingleClass : Error { using Error::Error; };
struct EmptyTrainSet : Error { using Error::Error; };
struct NonIntegralWidth : Error { using Error::Error; };
struct NonFiniteLoss : Error { using Error::Error; };
struct ClassTooSmall : Error { using Error::Error; };

}  // namespace nilm
