#ifndef PERMSAMP_ERRORS_HPP
#define PERMSAMP_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace permsamp {

// Base of all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad or inconsistent data handed to the library (files, matrices, arguments).
// CLI maps these to exit code 3.
struct InputError : Error {
    using Error::Error;
};

// A resource guard tripped (dimension caps, rejection caps).
// CLI maps these to exit code 4.
struct ResourceError : Error {
    using Error::Error;
};

struct MalformedHeader : InputError {
    using InputError::InputError;
};
struct NonSquare : InputError {
    using InputError::InputError;
};
struct NegativeEntry : InputError {
    using InputError::InputError;
};
struct DuplicateEntry : InputError {
    using InputError::InputError;
};
struct NotBlockDiagonal : InputError {
    using InputError::InputError;
};
struct InvalidArgs : InputError {
    using InputError::InputError;
};
struct ZeroPermanent : InputError {
    using InputError::InputError;
};
struct SingularInnovationCovariance : InputError {
    using InputError::InputError;
};
struct DeadParticleSet : InputError {
    using InputError::InputError;
};

struct DimensionTooLarge : ResourceError {
    using ResourceError::ResourceError;
};
struct RejectionCapExceeded : ResourceError {
    using ResourceError::ResourceError;
};

} // namespace permsamp

#endif
