#pragma once

#include <stdexcept>
#include <string>

namespace texfuse
{
    class Error : public std::runtime_error
    {
    public:
        using std::runtime_error::runtime_error;
    };

    class MeshFormatError : public Error
    {
    public:
        using Error::Error;
    };

    class ImageIoError : public Error
    {
    public:
        using Error::Error;
    };

    class ConfigError : public Error
    {
    public:
        using Error::Error;
    };

    // Base for every failure that originates at the inpainting boundary.
    class BackendError : public Error
    {
    public:
        using Error::Error;
    };

    // Connection refused, timeouts, exhausted retries.
    class BackendUnavailable : public BackendError
    {
    public:
        using BackendError::BackendError;
    };

    class BackendStatusError : public BackendError
    {
    public:
        BackendStatusError(int status, const std::string& message)
            : BackendError("backend returned HTTP " + std::to_string(status) + ": " + message), status_(status)
        {
        }

        int status() const noexcept
        {
            return status_;
        }

    private:
        int status_;
    };

    class MalformedResponse : public BackendError
    {
    public:
        using BackendError::BackendError;
    };

    class InvalidRequest : public BackendError
    {
    public:
        using BackendError::BackendError;
    };

    class SizeMismatch : public BackendError
    {
    public:
        using BackendError::BackendError;
    };

    class KnownRegionViolation : public BackendError
    {
    public:
        using BackendError::BackendError;
    };
} // namespace texfuse
