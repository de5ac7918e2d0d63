#pragma once

#include <stdexcept>
#include <string>

namespace mineseg {

// Every library failure derives from Error so the CLI can map it to a stable,
// machine-parsable class name and exit code.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    [[nodiscard]] virtual const char* kind() const noexcept { return "Error"; }
};

#define MINESEG_DEFINE_ERROR(Name)                                             \
    class Name : public Error {                                                \
    public:                                                                    \
        using Error::Error;                                                    \
        [[nodiscard]] const char* kind() const noexcept override { return #Name; } \
    };

MINESEG_DEFINE_ERROR(IoError)
MINESEG_DEFINE_ERROR(MetadataError)
MINESEG_DEFINE_ERROR(SchemaError)
MINESEG_DEFINE_ERROR(ArgumentError)
MINESEG_DEFINE_ERROR(PreconditionError)
MINESEG_DEFINE_ERROR(GeometryError)
MINESEG_DEFINE_ERROR(AlignmentError)
MINESEG_DEFINE_ERROR(CoverageError)
MINESEG_DEFINE_ERROR(StatisticsError)
MINESEG_DEFINE_ERROR(ShapeError)
MINESEG_DEFINE_ERROR(NumericalError)
MINESEG_DEFINE_ERROR(CompatibilityError)

#undef MINESEG_DEFINE_ERROR

// Configuration errors carry the dotted path of the offending field.
class ConfigError : public Error {
public:
    ConfigError(std::string field, const std::string& message)
        : Error(field.empty() ? message : field + ": " + message), field_(std::move(field)) {}
    [[nodiscard]] const char* kind() const noexcept override { return "ConfigError"; }
    [[nodiscard]] const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

}  // namespace mineseg
