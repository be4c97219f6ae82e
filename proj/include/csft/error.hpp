#pragma once

#include <stdexcept>
#include <string>

namespace csft {

// Base of every error the library raises. `kind()` is a stable, machine
// parsable class name used by the CLI as the message prefix.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& what)
        : std::runtime_error(what), kind_(std::move(kind)) {}

    const std::string& kind() const noexcept { return kind_; }

protected:
    void set_kind(std::string kind) { kind_ = std::move(kind); }

private:
    std::string kind_;
};

#define CSFT_DEFINE_ERROR(Name)                                        \
    class Name : public Error {                                        \
    public:                                                            \
        explicit Name(const std::string& what) : Error(#Name, what) {} \
    }

CSFT_DEFINE_ERROR(DimensionError);
CSFT_DEFINE_ERROR(NumericError);
CSFT_DEFINE_ERROR(ParameterError);
CSFT_DEFINE_ERROR(LabelError);
CSFT_DEFINE_ERROR(DegenerateInputError);
CSFT_DEFINE_ERROR(TapeError);
CSFT_DEFINE_ERROR(FormatError);
CSFT_DEFINE_ERROR(ContractError);
CSFT_DEFINE_ERROR(StratificationError);
CSFT_DEFINE_ERROR(IoError);

// Truncated or mis-sized container; a special case of a format error.
class LengthError : public FormatError {
public:
    explicit LengthError(const std::string& what) : FormatError(what) { set_kind("LengthError"); }
};

#undef CSFT_DEFINE_ERROR

} // namespace csft
