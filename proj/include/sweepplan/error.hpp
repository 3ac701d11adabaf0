// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace sweepplan {

enum class ErrorCode {
    InvalidFactor,
    InfeasibleSplit,
    SplitOrdering,
    UnsupportedScale,
    UnsupportedModel,
    MinimumBatch,
    InsufficientCorpus,
    Parse,
    Validation,
    InsufficientData,
    Underdetermined,
    Unidentifiable,
    DegenerateGroup,
    Usage,
};

const char* to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

    /// True for failures raised by the model fitters.
    bool is_fit_error() const noexcept {
        return code_ == ErrorCode::Underdetermined || code_ == ErrorCode::Unidentifiable ||
               code_ == ErrorCode::DegenerateGroup;
    }

private:
    ErrorCode code_;
};

} // namespace sweepplan
