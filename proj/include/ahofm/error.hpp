#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace ahofm {

/// Runtime failure raised by any ahofm routine (bad input, singular system,
/// divergence). Messages are meant to be shown to the user as-is.
class Error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

using WarningSink = std::function<void(std::string_view)>;

/// Emits a warning through the installed sink (stderr by default).
void warn(std::string_view message);

/// Installs a new sink and returns the previous one. Passing an empty
/// function silences warnings.
WarningSink set_warning_sink(WarningSink sink);

} // namespace ahofm
