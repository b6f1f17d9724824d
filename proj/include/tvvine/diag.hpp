#pragma once

#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace tvvine {

/// Non-fatal diagnostics (saturated paths, short samples, clamped quantiles).
/// The default sink prints to stderr; tests and the CLI may install their own.
using WarningSink = std::function<void(std::string_view)>;

void warn(std::string_view message);

/// Installs `sink` and returns the previously installed one.
WarningSink set_warning_sink(WarningSink sink);

/// RAII capture of every warning raised while alive.
class ScopedWarningCapture {
 public:
  ScopedWarningCapture();
  ~ScopedWarningCapture();
  ScopedWarningCapture(const ScopedWarningCapture&) = delete;
  ScopedWarningCapture& operator=(const ScopedWarningCapture&) = delete;

  [[nodiscard]] const std::vector<std::string>& messages() const { return messages_; }
  [[nodiscard]] bool contains(std::string_view needle) const;

 private:
  std::vector<std::string> messages_;
  WarningSink previous_;
};

}  // namespace tvvine
