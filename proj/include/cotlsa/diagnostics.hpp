#pragma once

#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace cotlsa {

// Non-fatal precondition notices (parameters outside a theoretical window).
// The default sink prints "warning: <msg>" to stderr.
using WarningSink = std::function<void(std::string_view)>;

void warn(std::string_view message);
WarningSink set_warning_sink(WarningSink sink);

// Collects warnings for the lifetime of the object, then restores the previous sink.
class WarningCapture {
 public:
  WarningCapture();
  ~WarningCapture();
  WarningCapture(const WarningCapture&) = delete;
  WarningCapture& operator=(const WarningCapture&) = delete;

  const std::vector<std::string>& messages() const noexcept { return messages_; }
  bool contains(std::string_view fragment) const;

 private:
  std::vector<std::string> messages_;
  WarningSink previous_;
};

}  // namespace cotlsa
