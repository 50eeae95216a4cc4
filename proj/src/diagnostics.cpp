#include "cotlsa/diagnostics.hpp"

#include <iostream>
#include <mutex>
#include <utility>

namespace cotlsa {

namespace {

std::mutex& sink_mutex() {
  static std::mutex m;
  return m;
}

WarningSink& current_sink() {
  static WarningSink sink = [](std::string_view msg) { std::cerr << "warning: " << msg << '\n'; };
  return sink;
}

}  // namespace

void warn(std::string_view message) {
  std::lock_guard lock(sink_mutex());
  if (current_sink()) current_sink()(message);
}

WarningSink set_warning_sink(WarningSink sink) {
  std::lock_guard lock(sink_mutex());
  return std::exchange(current_sink(), std::move(sink));
}

WarningCapture::WarningCapture() {
  previous_ = set_warning_sink([this](std::string_view msg) { messages_.emplace_back(msg); });
}

WarningCapture::~WarningCapture() { set_warning_sink(std::move(previous_)); }

bool WarningCapture::contains(std::string_view fragment) const {
  for (const auto& m : messages_)
    if (m.find(fragment) != std::string::npos) return true;
  return false;
}

}  // namespace cotlsa
