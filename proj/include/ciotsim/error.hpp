/*
 * Copyright 2026 The ciotsim Authors
 * Licensed under the Apache License, Version 2.0 (the "License"); you may not
 * use this file except in compliance with the License.  You may obtain a copy
 * of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS, WITHOUT
 * WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the
 * License for the specific language governing permissions and limitations
 * under the License.
 */

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace ciotsim {

enum class ErrorCode : std::uint8_t {
  CapacityExceeded,
  InvalidDrxParams,
  UnknownSlice,
  UnknownUe,
  SliceNotRunning,
  MalformedCommand,
  MalformedMessage,
  PayloadTooLarge,
  IllegalProcedure,
  UnsupportedByRat,
  EmptyWindow,
  InvalidWeight,
  WindowIncomplete,
  WrongMode,
  InvalidScenario,
  Io,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::CapacityExceeded: return "CapacityExceeded";
    case ErrorCode::InvalidDrxParams: return "InvalidDrxParams";
    case ErrorCode::UnknownSlice: return "UnknownSlice";
    case ErrorCode::UnknownUe: return "UnknownUe";
    case ErrorCode::SliceNotRunning: return "SliceNotRunning";
    case ErrorCode::MalformedCommand: return "MalformedCommand";
    case ErrorCode::MalformedMessage: return "MalformedMessage";
    case ErrorCode::PayloadTooLarge: return "PayloadTooLarge";
    case ErrorCode::IllegalProcedure: return "IllegalProcedure";
    case ErrorCode::UnsupportedByRat: return "UnsupportedByRat";
    case ErrorCode::EmptyWindow: return "EmptyWindow";
    case ErrorCode::InvalidWeight: return "InvalidWeight";
    case ErrorCode::WindowIncomplete: return "WindowIncomplete";
    case ErrorCode::WrongMode: return "WrongMode";
    case ErrorCode::InvalidScenario: return "InvalidScenario";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace ciotsim
