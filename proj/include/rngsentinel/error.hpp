#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rngsentinel {

enum class Errc {
  OsEntropyUnavailable,
  InsecureSeed,
  InvalidRange,
  InvalidScale,
  DomainError,
  EmptySample,
  SampleTooSmall,
  NonFiniteSample,
  BinTooSparse,
  CountMismatch,
  MalformedManifest,
  InvalidConfig,
  AuditorStopped,
  Timeout,
  UnknownSlot,
  InvalidWindow,
  SpecMismatch,
  InvalidArgument,
  ParseError,
};

std::string_view to_string(Errc code) noexcept;

// Every failure raised by the engine carries one of the codes above so callers
// (the CLI in particular) can map them to exit codes without string matching.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace rngsentinel
