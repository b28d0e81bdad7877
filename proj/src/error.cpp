#include "rngsentinel/error.hpp"

namespace rngsentinel {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::OsEntropyUnavailable: return "OsEntropyUnavailable";
    case Errc::InsecureSeed: return "InsecureSeed";
    case Errc::InvalidRange: return "InvalidRange";
    case Errc::InvalidScale: return "InvalidScale";
    case Errc::DomainError: return "DomainError";
    case Errc::EmptySample: return "EmptySample";
    case Errc::SampleTooSmall: return "SampleTooSmall";
    case Errc::NonFiniteSample: return "NonFiniteSample";
    case Errc::BinTooSparse: return "BinTooSparse";
    case Errc::CountMismatch: return "CountMismatch";
    case Errc::MalformedManifest: return "MalformedManifest";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::AuditorStopped: return "AuditorStopped";
    case Errc::Timeout: return "Timeout";
    case Errc::UnknownSlot: return "UnknownSlot";
    case Errc::InvalidWindow: return "InvalidWindow";
    case Errc::SpecMismatch: return "SpecMismatch";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::ParseError: return "ParseError";
  }
  return "Unknown";
}

}  // namespace rngsentinel
