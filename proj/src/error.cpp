#include "maas/error.hpp"

namespace maas {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::DuplicateId: return "DuplicateId";
    case Errc::InvalidTemperature: return "InvalidTemperature";
    case Errc::InvalidOperator: return "InvalidOperator";
    case Errc::SecondEarlyExit: return "SecondEarlyExit";
    case Errc::UnknownTarget: return "UnknownTarget";
    case Errc::PatchOnExitOperator: return "PatchOnExitOperator";
    case Errc::MergeUnknownPartner: return "MergeUnknownPartner";
    case Errc::InvalidPatch: return "InvalidPatch";
    case Errc::RemoteUnavailable: return "RemoteUnavailable";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::StaleArchitecture: return "StaleArchitecture";
    case Errc::BackendUnavailable: return "BackendUnavailable";
    case Errc::MalformedResponse: return "MalformedResponse";
    case Errc::EmptyArchitecture: return "EmptyArchitecture";
    case Errc::UnknownOperatorProfile: return "UnknownOperatorProfile";
    case Errc::NonpositiveCost: return "NonpositiveCost";
    case Errc::MutatorUnavailable: return "MutatorUnavailable";
    case Errc::UnparseableMutation: return "UnparseableMutation";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::ParseError: return "ParseError";
    case Errc::DuplicateQueryId: return "DuplicateQueryId";
    case Errc::TooFewRecords: return "TooFewRecords";
    case Errc::IoError: return "IoError";
  }
  return "Unknown";
}

namespace {

std::string format_message(Errc code, const std::string& what, std::optional<std::size_t> line) {
  std::string msg(errc_name(code));
  if (line) msg += " (line " + std::to_string(*line) + ")";
  if (!what.empty()) msg += ": " + what;
  return msg;
}

}  // namespace

Error::Error(Errc code, const std::string& what, std::optional<std::size_t> line)
    : std::runtime_error(format_message(code, what, line)), code_(code), line_(line) {}

}  // namespace maas
