#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace maas {

enum class Errc {
  // operator-registry
  DuplicateId,
  InvalidTemperature,
  InvalidOperator,
  SecondEarlyExit,
  UnknownTarget,
  PatchOnExitOperator,
  MergeUnknownPartner,
  InvalidPatch,
  // embedding / controller / sampler
  RemoteUnavailable,
  DimensionMismatch,
  ShapeMismatch,
  StaleArchitecture,
  // executor
  BackendUnavailable,
  MalformedResponse,
  EmptyArchitecture,
  UnknownOperatorProfile,
  // optimizer
  NonpositiveCost,
  MutatorUnavailable,
  UnparseableMutation,
  InvalidConfig,
  // harness
  ParseError,
  DuplicateQueryId,
  TooFewRecords,
  IoError,
};

std::string_view errc_name(Errc code) noexcept;

// Single exception type for the library. `line` is set for dataset parse errors.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what, std::optional<std::size_t> line = std::nullopt);

  Errc code() const noexcept { return code_; }
  std::optional<std::size_t> line() const noexcept { return line_; }

 private:
  Errc code_;
  std::optional<std::size_t> line_;
};

}  // namespace maas
