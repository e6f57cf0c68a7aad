// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace pointcell {

/// Base for every error raised by the library. `kind()` is a stable
/// machine-readable tag used by the CLI error JSON.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

#define POINTCELL_DEFINE_ERROR(Name, tag)                                  \
  class Name : public Error {                                             \
   public:                                                                \
    explicit Name(const std::string& message) : Error(tag, message) {}    \
  };

POINTCELL_DEFINE_ERROR(DimensionError, "dimension")
POINTCELL_DEFINE_ERROR(NumericError, "numeric")
POINTCELL_DEFINE_ERROR(ContractError, "contract")
POINTCELL_DEFINE_ERROR(InfeasibleError, "infeasible")
POINTCELL_DEFINE_ERROR(DensityInfeasibleError, "density_infeasible")
POINTCELL_DEFINE_ERROR(IoError, "io")
POINTCELL_DEFINE_ERROR(ValidationError, "validation")
POINTCELL_DEFINE_ERROR(VersionError, "version")

#undef POINTCELL_DEFINE_ERROR

}  // namespace pointcell
