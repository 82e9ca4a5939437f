#pragma once

#include <stdexcept>
#include <string>

namespace metagen {

// Contract violations are reported as typed exceptions so callers (and tests)
// can distinguish them. All carry a human-readable message.
struct AbsoluteContinuityViolation : std::runtime_error {
  explicit AbsoluteContinuityViolation(const std::string& what) : std::runtime_error(what) {}
};

struct SingularCovariance : std::runtime_error {
  explicit SingularCovariance(const std::string& what) : std::runtime_error(what) {}
};

struct InsufficientSamples : std::runtime_error {
  explicit InsufficientSamples(const std::string& what) : std::runtime_error(what) {}
};

struct DimensionMismatch : std::runtime_error {
  explicit DimensionMismatch(const std::string& what) : std::runtime_error(what) {}
};

struct EnumerationTooLarge : std::runtime_error {
  explicit EnumerationTooLarge(const std::string& what) : std::runtime_error(what) {}
};

struct AllDrawsDegenerate : std::runtime_error {
  explicit AllDrawsDegenerate(const std::string& what) : std::runtime_error(what) {}
};

struct BatchLargerThanTaskSet : std::runtime_error {
  explicit BatchLargerThanTaskSet(const std::string& what) : std::runtime_error(what) {}
};

struct InsufficientResamples : std::runtime_error {
  explicit InsufficientResamples(const std::string& what) : std::runtime_error(what) {}
};

struct CoverageViolation : std::runtime_error {
  explicit CoverageViolation(const std::string& what) : std::runtime_error(what) {}
};

struct ConfigInvalid : std::runtime_error {
  explicit ConfigInvalid(const std::string& what) : std::runtime_error(what) {}
};

struct EnvironmentFileMissing : std::runtime_error {
  explicit EnvironmentFileMissing(const std::string& what) : std::runtime_error(what) {}
};

struct OutputUnwritable : std::runtime_error {
  explicit OutputUnwritable(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace metagen
