#pragma once

#include <stdexcept>
#include <string>

namespace hotbox {

// Root of every error the library raises. Subclasses map onto the CLI exit
// codes (see cli.hpp), so new ones should derive from the closest category.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class PhyError : public Error { using Error::Error; };
class OversizeFrame : public PhyError { using PhyError::PhyError; };
class LengthError : public PhyError { using PhyError::PhyError; };
class EmptySignal : public PhyError { using PhyError::PhyError; };
class InsufficientSymbols : public PhyError { using PhyError::PhyError; };

class TempOutOfRange : public Error { using Error::Error; };

class ThermalError : public Error { using Error::Error; };
class TargetAboveLimit : public ThermalError { using ThermalError::ThermalError; };
class SettleTimeout : public ThermalError { using ThermalError::ThermalError; };

class ConfigError : public Error { using Error::Error; };
class CalibrationError : public Error { using Error::Error; };
class CalibrationInfeasible : public CalibrationError {
  using CalibrationError::CalibrationError;
};

class AnalysisError : public Error { using Error::Error; };
class LengthMismatch : public AnalysisError { using AnalysisError::AnalysisError; };
class UnknownPayloadPattern : public AnalysisError {
  using AnalysisError::AnalysisError;
};
class DegenerateHistogram : public AnalysisError {
  using AnalysisError::AnalysisError;
};

// Malformed or truncated files and failed reads/writes.
class IoError : public Error { using Error::Error; };

// Bad command line; the message carries the usage text.
class UsageError : public Error { using Error::Error; };

}  // namespace hotbox
