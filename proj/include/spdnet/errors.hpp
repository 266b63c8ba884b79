#ifndef SPDNET_ERRORS_HPP
#define SPDNET_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace spdnet {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// spd-core
struct InvalidInput : Error { using Error::Error; };
struct NotSPD : Error { using Error::Error; };
struct Overflow : Error { using Error::Error; };
struct DimMismatch : Error { using Error::Error; };
struct NotRepairable : Error { using Error::Error; };

// signal
struct DegenerateChannel : Error { using Error::Error; };
struct InvalidBand : Error { using Error::Error; };
struct InvalidHeader : Error { using Error::Error; };
struct SizeMismatch : Error { using Error::Error; };
struct VersionMismatch : Error { using Error::Error; };

// embedding
struct EpochTooShort : Error { using Error::Error; };
struct DegenerateGeometry : Error { using Error::Error; };

// features
struct InsufficientData : Error { using Error::Error; };

// network / training
struct CacheMismatch : Error { using Error::Error; };
struct RetractFailure : Error { using Error::Error; };
struct StratifyError : Error { using Error::Error; };
struct DivergenceDetected : Error { using Error::Error; };
struct UndefinedAUC : Error { using Error::Error; };

// explain
struct ZeroSaliency : Error { using Error::Error; };

}  // namespace spdnet

#endif
