#pragma once

#include <stdexcept>
#include <string>

namespace drf {

/// Base of every error raised by the library. Catch this at tool boundaries.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define DRF_DEFINE_ERROR(Name)             \
  class Name : public Error {              \
   public:                                 \
    using Error::Error;                    \
  }

// volume
DRF_DEFINE_ERROR(FormatError);
DRF_DEFINE_ERROR(CorruptFile);
DRF_DEFINE_ERROR(DegenerateVolume);
DRF_DEFINE_ERROR(EmptyRoi);
DRF_DEFINE_ERROR(DimensionMismatch);

// cnn
DRF_DEFINE_ERROR(WeightFormatError);
DRF_DEFINE_ERROR(LayerError);

// texture
DRF_DEFINE_ERROR(DegenerateMatrix);

// pipeline
DRF_DEFINE_ERROR(MissingModality);
DRF_DEFINE_ERROR(ManifestError);

// stats
DRF_DEFINE_ERROR(UndefinedCorrelation);
DRF_DEFINE_ERROR(UndefinedTest);

// ml
DRF_DEFINE_ERROR(SingleClassError);
DRF_DEFINE_ERROR(DimensionError);
DRF_DEFINE_ERROR(UndefinedAuc);

// cli
DRF_DEFINE_ERROR(IngestError);
DRF_DEFINE_ERROR(ConfigError);

#undef DRF_DEFINE_ERROR

}  // namespace drf
