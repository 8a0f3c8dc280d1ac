#pragma once

#include <stdexcept>
#include <string>

namespace ffo {

inline constexpr int kCanvasSide = 32;
inline constexpr int kCanvasSize = kCanvasSide * kCanvasSide;

struct Error : std::runtime_error {
    Error(std::string code, const std::string& what)
        : std::runtime_error(code + ": " + what), code(std::move(code)) {}
    std::string code;
};

#define FFO_ERROR(Name)                                            \
    struct Name : Error {                                          \
        explicit Name(const std::string& what) : Error(#Name, what) {} \
    }

FFO_ERROR(MalformedInput);
FFO_ERROR(InsufficientData);
FFO_ERROR(DegenerateNorm);
FFO_ERROR(NonFiniteLoss);
FFO_ERROR(GridTooCoarse);
FFO_ERROR(StepTooLarge);
FFO_ERROR(SingularSystem);
FFO_ERROR(DimensionMismatch);
FFO_ERROR(LengthMismatch);
FFO_ERROR(VersionMismatch);
FFO_ERROR(CorruptFile);
FFO_ERROR(CacheStale);
FFO_ERROR(ConfigError);

#undef FFO_ERROR

}  // namespace ffo
