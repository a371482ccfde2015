#pragma once

#include <stdexcept>
#include <string>

namespace irislab {

// Base class for all module errors so the CLI can map them to exit codes.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : Error {
    using Error::Error;
};

// iris_core
struct ZeroOverlap : Error {
    ZeroOverlap() : Error("mask overlap is empty, score undefined") {}
};
struct ShapeMismatch : Error {
    using Error::Error;
};

// modmat
struct ModulusTooLarge : Error {
    using Error::Error;
};
struct AccumulationOverflowRisk : Error {
    using Error::Error;
};

// emulator
struct LevelMismatch : Error {
    using Error::Error;
};
struct ScaleMismatch : Error {
    using Error::Error;
};
struct EncodingMismatch : Error {
    using Error::Error;
};
struct ModulusExhausted : Error {
    using Error::Error;
};
struct ProfileMismatch : Error {
    using Error::Error;
};
struct NonRealMessage : Error {
    using Error::Error;
};
struct ModulusBudget : Error {
    using Error::Error;
};

// poly_design
struct IllConditioned : Error {
    using Error::Error;
};
struct NonConvergence : Error {
    using Error::Error;
};
struct TargetUnreachable : Error {
    using Error::Error;
};

// pipeline
struct GapCollapsed : Error {
    using Error::Error;
};

// thfhe_sim
struct BadThreshold : Error {
    using Error::Error;
};
struct UnknownParticipant : Error {
    using Error::Error;
};
struct RoundingAmbiguity : Error {
    using Error::Error;
};

// analysis
struct InsufficientTrials : Error {
    using Error::Error;
};

}  // namespace irislab
