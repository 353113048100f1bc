#pragma once

#include <stdexcept>
#include <string>

namespace hmhf {

// Every library failure is an Error carrying a stable kind name, so the CLI
// can print one machine-parsable line.
class Error : public std::runtime_error {
public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

private:
  std::string kind_;
};

#define HMHF_DEFINE_ERROR(Name)                                              \
  class Name : public Error {                                                \
  public:                                                                    \
    explicit Name(const std::string& what) : Error(#Name, what) {}           \
  };

HMHF_DEFINE_ERROR(SizeMismatch)
HMHF_DEFINE_ERROR(InvalidArgument)
HMHF_DEFINE_ERROR(SouthPoleSingularity)
HMHF_DEFINE_ERROR(UnresolvableWinding)
HMHF_DEFINE_ERROR(DegenerateMode)
HMHF_DEFINE_ERROR(SingularGram)
HMHF_DEFINE_ERROR(IllConditioned)
HMHF_DEFINE_ERROR(DimensionTooSmall)
HMHF_DEFINE_ERROR(DegreeMismatch)
HMHF_DEFINE_ERROR(PoleOnCurve)
HMHF_DEFINE_ERROR(EnergyUnreachable)
HMHF_DEFINE_ERROR(StageFailure)
HMHF_DEFINE_ERROR(FormatError)
HMHF_DEFINE_ERROR(IoError)

#undef HMHF_DEFINE_ERROR

class BlowupDetected : public Error {
public:
  BlowupDetected(double time, const std::string& what)
      : Error("BlowupDetected", what), time_(time) {}
  double time() const noexcept { return time_; }

private:
  double time_;
};

class ScheduleExhausted : public Error {
public:
  ScheduleExhausted(int stage, const std::string& what)
      : Error("ScheduleExhausted", what), stage_(stage) {}
  int stage() const noexcept { return stage_; }

private:
  int stage_;
};

class CrossingFailed : public Error {
public:
  CrossingFailed(double delta_e, const std::string& what)
      : Error("CrossingFailed", what), delta_e_(delta_e) {}
  double delta_energy() const noexcept { return delta_e_; }

private:
  double delta_e_;
};

// thrown only by callers that choose to treat a timeout as fatal
class Timeout : public Error {
public:
  explicit Timeout(const std::string& what) : Error("Timeout", what) {}
};

} // namespace hmhf
