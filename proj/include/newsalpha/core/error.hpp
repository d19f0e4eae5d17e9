#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace newsalpha {

// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define NEWSALPHA_DEFINE_ERROR(Name)             \
  class Name : public Error {                    \
   public:                                       \
    explicit Name(const std::string& what)       \
        : Error(std::string(#Name ": ") + what) {} \
  }

// backfill
NEWSALPHA_DEFINE_ERROR(StorageError);
NEWSALPHA_DEFINE_ERROR(UnknownTradingDay);
NEWSALPHA_DEFINE_ERROR(NetworkError);
NEWSALPHA_DEFINE_ERROR(AuthError);

// extract
NEWSALPHA_DEFINE_ERROR(TemplateError);
NEWSALPHA_DEFINE_ERROR(SchemaError);
NEWSALPHA_DEFINE_ERROR(ExtractorError);
NEWSALPHA_DEFINE_ERROR(PanelError);

// shared
NEWSALPHA_DEFINE_ERROR(ConfigError);
NEWSALPHA_DEFINE_ERROR(PreconditionError);
NEWSALPHA_DEFINE_ERROR(WidthMismatch);
NEWSALPHA_DEFINE_ERROR(LengthMismatch);

// metrics
NEWSALPHA_DEFINE_ERROR(HorizonError);
NEWSALPHA_DEFINE_ERROR(DegenerateInput);
NEWSALPHA_DEFINE_ERROR(EmptySeries);
NEWSALPHA_DEFINE_ERROR(NoSignal);

// promptopt
NEWSALPHA_DEFINE_ERROR(ProposerExhausted);

// tradenv
NEWSALPHA_DEFINE_ERROR(WarmupError);
NEWSALPHA_DEFINE_ERROR(RangeError);
NEWSALPHA_DEFINE_ERROR(SteppedAfterDone);

// ppo
NEWSALPHA_DEFINE_ERROR(NonFiniteLoss);

// bench
NEWSALPHA_DEFINE_ERROR(SharpeUndefined);
NEWSALPHA_DEFINE_ERROR(DegenerateDiffs);
NEWSALPHA_DEFINE_ERROR(UnknownTicker);
NEWSALPHA_DEFINE_ERROR(EmptyRegime);

#undef NEWSALPHA_DEFINE_ERROR

// Malformed input line; `line` is 1-based.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("ParseError at line " + std::to_string(line) + ": " + what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class RateLimited : public Error {
 public:
  RateLimited(double retry_after_seconds, const std::string& what)
      : Error("RateLimited: " + what), retry_after_(retry_after_seconds) {}
  // Seconds suggested by the server before the next attempt (0 if unknown).
  double retry_after() const noexcept { return retry_after_; }

 private:
  double retry_after_;
};

}  // namespace newsalpha
