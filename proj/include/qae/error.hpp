#ifndef QAE_ERROR_HPP
#define QAE_ERROR_HPP

#include <stdexcept>
#include <string>
#include <string_view>

namespace qae {

enum class Errc {
  NonContiguousIndices,
  EmptyUtterance,
  IndexOutOfRange,
  EmptyQuestionUnion,
  EmptyUnion,
  LengthMismatch,
  OverlappingUnions,
  TaggerFailure,
  ModeUnsupported,
  SessionIdMismatch,
  IdenticalSpans,
  Timeout,
  ConnectionFailed,
  MalformedResponse,
  HttpStatus,
  FileNotFound,
  ParseError,
  UnknownPair,
  AlreadyReviewed,
  InvalidCursor,
  DuplicateSession,
  InvalidArgument,
  Io,
};

std::string_view errc_name(Errc code);

// Every failure in the library is reported through this type. `detail` carries
// the HTTP status for HttpStatus and the 1-based line number for ParseError.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string &what, int detail = 0)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what),
        code_(code),
        detail_(detail) {}

  Errc code() const noexcept { return code_; }
  int detail() const noexcept { return detail_; }

 private:
  Errc code_;
  int detail_;
};

}  // namespace qae

#endif  // QAE_ERROR_HPP
