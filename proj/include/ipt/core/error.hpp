#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ipt {

enum class Errc {
  io,
  parse,
  empty_input,
  missing_channel,
  alignment,
  range,
  ordering,
  shape,
  stale_cache,
  config,
  divergence,
  empty_batch,
  insufficient_data,
  cannot_train,
  dictionary,
  empty_map,
  numeric,
  input,
  index,
  coverage,
  cannot_initialize,
  stage,
};

inline std::string_view errc_name(Errc code) {
  switch (code) {
    case Errc::io: return "io";
    case Errc::parse: return "parse";
    case Errc::empty_input: return "empty-input";
    case Errc::missing_channel: return "missing-channel";
    case Errc::alignment: return "alignment";
    case Errc::range: return "range";
    case Errc::ordering: return "ordering";
    case Errc::shape: return "shape";
    case Errc::stale_cache: return "stale-cache";
    case Errc::config: return "config";
    case Errc::divergence: return "divergence";
    case Errc::empty_batch: return "empty-batch";
    case Errc::insufficient_data: return "insufficient-data";
    case Errc::cannot_train: return "cannot-train";
    case Errc::dictionary: return "dictionary";
    case Errc::empty_map: return "empty-map";
    case Errc::numeric: return "numeric";
    case Errc::input: return "input";
    case Errc::index: return "index";
    case Errc::coverage: return "coverage";
    case Errc::cannot_initialize: return "cannot-initialize";
    case Errc::stage: return "stage";
  }
  return "unknown";
}

/// Errors caused by bad inputs (as opposed to internal failures). The CLI
/// maps these to exit status 2.
inline bool is_validation_error(Errc code) {
  switch (code) {
    case Errc::io:
    case Errc::numeric:
    case Errc::divergence:
    case Errc::stale_cache:
    case Errc::stage:
      return false;
    default:
      return true;
  }
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(errc_name(code)) + " error: " + message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& message) { throw Error(code, message); }

}  // namespace ipt
