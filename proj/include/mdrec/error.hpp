#pragma once

#include <stdexcept>
#include <string>

namespace mdrec {

// Error categories. Each externally visible failure mode gets its own code
// so callers (and tests) can tell them apart without parsing messages.
enum class Errc {
  io,                 // file missing / unreadable / unwritable
  bad_magic,          // container magic mismatch
  bad_version,        // container version mismatch
  truncated,          // file ends mid-record
  malformed,          // syntactically broken file content
  duplicate_key,      // duplicate id where uniqueness is required
  missing_file,       // referenced file does not exist
  unspellable,        // text cannot be tokenized with the alphabet
  infeasible_target,  // label sequence longer than the frame count allows
  empty_input,        // operation needs nonempty input
  invalid_config,     // configuration violates its invariants
  numeric,            // non-finite values or failed numeric check
};

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& msg) : std::runtime_error(msg), code_(code) {}
  Errc code() const { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& msg) { throw Error(code, msg); }

}  // namespace mdrec
