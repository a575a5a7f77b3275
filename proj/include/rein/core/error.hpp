#pragma once

#include <sstream>
#include <stdexcept>
#include <string>

namespace rein {

// Base of all library errors. Specific categories below so callers can
// distinguish bad arguments from runtime blowups and I/O trouble.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InvalidArgument : Error {
  using Error::Error;
};

// Shape disagreement between tensors; message names the op and both shapes.
struct ShapeError : InvalidArgument {
  using InvalidArgument::InvalidArgument;
};

// Non-finite values where finite ones are required (integrator blowup,
// diverged training step).
struct NumericError : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

namespace detail {

inline void format_into(std::ostringstream&) {}

template <class A, class... Rest>
void format_into(std::ostringstream& os, const A& a, const Rest&... rest) {
  os << a;
  format_into(os, rest...);
}

}  // namespace detail

template <class... Args>
std::string strcat_msg(const Args&... args) {
  std::ostringstream os;
  detail::format_into(os, args...);
  return os.str();
}

template <class E = Error, class... Args>
[[noreturn]] void fail(const Args&... args) {
  throw E(strcat_msg(args...));
}

template <class E = Error, class... Args>
void check(bool cond, const Args&... args) {
  if (!cond) fail<E>(args...);
}

}  // namespace rein
