#pragma once

#include <charconv>
#include <ostream>

namespace deepcas {

// Shortest decimal text that parses back to the same double.
struct Num {
  double value;
};

inline std::ostream& operator<<(std::ostream& os, Num n) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), n.value);
  return os.write(buf, res.ptr - buf);
}

}  // namespace deepcas
