#include "deepcas/random.hpp"

#include <sstream>
#include <stdexcept>

namespace deepcas {

std::string RandomSource::serialize() const {
  std::ostringstream os;
  os << engine_ << ' ' << normal_;
  return os.str();
}

RandomSource RandomSource::deserialize(const std::string& state) {
  RandomSource out;
  std::istringstream is(state);
  is >> out.engine_ >> out.normal_;
  if (!is) throw std::invalid_argument("malformed random stream state");
  return out;
}

}  // namespace deepcas
