#include "hyperv2x/rng.hpp"

#include <cmath>
#include <sstream>

namespace hyperv2x {

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // Box-Muller. u1 is shifted away from 0 so log() stays finite.
  const double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
  const double u2 = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double a = 6.283185307179586476925286766559 * u2;
  spare_ = r * std::sin(a);
  has_spare_ = true;
  return r * std::cos(a);
}

std::string Rng::serialize() const {
  std::ostringstream os;
  os << state_ << " " << (has_spare_ ? 1 : 0) << " ";
  os.precision(17);
  os << spare_;
  return os.str();
}

Rng Rng::deserialize(const std::string& s) {
  std::istringstream is(s);
  std::uint64_t state = 0;
  int has_spare = 0;
  double spare = 0.0;
  if (!(is >> state >> has_spare >> spare))
    throw std::invalid_argument("Rng::deserialize: malformed state string");
  Rng r(0);
  r.state_ = state;
  r.has_spare_ = has_spare != 0;
  r.spare_ = spare;
  return r;
}

}  // namespace hyperv2x
