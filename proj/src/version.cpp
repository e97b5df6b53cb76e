#include "cmlf/version.hpp"

namespace cmlf {

const char* version() { return "0.1.0"; }

}  // namespace cmlf
