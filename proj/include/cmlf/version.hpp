#pragma once

namespace cmlf {

const char* version();

}  // namespace cmlf
