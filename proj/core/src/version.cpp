#include "agmax/version.hpp"

#ifndef AGMAX_VERSION
#define AGMAX_VERSION "0.0.0"
#endif
#ifndef AGMAX_GIT_REV
#define AGMAX_GIT_REV "unversioned"
#endif

namespace agmax {

const char* version_string() {
  return "agmax-" AGMAX_VERSION "+" AGMAX_GIT_REV;
}

}  // namespace agmax
