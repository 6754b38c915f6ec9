#pragma once

namespace agmax {

/// git-describe-style build identifier, e.g. "agmax-0.1.0+3f2a9c1".
const char* version_string();

}  // namespace agmax
