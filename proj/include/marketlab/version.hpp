#pragma once

namespace marketlab {

inline const char* version_string() { return "0.1.0"; }

} // namespace marketlab
