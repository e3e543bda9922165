#pragma once

#include <string>

namespace sadiar::io {

// Write via a temp file in the same directory, then rename over the target,
// so readers never observe a partial file.
void write_file_atomic(const std::string& path, const std::string& bytes);

std::string read_file(const std::string& path);  // DataError if unreadable

// Fixed float-to-text used anywhere reproducibility is asserted byte-wise:
// shortest of %.6g (6 significant digits).
std::string format_g6(double v);

}  // namespace sadiar::io
