#pragma once

#include <string>

namespace routecast {

// Whole-file helpers; throw IoError. write_file goes through a temporary
// file and a rename so readers never see a partial file.
std::string read_file(const std::string &path);
void write_file(const std::string &path, const std::string &data);

} // namespace routecast
