#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace qgen {

std::string sha256_hex(std::string_view data);

// Hash of a file's bytes; throws kIo when unreadable.
std::string sha256_file(const std::string& path);

// Hash over several files in the given order.
std::string sha256_files(const std::vector<std::string>& paths);

}  // namespace qgen
