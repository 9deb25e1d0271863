#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace garment {

std::string sha256_hex(const void* data, size_t size);
std::string sha256_hex(const std::string& data);
std::string sha256_hex(const std::vector<uint8_t>& data);
std::string sha256_file_hex(const std::string& path);

}  // namespace garment
