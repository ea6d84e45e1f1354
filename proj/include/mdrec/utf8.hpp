#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace mdrec {

// Minimal UTF-8 codec; malformed input raises Errc::malformed.
std::vector<uint32_t> utf8_decode(const std::string& s);
std::string utf8_encode(const std::vector<uint32_t>& cps);
std::string utf8_encode_one(uint32_t cp);

}  // namespace mdrec
