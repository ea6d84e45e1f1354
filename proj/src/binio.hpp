#pragma once

#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "mdrec/error.hpp"

// Little-endian binary primitives for the checkpoint container.
namespace mdrec::binio {

inline void write_bytes(std::ostream& os, const void* p, size_t n) {
  os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
  if (!os) fail(Errc::io, "binary write failed");
}

inline void read_bytes(std::istream& is, void* p, size_t n, const std::string& what) {
  is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (static_cast<size_t>(is.gcount()) != n)
    fail(Errc::truncated, "file truncated while reading " + what);
}

template <class T>
void write_pod(std::ostream& os, T v) {
  write_bytes(os, &v, sizeof(T));
}

template <class T>
T read_pod(std::istream& is, const std::string& what) {
  T v;
  read_bytes(is, &v, sizeof(T), what);
  return v;
}

inline void write_u16(std::ostream& os, uint16_t v) { write_pod(os, v); }
inline void write_u32(std::ostream& os, uint32_t v) { write_pod(os, v); }
inline void write_u64(std::ostream& os, uint64_t v) { write_pod(os, v); }
inline void write_f64(std::ostream& os, double v) { write_pod(os, v); }

inline uint16_t read_u16(std::istream& is, const std::string& w) { return read_pod<uint16_t>(is, w); }
inline uint32_t read_u32(std::istream& is, const std::string& w) { return read_pod<uint32_t>(is, w); }
inline uint64_t read_u64(std::istream& is, const std::string& w) { return read_pod<uint64_t>(is, w); }
inline double read_f64(std::istream& is, const std::string& w) { return read_pod<double>(is, w); }

inline void write_str(std::ostream& os, const std::string& s) {
  write_u64(os, s.size());
  write_bytes(os, s.data(), s.size());
}

inline std::string read_str(std::istream& is, const std::string& what) {
  uint64_t n = read_u64(is, what);
  std::string s(n, '\0');
  if (n > 0) read_bytes(is, s.data(), n, what);
  return s;
}

}  // namespace mdrec::binio
