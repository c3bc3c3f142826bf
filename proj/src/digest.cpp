#include "ofa/digest.hpp"

#include "ofa/errors.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

namespace ofa {

std::string Digest::hex() const {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << state_;
  return os.str();
}

std::string digest_bytes(const void* data, std::size_t size) {
  Digest d;
  d.update(data, size);
  return d.hex();
}

std::string digest_string(const std::string& s) { return digest_bytes(s.data(), s.size()); }

std::string digest_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("digest_file: cannot open " + path);
  Digest d;
  char buf[65536];
  while (in) {
    in.read(buf, sizeof(buf));
    d.update(buf, static_cast<std::size_t>(in.gcount()));
  }
  return d.hex();
}

}  // namespace ofa
