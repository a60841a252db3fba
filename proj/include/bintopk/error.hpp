#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace bintopk {

// Malformed external input: fvecs/ivecs payloads, key=value spec files, CSV.
// byte_offset is the position of the defect when it is known (-1 otherwise);
// origin names the file or source.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& message, std::string origin = "", std::int64_t byte_offset = -1)
      : std::runtime_error(compose(message, origin, byte_offset)),
        origin_(std::move(origin)),
        byte_offset_(byte_offset) {}

  const std::string& origin() const noexcept { return origin_; }
  std::int64_t byte_offset() const noexcept { return byte_offset_; }

 private:
  static std::string compose(const std::string& message, const std::string& origin,
                             std::int64_t byte_offset) {
    std::string out;
    if (!origin.empty()) out += origin + ": ";
    out += message;
    if (byte_offset >= 0) out += " (byte offset " + std::to_string(byte_offset) + ")";
    return out;
  }

  std::string origin_;
  std::int64_t byte_offset_;
};

}  // namespace bintopk
