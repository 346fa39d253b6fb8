#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace diffuse {

// Malformed or inconsistent input data. `record()` is the 1-based record
// number when the problem is tied to one record of a file.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what,
                     std::optional<std::size_t> record = std::nullopt)
      : std::runtime_error(record ? what + " (record " +
                                        std::to_string(*record) + ")"
                                  : what),
        record_(record) {}

  std::optional<std::size_t> record() const { return record_; }

 private:
  std::optional<std::size_t> record_;
};

}  // namespace diffuse
