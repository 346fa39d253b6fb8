#pragma once

#include <chrono>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>

#include "diffuse/vectors.hpp"

namespace diffuse {

class EmbedError : public std::runtime_error {
 public:
  explicit EmbedError(const std::string& what, int status = 0)
      : std::runtime_error(what), status_(status) {}
  // HTTP status of the last attempt, 0 when no response was received.
  int status() const { return status_; }

 private:
  int status_;
};

struct EmbedClientOptions {
  std::string endpoint;  // e.g. http://host:8080/embed
  std::size_t batch_size = 64;
  std::string bearer_token;
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{200};
  std::chrono::seconds timeout{30};
};

// Value of EMBED_ENDPOINT, if set and non-empty.
std::optional<std::string> default_embed_endpoint();

// POSTs {"texts": [...]} per batch and expects {"vectors": [[...], ...]} in
// the same order. Transient failures (no response, 429, 5xx) are retried
// with exponential backoff.
EmbeddingMatrix embed_texts(
    const EmbedClientOptions& options,
    std::span<const std::pair<std::string, std::string>> texts);

}  // namespace diffuse
