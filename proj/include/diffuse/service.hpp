#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>

#include <json.hpp>

#include "diffuse/embed_client.hpp"
#include "diffuse/iterative.hpp"

namespace httplib {
class Server;
}

namespace diffuse {

struct ServiceOptions {
  std::filesystem::path store_dir = "sessions";
  // Used when a create request carries texts instead of vectors.
  std::optional<EmbedClientOptions> embed;
};

struct ServiceResponse {
  int status = 200;
  nlohmann::json body;
};

/// Annotation sessions for human oracles, persisted under the store
/// directory as <id>/meta.json, space.json, outputs.json and an append-only
/// events.jsonl. Sessions found in the store are restored by replay.
///
/// Outputs are shown as left/right; which side is model A is derived per
/// example from a per-session secret that never leaves the server.
class SessionService {
 public:
  explicit SessionService(ServiceOptions options);

  ServiceResponse create(const nlohmann::json& request);
  ServiceResponse next(const std::string& id);
  ServiceResponse submit(const std::string& id, const nlohmann::json& request);
  ServiceResponse status(const std::string& id);

  // Routes for the four session endpoints plus GET /healthz.
  void mount(httplib::Server& server);

  std::size_t session_count() const;

 private:
  struct Entry;

  std::shared_ptr<Entry> find(const std::string& id) const;
  void restore();
  void persist(Entry& e);

  ServiceOptions options_;
  mutable std::shared_mutex mutex_;
  std::unordered_map<std::string, std::shared_ptr<Entry>> sessions_;
};

// True when the example's left slot shows model B.
bool swapped_sides(std::uint64_t secret, const std::string& example_id);

// Blocks serving on host:port until the server is stopped.
int run_service(const ServiceOptions& options, const std::string& host, int port);

}  // namespace diffuse
