#include "diffuse/embed_client.hpp"

#include <algorithm>
#include <cstdlib>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

namespace diffuse {
namespace {

using nlohmann::json;

struct Url {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

Url split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw EmbedError("embedding endpoint must be an absolute URL: " + url);
  }
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

bool transient(int status) { return status == 429 || status >= 500; }

std::vector<std::vector<double>> post_batch(httplib::Client& client,
                                            const std::string& path,
                                            const EmbedClientOptions& options,
                                            const json& body,
                                            std::size_t expected) {
  httplib::Headers headers;
  if (!options.bearer_token.empty()) {
    headers.emplace("Authorization", "Bearer " + options.bearer_token);
  }
  const std::string payload = body.dump();
  auto backoff = options.initial_backoff;
  std::string last_error;
  int last_status = 0;
  for (int attempt = 1; attempt <= options.max_attempts; ++attempt) {
    auto res = client.Post(path, headers, payload, "application/json");
    if (res && res->status >= 200 && res->status < 300) {
      json reply;
      try {
        reply = json::parse(res->body);
      } catch (const json::parse_error& e) {
        throw EmbedError(std::string("embedding service sent invalid JSON: ") +
                             e.what(),
                         res->status);
      }
      if (!reply.contains("vectors") || !reply["vectors"].is_array()) {
        throw EmbedError("embedding reply lacks a \"vectors\" array",
                         res->status);
      }
      if (reply["vectors"].size() != expected) {
        throw EmbedError("count mismatch: sent " + std::to_string(expected) +
                             " texts, received " +
                             std::to_string(reply["vectors"].size()) +
                             " vectors",
                         res->status);
      }
      try {
        return reply["vectors"].get<std::vector<std::vector<double>>>();
      } catch (const json::exception& e) {
        throw EmbedError(std::string("malformed vectors: ") + e.what(),
                         res->status);
      }
    }
    if (res) {
      last_status = res->status;
      last_error = "HTTP " + std::to_string(res->status);
      if (!transient(res->status)) break;
    } else {
      last_status = 0;
      last_error = httplib::to_string(res.error());
    }
    if (attempt < options.max_attempts) {
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
  }
  throw EmbedError("embedding request failed: " + last_error, last_status);
}

}  // namespace

std::optional<std::string> default_embed_endpoint() {
  const char* v = std::getenv("EMBED_ENDPOINT");
  if (v == nullptr || *v == '\0') return std::nullopt;
  return std::string(v);
}

EmbeddingMatrix embed_texts(
    const EmbedClientOptions& options,
    std::span<const std::pair<std::string, std::string>> texts) {
  if (texts.empty()) throw EmbedError("no texts to embed");
  if (options.batch_size == 0) throw EmbedError("batch_size must be positive");
  const Url url = split_url(options.endpoint);
  httplib::Client client(url.origin);
  client.set_connection_timeout(options.timeout);
  client.set_read_timeout(options.timeout);
  client.set_write_timeout(options.timeout);

  std::vector<std::string> ids;
  std::vector<double> values;
  std::size_t dim = 0;
  for (std::size_t start = 0; start < texts.size(); start += options.batch_size) {
    const std::size_t end = std::min(texts.size(), start + options.batch_size);
    json batch = json::array();
    for (std::size_t i = start; i < end; ++i) batch.push_back(texts[i].second);
    auto vectors = post_batch(client, url.path, options, {{"texts", batch}},
                              end - start);
    for (std::size_t i = 0; i < vectors.size(); ++i) {
      if (dim == 0) dim = vectors[i].size();
      if (vectors[i].size() != dim || dim == 0) {
        throw EmbedError("dimension drift: expected " + std::to_string(dim) +
                         ", got " + std::to_string(vectors[i].size()));
      }
      ids.push_back(texts[start + i].first);
      values.insert(values.end(), vectors[i].begin(), vectors[i].end());
    }
  }
  return EmbeddingMatrix(std::move(ids), dim, std::move(values));
}

}  // namespace diffuse
