#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace diffuse {

/// Id-aligned rows of fixed-dimension embedding vectors.
///
/// Rows are stored row-major in 64-bit floats regardless of the on-disk
/// precision. Ids are unique and every entry is finite; the constructor
/// enforces both.
class EmbeddingMatrix {
 public:
  EmbeddingMatrix() = default;
  EmbeddingMatrix(std::vector<std::string> ids, std::size_t dim,
                  std::vector<double> values);

  std::size_t size() const { return ids_.size(); }
  std::size_t dim() const { return dim_; }
  const std::vector<std::string>& ids() const { return ids_; }
  const std::vector<double>& values() const { return values_; }

  std::span<const double> row(std::size_t i) const {
    return {values_.data() + i * dim_, dim_};
  }
  std::optional<std::size_t> position(std::string_view id) const;

  friend bool operator==(const EmbeddingMatrix& a, const EmbeddingMatrix& b) {
    return a.dim_ == b.dim_ && a.ids_ == b.ids_ && a.values_ == b.values_;
  }

 private:
  std::vector<std::string> ids_;
  std::size_t dim_ = 0;
  std::vector<double> values_;
  std::unordered_map<std::string, std::size_t> index_;
};

enum class EmbeddingFormat { kJsonl, kBinary };

// Reads a whole embedding stream. Errors carry the 1-based record index.
EmbeddingMatrix load_embeddings(std::istream& in, EmbeddingFormat format);
void write_embeddings(std::ostream& out, const EmbeddingMatrix& m,
                      EmbeddingFormat format);

// `.bin` selects the binary format, anything else JSONL.
EmbeddingFormat format_for_path(const std::filesystem::path& path);
EmbeddingMatrix load_embeddings_file(const std::filesystem::path& path);
void write_embeddings_file(const std::filesystem::path& path,
                           const EmbeddingMatrix& m);

// How the two output embeddings of one example are combined. kIdentity
// wraps a single matrix (used for input-embedding clustering).
enum class PairMode { kSubtract, kConcat, kAdd, kIdentity };

std::string_view to_string(PairMode mode);
PairMode parse_pair_mode(std::string_view name);

/// Per-example combined vectors for a model pair, with cached norms.
class DifferenceSpace {
 public:
  DifferenceSpace() = default;
  DifferenceSpace(std::vector<std::string> ids, PairMode mode, std::size_t dim,
                  std::vector<double> values);

  std::size_t size() const { return ids_.size(); }
  std::size_t dim() const { return dim_; }
  PairMode mode() const { return mode_; }
  const std::vector<std::string>& ids() const { return ids_; }
  const std::vector<double>& values() const { return values_; }
  const std::vector<double>& norms() const { return norms_; }

  std::span<const double> row(std::size_t i) const {
    return {values_.data() + i * dim_, dim_};
  }
  double norm(std::size_t i) const { return norms_[i]; }
  std::optional<std::size_t> position(std::string_view id) const;

  // Examples present in only one source matrix, dropped during alignment.
  std::size_t dropped() const { return dropped_; }
  void set_dropped(std::size_t n) { dropped_ = n; }

  // Rows at the given positions, in the given order.
  DifferenceSpace subset(std::span<const std::size_t> positions) const;

 private:
  std::vector<std::string> ids_;
  PairMode mode_ = PairMode::kSubtract;
  std::size_t dim_ = 0;
  std::vector<double> values_;
  std::vector<double> norms_;
  std::unordered_map<std::string, std::size_t> index_;
  std::size_t dropped_ = 0;
};

DifferenceSpace pair_space(const EmbeddingMatrix& a, const EmbeddingMatrix& b,
                           PairMode mode = PairMode::kSubtract);

// The matrix rows used directly as the clustering space.
DifferenceSpace identity_space(const EmbeddingMatrix& m);

}  // namespace diffuse
