#include "diffuse/vectors.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <iterator>
#include <ostream>
#include <stdexcept>
#include <unordered_set>

#include <json.hpp>

#include "diffuse/error.hpp"

namespace diffuse {
namespace {

using nlohmann::json;

constexpr std::array<char, 4> kMagic = {'D', 'F', 'U', 'V'};
constexpr std::uint8_t kVersion = 0x01;

std::unordered_map<std::string, std::size_t> build_index(
    const std::vector<std::string>& ids) {
  std::unordered_map<std::string, std::size_t> index;
  index.reserve(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (!index.emplace(ids[i], i).second) {
      throw DataError("duplicate id '" + ids[i] + "'", i + 1);
    }
  }
  return index;
}

void put_u32(std::ostream& out, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 4);
}

std::uint32_t get_u32(std::istream& in, const char* what) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) {
    throw DataError(std::string("truncated binary header: ") + what);
  }
  return static_cast<std::uint32_t>(b[0]) |
         (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

EmbeddingMatrix load_jsonl(std::istream& in) {
  std::vector<std::string> ids;
  std::vector<double> values;
  std::size_t dim = 0;
  std::string line;
  std::size_t record = 0;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ++record;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError(std::string("malformed JSON: ") + e.what(), record);
    }
    if (!obj.is_object() || !obj.contains("id") || !obj["id"].is_string() ||
        !obj.contains("vector") || !obj["vector"].is_array()) {
      throw DataError("record must be {\"id\": string, \"vector\": [numbers]}",
                      record);
    }
    const auto& vec = obj["vector"];
    if (record == 1) {
      dim = vec.size();
      if (dim == 0) throw DataError("empty vector", record);
    } else if (vec.size() != dim) {
      throw DataError("dimension mismatch: expected " + std::to_string(dim) +
                          ", got " + std::to_string(vec.size()),
                      record);
    }
    for (const auto& v : vec) {
      if (!v.is_number()) throw DataError("non-numeric vector entry", record);
      double x = v.get<double>();
      if (!std::isfinite(x)) throw DataError("non-finite entry", record);
      values.push_back(x);
    }
    ids.push_back(obj["id"].get<std::string>());
  }
  if (ids.empty()) throw DataError("no embedding records");
  return EmbeddingMatrix(std::move(ids), dim, std::move(values));
}

EmbeddingMatrix load_binary(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || !std::equal(kMagic.begin(), kMagic.end(), magic)) {
    throw DataError("bad magic: not a DFUV embedding file");
  }
  char version = 0;
  if (!in.get(version) || static_cast<std::uint8_t>(version) != kVersion) {
    throw DataError("unsupported DFUV version");
  }
  const std::uint32_t count = get_u32(in, "count");
  const std::uint32_t dim = get_u32(in, "dim");
  if (count == 0 || dim == 0) throw DataError("empty embedding file");
  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(count) * dim);
  for (std::uint32_t r = 0; r < count; ++r) {
    for (std::uint32_t c = 0; c < dim; ++c) {
      unsigned char b[4];
      if (!in.read(reinterpret_cast<char*>(b), 4)) {
        throw DataError("truncated vector data", r + 1);
      }
      std::uint32_t bits = static_cast<std::uint32_t>(b[0]) |
                           (static_cast<std::uint32_t>(b[1]) << 8) |
                           (static_cast<std::uint32_t>(b[2]) << 16) |
                           (static_cast<std::uint32_t>(b[3]) << 24);
      float f = std::bit_cast<float>(bits);
      if (!std::isfinite(f)) throw DataError("non-finite entry", r + 1);
      values.push_back(static_cast<double>(f));
    }
  }
  std::string trailer((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
  json id_array;
  try {
    id_array = json::parse(trailer);
  } catch (const json::parse_error& e) {
    throw DataError(std::string("malformed id trailer: ") + e.what());
  }
  if (!id_array.is_array() || id_array.size() != count) {
    throw DataError("id trailer must be an array of " + std::to_string(count) +
                    " strings");
  }
  std::vector<std::string> ids;
  ids.reserve(count);
  for (std::size_t i = 0; i < id_array.size(); ++i) {
    if (!id_array[i].is_string()) throw DataError("id is not a string", i + 1);
    ids.push_back(id_array[i].get<std::string>());
  }
  return EmbeddingMatrix(std::move(ids), dim, std::move(values));
}

void write_jsonl(std::ostream& out, const EmbeddingMatrix& m) {
  for (std::size_t i = 0; i < m.size(); ++i) {
    auto row = m.row(i);
    json obj = {{"id", m.ids()[i]},
                {"vector", std::vector<double>(row.begin(), row.end())}};
    out << obj.dump() << '\n';
  }
}

void write_binary(std::ostream& out, const EmbeddingMatrix& m) {
  out.write(kMagic.data(), kMagic.size());
  out.put(static_cast<char>(kVersion));
  put_u32(out, static_cast<std::uint32_t>(m.size()));
  put_u32(out, static_cast<std::uint32_t>(m.dim()));
  for (double v : m.values()) {
    const float f = static_cast<float>(v);
    if (!std::isfinite(f)) throw DataError("value overflows float32");
    put_u32(out, std::bit_cast<std::uint32_t>(f));
  }
  out << json(m.ids()).dump();
}

std::vector<double> compute_norms(const std::vector<double>& values,
                                  std::size_t n, std::size_t dim) {
  std::vector<double> norms(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t c = 0; c < dim; ++c) {
      double x = values[i * dim + c];
      s += x * x;
    }
    norms[i] = std::sqrt(s);
  }
  return norms;
}

}  // namespace

EmbeddingMatrix::EmbeddingMatrix(std::vector<std::string> ids, std::size_t dim,
                                 std::vector<double> values)
    : ids_(std::move(ids)), dim_(dim), values_(std::move(values)) {
  if (dim_ == 0) throw DataError("embedding dimension must be positive");
  if (values_.size() != ids_.size() * dim_) {
    throw DataError("embedding value count does not match ids x dim");
  }
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i])) {
      throw DataError("non-finite entry", i / dim_ + 1);
    }
  }
  index_ = build_index(ids_);
}

std::optional<std::size_t> EmbeddingMatrix::position(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

EmbeddingMatrix load_embeddings(std::istream& in, EmbeddingFormat format) {
  return format == EmbeddingFormat::kJsonl ? load_jsonl(in) : load_binary(in);
}

void write_embeddings(std::ostream& out, const EmbeddingMatrix& m,
                      EmbeddingFormat format) {
  if (format == EmbeddingFormat::kJsonl) {
    write_jsonl(out, m);
  } else {
    write_binary(out, m);
  }
}

EmbeddingFormat format_for_path(const std::filesystem::path& path) {
  return path.extension() == ".bin" ? EmbeddingFormat::kBinary
                                    : EmbeddingFormat::kJsonl;
}

EmbeddingMatrix load_embeddings_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open embeddings file " + path.string());
  return load_embeddings(in, format_for_path(path));
}

void write_embeddings_file(const std::filesystem::path& path,
                           const EmbeddingMatrix& m) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_embeddings(out, m, format_for_path(path));
}

std::string_view to_string(PairMode mode) {
  switch (mode) {
    case PairMode::kSubtract: return "subtract";
    case PairMode::kConcat: return "concat";
    case PairMode::kAdd: return "add";
    case PairMode::kIdentity: return "identity";
  }
  return "subtract";
}

PairMode parse_pair_mode(std::string_view name) {
  if (name == "subtract") return PairMode::kSubtract;
  if (name == "concat") return PairMode::kConcat;
  if (name == "add") return PairMode::kAdd;
  if (name == "identity") return PairMode::kIdentity;
  throw std::invalid_argument("unknown pair mode '" + std::string(name) + "'");
}

DifferenceSpace::DifferenceSpace(std::vector<std::string> ids, PairMode mode,
                                 std::size_t dim, std::vector<double> values)
    : ids_(std::move(ids)), mode_(mode), dim_(dim), values_(std::move(values)) {
  if (dim_ == 0 || values_.size() != ids_.size() * dim_) {
    throw DataError("difference space shape mismatch");
  }
  norms_ = compute_norms(values_, ids_.size(), dim_);
  index_ = build_index(ids_);
}

std::optional<std::size_t> DifferenceSpace::position(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

DifferenceSpace DifferenceSpace::subset(
    std::span<const std::size_t> positions) const {
  std::vector<std::string> ids;
  std::vector<double> values;
  ids.reserve(positions.size());
  values.reserve(positions.size() * dim_);
  for (std::size_t p : positions) {
    if (p >= size()) throw std::out_of_range("subset position out of range");
    ids.push_back(ids_[p]);
    auto r = row(p);
    values.insert(values.end(), r.begin(), r.end());
  }
  return DifferenceSpace(std::move(ids), mode_, dim_, std::move(values));
}

DifferenceSpace pair_space(const EmbeddingMatrix& a, const EmbeddingMatrix& b,
                           PairMode mode) {
  if (mode == PairMode::kIdentity) {
    throw std::invalid_argument("pair_space: identity mode takes one matrix");
  }
  if (a.dim() != b.dim()) {
    throw DataError("dimension mismatch between embedding matrices: " +
                    std::to_string(a.dim()) + " vs " + std::to_string(b.dim()));
  }
  const std::size_t dim = a.dim();
  const std::size_t out_dim = mode == PairMode::kConcat ? 2 * dim : dim;
  std::vector<std::string> ids;
  std::vector<double> values;
  for (std::size_t i = 0; i < a.size(); ++i) {
    auto j = b.position(a.ids()[i]);
    if (!j) continue;
    ids.push_back(a.ids()[i]);
    auto ra = a.row(i);
    auto rb = b.row(*j);
    switch (mode) {
      case PairMode::kSubtract:
        for (std::size_t c = 0; c < dim; ++c) values.push_back(ra[c] - rb[c]);
        break;
      case PairMode::kAdd:
        for (std::size_t c = 0; c < dim; ++c) values.push_back(ra[c] + rb[c]);
        break;
      case PairMode::kConcat:
        values.insert(values.end(), ra.begin(), ra.end());
        values.insert(values.end(), rb.begin(), rb.end());
        break;
      case PairMode::kIdentity:
        break;
    }
  }
  if (ids.size() < 2) {
    throw DataError("fewer than 2 common ids between embedding matrices");
  }
  const std::size_t common = ids.size();
  DifferenceSpace space(std::move(ids), mode, out_dim, std::move(values));
  space.set_dropped((a.size() - common) + (b.size() - common));
  return space;
}

DifferenceSpace identity_space(const EmbeddingMatrix& m) {
  return DifferenceSpace(m.ids(), PairMode::kIdentity, m.dim(), m.values());
}

}  // namespace diffuse
