#include <doctest.h>

#include <cmath>
#include <cstring>
#include <limits>
#include <sstream>

#include "diffuse/error.hpp"
#include "diffuse/vectors.hpp"
#include "helpers.hpp"

using namespace diffuse;

namespace {

EmbeddingMatrix parse(const std::string& text) {
  std::istringstream in(text);
  return load_embeddings(in, EmbeddingFormat::kJsonl);
}

std::optional<std::size_t> record_of(const std::string& text) {
  try {
    parse(text);
  } catch (const DataError& e) {
    return e.record();
  }
  return std::nullopt;
}

}  // namespace

TEST_SUITE("vectors") {
  TEST_CASE("jsonl records load in order") {
    auto m = parse("{\"id\":\"x\",\"vector\":[1,2]}\n\n{\"id\":\"y\",\"vector\":[3.5,-4]}\n");
    REQUIRE(m.size() == 2);
    CHECK(m.dim() == 2);
    CHECK(m.ids()[1] == "y");
    CHECK(m.row(1)[0] == 3.5);
    CHECK(*m.position("x") == 0);
    CHECK_FALSE(m.position("z"));
  }

  TEST_CASE("jsonl errors carry the record index") {
    CHECK(record_of("{\"id\":\"x\",\"vector\":[1,2]}\n{\"id\":\"y\",\"vector\":[1]}\n") == 2);
    CHECK(record_of("{\"id\":\"x\",\"vector\":[1,2]}\nnot json\n") == 2);
    CHECK(record_of("{\"id\":\"x\",\"vector\":[1,\"a\"]}\n") == 1);
    CHECK(record_of("{\"vector\":[1]}\n") == 1);
    CHECK(record_of("{\"id\":\"x\",\"vector\":[1]}\n{\"id\":\"x\",\"vector\":[2]}\n") == 2);
    CHECK_THROWS_AS(parse(""), DataError);
    CHECK_THROWS_AS(EmbeddingMatrix({"a"}, 1, {NAN}), DataError);
  }

  TEST_CASE("binary round trip is bit exact") {
    auto s = testing_util::gaussian_space(37, 9, 3);
    std::vector<double> v;
    for (double x : s.values()) v.push_back(static_cast<float>(x));
    v[0] = -0.0;
    v[1] = std::numeric_limits<float>::denorm_min();
    v[2] = std::numeric_limits<float>::max();
    EmbeddingMatrix m(s.ids(), 9, v);
    std::stringstream buf;
    write_embeddings(buf, m, EmbeddingFormat::kBinary);
    auto back = load_embeddings(buf, EmbeddingFormat::kBinary);
    CHECK(back == m);
    CHECK(std::signbit(back.values()[0]));
    CHECK(std::memcmp(back.values().data(), m.values().data(),
                      m.values().size() * sizeof(double)) == 0);
  }

  TEST_CASE("binary header is validated") {
    std::stringstream bad("XXXX\x01");
    CHECK_THROWS_AS(load_embeddings(bad, EmbeddingFormat::kBinary), DataError);

    EmbeddingMatrix m({"a", "b"}, 2, {1, 2, 3, 4});
    std::stringstream buf;
    write_embeddings(buf, m, EmbeddingFormat::kBinary);
    std::string bytes = buf.str();
    std::stringstream truncated(bytes.substr(0, 15));
    CHECK_THROWS_AS(load_embeddings(truncated, EmbeddingFormat::kBinary), DataError);

    EmbeddingMatrix huge({"a"}, 1, {1e300});
    std::stringstream out;
    CHECK_THROWS_AS(write_embeddings(out, huge, EmbeddingFormat::kBinary), DataError);
  }

  TEST_CASE("file helpers pick the format from the extension") {
    testing_util::TempDir dir;
    EmbeddingMatrix m({"a", "b"}, 3, {1, 2, 3, 4, 5, 6.25});
    write_embeddings_file(dir.path() / "m.bin", m);
    write_embeddings_file(dir.path() / "m.jsonl", m);
    CHECK(load_embeddings_file(dir.path() / "m.bin") == m);
    CHECK(load_embeddings_file(dir.path() / "m.jsonl") == m);
    CHECK_THROWS_AS(load_embeddings_file(dir.path() / "missing.bin"), DataError);
  }

  TEST_CASE("pair spaces") {
    EmbeddingMatrix a({"p", "q", "r"}, 2, {1, 2, 3, 4, 5, 6});
    EmbeddingMatrix b({"r", "p", "s"}, 2, {10, 20, 30, 40, 50, 60});

    auto d = pair_space(a, b);
    REQUIRE(d.size() == 2);
    CHECK(d.ids() == std::vector<std::string>{"p", "r"});
    CHECK(d.dropped() == 2);
    CHECK(d.row(0)[0] == 1 - 30);
    CHECK(d.row(1)[1] == 6 - 20);
    CHECK(d.norm(0) == doctest::Approx(std::hypot(29, 38)));

    auto c = pair_space(a, b, PairMode::kConcat);
    CHECK(c.dim() == 4);
    CHECK(std::vector<double>(c.row(0).begin(), c.row(0).end()) ==
          std::vector<double>{1, 2, 30, 40});

    auto s = pair_space(a, b, PairMode::kAdd);
    CHECK(s.row(1)[0] == 15);

    EmbeddingMatrix wide({"p", "r"}, 3, {1, 2, 3, 4, 5, 6});
    CHECK_THROWS_AS(pair_space(a, wide), DataError);
    EmbeddingMatrix lonely({"p"}, 2, {0, 0});
    CHECK_THROWS_AS(pair_space(a, lonely), DataError);
    CHECK(parse_pair_mode(to_string(PairMode::kConcat)) == PairMode::kConcat);
    CHECK_THROWS(parse_pair_mode("multiply"));
  }

  TEST_CASE("subset keeps rows and ids together") {
    auto s = testing_util::gaussian_space(10, 4, 1);
    std::vector<std::size_t> pos{7, 2, 5};
    auto sub = s.subset(pos);
    CHECK(sub.size() == 3);
    CHECK(sub.ids()[0] == s.ids()[7]);
    CHECK(sub.norm(2) == s.norm(5));
    CHECK(sub.row(1)[3] == s.row(2)[3]);
    CHECK(*sub.position(s.ids()[5]) == 2);
  }
}
