#include "betae/kg.hpp"

#include <filesystem>
#include <fstream>

#include "betae/errors.hpp"
#include "betae/rng.hpp"
#include "doctest.h"
#include "support/toy_graphs.hpp"

using namespace betae;
using namespace betae::testing;

namespace {

const std::string kTmp = "tmp_test_kg";

std::string write_file(const std::string& name, const std::string& content) {
  std::filesystem::create_directories(kTmp);
  const std::string path = kTmp + "/" + name;
  std::ofstream out(path, std::ios::trunc);
  out << content;
  return path;
}

}  // namespace

TEST_CASE("load_vocab reads id/name pairs") {
  const auto path = write_file("vocab.dict", "0\talpha\n1\tbeta\n2\tgamma\n");
  const Vocab vocab = load_vocab(path);
  CHECK(vocab.size() == 3);
  CHECK(vocab.names[1] == "beta");
  CHECK(vocab.ids.at("gamma") == 2);
}

TEST_CASE("load_vocab accepts empty files") {
  const auto path = write_file("empty.dict", "");
  CHECK(load_vocab(path).size() == 0);
}

TEST_CASE("load_vocab format errors") {
  CHECK_THROWS_AS(load_vocab(write_file("dup_id.dict", "0\ta\n0\tb\n")),
                  FormatError);
  CHECK_THROWS_AS(load_vocab(write_file("dup_name.dict", "0\ta\n1\ta\n")),
                  FormatError);
  CHECK_THROWS_AS(load_vocab(write_file("bad_id.dict", "x\ta\n")),
                  FormatError);
  CHECK_THROWS_AS(load_vocab(write_file("sparse.dict", "0\ta\n2\tb\n")),
                  FormatError);
  CHECK_THROWS_AS(load_vocab(kTmp + "/does_not_exist.dict"), FormatError);
}

TEST_CASE("load_triples reads and validates") {
  const auto path = write_file("one.txt", "0\t0\t1\n");
  const auto triples = load_triples(path, 2, 1);
  REQUIRE(triples.size() == 1);
  CHECK(triples[0] == Triple{0, 0, 1});

  const auto multi = write_file("multi.txt", "1\t0\t0\n0\t0\t1\n");
  const auto loaded = load_triples(multi, 2, 1);
  CHECK(loaded[0] == Triple{1, 0, 0});  // order preserved
  CHECK(loaded[1] == Triple{0, 0, 1});
}

TEST_CASE("load_triples reports the offending line") {
  const auto path = write_file("range.txt", "0\t0\t1\n0\t0\t9\n");
  try {
    load_triples(path, 2, 1);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(e.line() == 2);
  }
  CHECK_THROWS_AS(load_triples(write_file("rel.txt", "0\t7\t1\n"), 2, 1),
                  FormatError);
  CHECK_THROWS_AS(load_triples(write_file("cols.txt", "0\t0\n"), 2, 1),
                  FormatError);
}

TEST_CASE("build_graph adjacency") {
  const KnowledgeGraph g =
      build_graph({{0, 0, 1}, {0, 0, 2}}, 3, 1);
  CHECK(g.neighbors(0, 0) == std::vector<EntityId>{1, 2});
  CHECK(g.neighbors(2, 0).empty());
  CHECK(g.predecessors(1, 0) == std::vector<EntityId>{0});
  CHECK(g.has_edge(0, 0, 2));
  CHECK_FALSE(g.has_edge(2, 0, 0));
}

TEST_CASE("chain graph has out-degree one per node") {
  std::vector<Triple> chain;
  for (EntityId v = 0; v + 1 < 10; ++v) chain.push_back({v, 0, v + 1});
  const KnowledgeGraph g = build_graph(chain, 10, 1);
  for (EntityId v = 0; v + 1 < 10; ++v) {
    CHECK(g.neighbors(v, 0).size() == 1);
  }
  CHECK(g.neighbors(9, 0).empty());
}

TEST_CASE("adjacency round-trips the loaded triples") {
  Rng rng(11);
  const auto triples = random_triples(25, 3, 120, rng);
  const KnowledgeGraph g = build_graph(triples, 25, 3);
  for (const Triple& t : triples) {
    const auto& n = g.neighbors(t.head, t.relation);
    CHECK(std::binary_search(n.begin(), n.end(), t.tail));
  }
  std::size_t edges = 0;
  for (EntityId v = 0; v < 25; ++v) {
    for (RelationId r = 0; r < 3; ++r) {
      for (EntityId t : g.neighbors(v, r)) {
        CHECK(std::binary_search(triples.begin(), triples.end(),
                                 Triple{v, r, t}));
        ++edges;
      }
    }
  }
  CHECK(edges == triples.size());
}

TEST_CASE("building twice is idempotent") {
  Rng rng(12);
  const auto triples = random_triples(20, 2, 60, rng);
  const KnowledgeGraph a = build_graph(triples, 20, 2);
  const KnowledgeGraph b = build_graph(triples, 20, 2);
  CHECK(a.triples() == b.triples());
  CHECK(a.checksum() == b.checksum());
  for (EntityId v = 0; v < 20; ++v) {
    for (RelationId r = 0; r < 2; ++r) {
      CHECK(a.neighbors(v, r) == b.neighbors(v, r));
    }
  }
}

TEST_CASE("build_splits nests cumulatively") {
  const std::vector<Triple> train = {{0, 0, 1}, {1, 0, 2}};
  const std::vector<Triple> valid = {{2, 0, 3}};
  const std::vector<Triple> test = {{3, 0, 4}};
  const GraphSplits s = build_splits(train, valid, test, 5, 1);
  CHECK(s.g_train.num_edges() == 2);
  CHECK(s.g_valid.num_edges() == 3);
  CHECK(s.g_test.num_edges() == 4);
  CHECK(s.g_test.num_edges() - s.g_valid.num_edges() == 1);
  for (const Triple& t : s.g_train.triples()) {
    CHECK(s.g_valid.has_edge(t.head, t.relation, t.tail));
    CHECK(s.g_test.has_edge(t.head, t.relation, t.tail));
  }
}

TEST_CASE("degenerate splits collapse to the training graph") {
  const std::vector<Triple> train = {{0, 0, 1}};
  const GraphSplits s = build_splits(train, {}, {}, 2, 1);
  CHECK(s.g_train.num_edges() == s.g_valid.num_edges());
  CHECK(s.g_valid.num_edges() == s.g_test.num_edges());
  CHECK(s.g_train.checksum() == s.g_test.checksum());
}

TEST_CASE("overlapping splits deduplicate") {
  const std::vector<Triple> train = {{0, 0, 1}};
  const std::vector<Triple> valid = {{0, 0, 1}, {1, 0, 0}};
  const GraphSplits s = build_splits(train, valid, {}, 2, 1);
  CHECK(s.g_valid.num_edges() == 2);
}

TEST_CASE("add_inverse materializes reversed relations") {
  const auto out = add_inverse_triples({{0, 1, 2}}, 3);
  REQUIRE(out.size() == 2);
  CHECK(out[0] == Triple{0, 1, 2});
  CHECK(out[1] == Triple{2, 4, 0});
}

TEST_CASE("checksums distinguish graphs") {
  const KnowledgeGraph a = build_graph({{0, 0, 1}}, 2, 1);
  const KnowledgeGraph b = build_graph({{1, 0, 0}}, 2, 1);
  CHECK(a.checksum() != b.checksum());
}
