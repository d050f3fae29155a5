#include <gtest/gtest.h>

#include "fixtures.hpp"

namespace ggnn {
namespace {

using testing::TempDir;

TEST(ImportLinqs, SmallExample) {
  TempDir dir;
  auto content = dir.write("c.content", "31\t0\t1\t0\tNeural\n7\t1\t0\t1\tTheory\n99\t0\t0\t1\tNeural\n");
  auto cites = dir.write("c.cites", "31\t7\n7\t31\n99\t31\n99\t5\n");
  ImportedDataset d = import_linqs(content, cites);
  EXPECT_EQ(d.graph.n, 3u);
  EXPECT_EQ(d.node_ids, (std::vector<std::string>{"31", "7", "99"}));
  EXPECT_EQ(d.class_names, (std::vector<std::string>{"Neural", "Theory"}));
  EXPECT_EQ(d.graph.labels, (std::vector<int>{0, 1, 0}));
  EXPECT_EQ(d.citation_lines, 4u);
  EXPECT_EQ(d.dropped_citations, 1u);
  // 31-7 cited both ways collapses into one undirected edge.
  EXPECT_EQ(d.graph.adjacency.nnz(), 4u);
  EXPECT_DOUBLE_EQ(d.graph.adjacency.at(0, 1), 1.0);
  EXPECT_DOUBLE_EQ(d.graph.adjacency.at(2, 0), 1.0);
  ASSERT_TRUE(d.graph.attributes);
  EXPECT_EQ(d.graph.attributes->cols(), 3u);
  EXPECT_DOUBLE_EQ(d.graph.attributes->at(1, 2), 1.0);
  EXPECT_DOUBLE_EQ(d.graph.attributes->at(1, 1), 0.0);
}

TEST(ImportLinqs, PlainDropsFeatures) {
  TempDir dir;
  auto content = dir.write("c.content", "a\t1\t0\tx\nb\t0\t1\ty\n");
  auto cites = dir.write("c.cites", "a\tb\n");
  ImportedDataset d = import_linqs(content, cites, false);
  EXPECT_FALSE(d.graph.attributes);
  EXPECT_EQ(d.graph.n, 2u);
}

TEST(ImportLinqs, RaggedRowsAndDuplicateIds) {
  TempDir dir;
  auto cites = dir.write("c.cites", "");
  EXPECT_THROW(import_linqs(dir.write("a.content", "a\t1\t0\tx\nb\t0\ty\n"), cites), FormatError);
  EXPECT_THROW(import_linqs(dir.write("b.content", "a\t1\tx\na\t0\ty\n"), cites), FormatError);
  EXPECT_THROW(import_linqs(dir.write("c.content", "a\t1\tx\n"), dir.write("bad.cites", "a\n")), FormatError);
}

TEST(ImportLinqs, RoundTripsSyntheticGraph) {
  TempDir dir;
  Graph g = testing::attributed_sbm(3, 20, 4);
  testing::write_linqs(g, dir.path(), "sbm");
  ImportedDataset d = import_linqs(dir / "sbm.content", dir / "sbm.cites");
  ASSERT_EQ(d.graph.n, g.n);
  EXPECT_EQ(d.graph.labels, g.labels);
  EXPECT_EQ(d.dropped_citations, 1u);
  EXPECT_EQ(d.citation_lines, g.adjacency.nnz() / 2 + 2);
  EXPECT_EQ(d.graph.adjacency.nnz(), g.adjacency.nnz());
  for (std::size_t i = 0; i < g.n; ++i)
    for (std::size_t j : g.adjacency.row_cols(i)) EXPECT_DOUBLE_EQ(d.graph.adjacency.at(i, j), 1.0);
  EXPECT_EQ(d.graph.attributes->triplets().size(), g.attributes->triplets().size());
}

constexpr const char* kPubmedNodes =
    "NODE\tpaper\n"
    "cat=1,2,3:label\tnumeric:w-rat:0.0\tnumeric:w-insulin:0.0\tnumeric:w-mice:0.0\tstring:summary\n"
    "101\tlabel=1\tw-rat=0.5\tw-mice=0.25\tsummary=w-rat,w-mice\n"
    "202\tlabel=3\tw-insulin=0.125\tsummary=w-insulin\n"
    "303\tlabel=2\tsummary=\n";
constexpr const char* kPubmedCites =
    "DIRECTED\tcites\n"
    "NO_FEATURES\n"
    "1\tpaper:101\t|\tpaper:202\n"
    "2\tpaper:303\t|\tpaper:101\n"
    "3\tpaper:404\t|\tpaper:101\n";

TEST(ImportPubmed, SmallExample) {
  TempDir dir;
  ImportedDataset d = import_pubmed(dir.write("n.tab", kPubmedNodes), dir.write("c.tab", kPubmedCites));
  EXPECT_EQ(d.graph.n, 3u);
  EXPECT_EQ(d.class_names, (std::vector<std::string>{"1", "2", "3"}));
  EXPECT_EQ(d.graph.labels, (std::vector<int>{0, 2, 1}));
  ASSERT_TRUE(d.graph.attributes);
  EXPECT_EQ(d.graph.attributes->cols(), 3u);
  EXPECT_DOUBLE_EQ(d.graph.attributes->at(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(d.graph.attributes->at(0, 2), 0.25);
  EXPECT_DOUBLE_EQ(d.graph.attributes->at(1, 1), 0.125);
  EXPECT_EQ(d.graph.attributes->row_cols(2).size(), 0u);
  EXPECT_EQ(d.citation_lines, 3u);
  EXPECT_EQ(d.dropped_citations, 1u);
  EXPECT_EQ(d.graph.adjacency.nnz(), 4u);
}

TEST(ImportPubmed, RejectsUndeclaredColumnAndMissingLabel) {
  TempDir dir;
  auto cites = dir.write("c.tab", kPubmedCites);
  const std::string head = "NODE\tpaper\ncat=1,2,3:label\tnumeric:w-rat:0.0\n";
  EXPECT_THROW(import_pubmed(dir.write("a.tab", head + "1\tlabel=1\tw-dog=1\n"), cites), FormatError);
  EXPECT_THROW(import_pubmed(dir.write("b.tab", head + "1\tw-rat=1\n"), cites), FormatError);
  EXPECT_THROW(import_pubmed(dir.write("c.tab", "NODE\tpaper\n"), cites), FormatError);
}

TEST(PlanetoidSplit, SizesAndClassBalance) {
  Graph g = testing::attributed_sbm(3, 40, 2);
  Masks m = planetoid_split(g, 5, 30, 50, 11);
  EXPECT_EQ(Masks::count(m.train), 15u);
  EXPECT_EQ(Masks::count(m.valid), 30u);
  EXPECT_EQ(Masks::count(m.test), 50u);
  std::vector<int> per_class(3, 0);
  for (std::size_t i = 0; i < g.n; ++i) {
    EXPECT_LE(int(m.train[i]) + int(m.valid[i]) + int(m.test[i]), 1);
    if (m.train[i]) ++per_class[static_cast<std::size_t>(g.labels[i])];
  }
  EXPECT_EQ(per_class, (std::vector<int>{5, 5, 5}));
  Masks again = planetoid_split(g, 5, 30, 50, 11);
  EXPECT_EQ(again.train, m.train);
  EXPECT_EQ(again.test, m.test);
  EXPECT_NE(planetoid_split(g, 5, 30, 50, 12).train, m.train);
}

TEST(PlanetoidSplit, TooSmall) {
  Graph g = testing::attributed_sbm(2, 10, 2);
  EXPECT_THROW(planetoid_split(g, 11, 0, 0, 1), ConfigError);
  EXPECT_THROW(planetoid_split(g, 5, 5, 6, 1), ConfigError);
  EXPECT_NO_THROW(planetoid_split(g, 5, 5, 5, 1));
}

TEST(SplitFromIds, MapsOriginalIds) {
  TempDir dir;
  ImportedDataset d = import_linqs(dir.write("c.content", "31\t1\tx\n7\t0\ty\n99\t1\tx\n"), dir.write("c.cites", ""));
  Masks m = split_from_ids(d, dir.write("s.tsv", "99\ttrain\n31\ttest\n"));
  EXPECT_EQ(m.train, (std::vector<bool>{false, false, true}));
  EXPECT_EQ(m.test, (std::vector<bool>{true, false, false}));
  EXPECT_THROW(split_from_ids(d, dir.write("bad1.tsv", "42\ttrain\n")), FormatError);
  EXPECT_THROW(split_from_ids(d, dir.write("bad2.tsv", "7\ttrain\n7\ttest\n")), ValidationError);
  EXPECT_THROW(split_from_ids(d, dir.write("bad3.tsv", "7\tholdout\n")), FormatError);
}

TEST(DatasetDir, SaveLoadAndChecksum) {
  TempDir dir;
  Graph g = testing::attributed_sbm(3, 20, 4);
  testing::write_linqs(g, dir.path(), "sbm");
  ImportedDataset d = import_linqs(dir / "sbm.content", dir / "sbm.cites");
  d.graph.masks = planetoid_split(d.graph, 3, 10, 20, 1);
  save_dataset(d, dir / "ds");
  Graph back = load_dataset(dir / "ds");
  EXPECT_EQ(back.n, d.graph.n);
  EXPECT_EQ(back.labels, d.graph.labels);
  EXPECT_EQ(back.masks.train, d.graph.masks.train);
  EXPECT_EQ(back.adjacency.nnz(), d.graph.adjacency.nnz());
  EXPECT_EQ(back.attributes->triplets().size(), d.graph.attributes->triplets().size());

  const std::string sum = dataset_checksum(dir / "ds");
  EXPECT_EQ(sum.size(), 16u);
  save_dataset(d, dir / "ds2");
  EXPECT_EQ(dataset_checksum(dir / "ds2"), sum);
  d.graph.masks = planetoid_split(d.graph, 3, 10, 20, 2);
  save_dataset(d, dir / "ds2");
  EXPECT_NE(dataset_checksum(dir / "ds2"), sum);
}

TEST(DatasetDir, PlainDatasetHasNoFeatureFile) {
  TempDir dir;
  ImportedDataset d = import_linqs(dir.write("c.content", "a\t1\tx\nb\t0\ty\n"), dir.write("c.cites", "a\tb\n"), false);
  save_dataset(d, dir / "ds");
  EXPECT_TRUE((DatasetFiles{dir / "ds"}).plain());
  EXPECT_FALSE(load_dataset(dir / "ds").attributes);
}

TEST(DatasetDir, MissingDirectoryNamesImport) {
  TempDir dir;
  try {
    load_dataset(dir / "nothing");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("ggnn import"), std::string::npos);
  }
}

TEST(PublishedStats, KnownDatasets) {
  auto cora = published_stats("cora");
  ASSERT_TRUE(cora);
  EXPECT_EQ(cora->nodes, 2708u);
  EXPECT_EQ(cora->edges, 5429u);
  EXPECT_EQ(cora->attributes, 1433u);
  EXPECT_EQ(cora->train, 140u);
  auto pubmed = published_stats("pubmed");
  ASSERT_TRUE(pubmed);
  EXPECT_EQ(pubmed->attributes, 500u);
  EXPECT_EQ(pubmed->classes, 3u);
  EXPECT_EQ(pubmed->train, 60u);
  EXPECT_FALSE(published_stats("reddit"));
}

TEST(PublishedStats, MismatchesAreListed) {
  DatasetStats want = *published_stats("cora");
  DatasetStats got = want;
  EXPECT_TRUE(compare_stats(got, want, false).empty());
  got.edges = 5278;
  got.attributes = 0;
  auto diff = compare_stats(got, want, false);
  ASSERT_EQ(diff.size(), 2u);
  EXPECT_NE(diff[0].find("5278"), std::string::npos);
  EXPECT_EQ(compare_stats(got, want, true).size(), 1u);
}

}  // namespace
}  // namespace ggnn
