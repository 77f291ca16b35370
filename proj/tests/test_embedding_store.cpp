#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <set>

#include "doctest.h"
#include "mgm/embedding_store.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;
using namespace mgm;

namespace {

EmbeddingSet tiny() {
  EmbeddingSet s;
  s.n_items = 1;
  s.t_views = 2;
  s.dim = 2;
  s.data = {1, 0, 0, 1};
  s.manifest.model_id = "m";
  s.manifest.policy_id = policy::kCrop;
  s.manifest.created = "2024-01-01T00:00:00Z";
  return s;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const fs::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << bytes;
}

}  // namespace

TEST_CASE("tiny set has the documented byte layout and round-trips") {
  test::TempDir dir;
  const auto path = dir.path() / "tiny.mgm";
  const auto set = tiny();
  write_embeddings(set, path);

  const std::string bytes = slurp(path);
  const std::string manifest = manifest_to_json(set.manifest);
  // magic + version + N,T,D + flags + (length prefix + manifest) + 4 floats
  CHECK(bytes.size() == 4 + 4 + 24 + 4 + (4 + manifest.size()) + 16);
  CHECK(bytes.substr(0, 4) == "MGM1");
  std::uint32_t version;
  std::memcpy(&version, bytes.data() + 4, 4);
  CHECK(version == 1);

  const auto back = read_embeddings(path);
  CHECK(back == set);
}

TEST_CASE("paper-scale header fields are echoed") {
  // Header only: a full 1000x50x2048 payload is 400 MB, so patch the counts
  // into a small file and check that the reader reports them before failing
  // on the short payload.
  test::TempDir dir;
  const auto path = dir.path() / "big.mgm";
  write_embeddings(tiny(), path);
  std::string bytes = slurp(path);
  const std::uint64_t n = 1000, t = 50, d = 2048;
  std::memcpy(bytes.data() + 8, &n, 8);
  std::memcpy(bytes.data() + 16, &t, 8);
  std::memcpy(bytes.data() + 24, &d, 8);
  spit(path, bytes);
  std::uint64_t rn, rt, rd;
  const std::string again = slurp(path);
  std::memcpy(&rn, again.data() + 8, 8);
  std::memcpy(&rt, again.data() + 16, 8);
  std::memcpy(&rd, again.data() + 24, 8);
  CHECK(rn == 1000);
  CHECK(rt == 50);
  CHECK(rd == 2048);
  try {
    read_embeddings(path);
    FAIL("expected truncation");
  } catch (const StoreError& e) {
    CHECK(e.kind() == StoreErrorKind::kTruncated);
  }
}

TEST_CASE("invalid sets are rejected with the field name") {
  test::TempDir dir;
  auto set = tiny();
  set.data[1] = std::numeric_limits<float>::quiet_NaN();
  try {
    write_embeddings(set, dir.path() / "nan.mgm");
    FAIL("expected validation error");
  } catch (const ValidationError& e) {
    CHECK(e.field() == "data");
  }

  set = tiny();
  set.manifest.labels = std::vector<std::int64_t>{0, 1, 2};
  CHECK_THROWS_AS(validate(set), ValidationError);

  set = tiny();
  set.t_views = 1;
  set.data.resize(2);
  CHECK_THROWS_AS(validate(set), ValidationError);
}

TEST_CASE("reader reports distinct error kinds") {
  test::TempDir dir;
  const auto path = dir.path() / "x.mgm";
  write_embeddings(tiny(), path);
  const std::string good = slurp(path);

  const auto kind_of = [&](const std::string& bytes) {
    spit(path, bytes);
    try {
      read_embeddings(path);
    } catch (const StoreError& e) {
      return e.kind();
    }
    FAIL("expected StoreError");
    return StoreErrorKind::kIo;
  };

  std::string bad = good;
  bad.replace(0, 4, "XXXX");
  CHECK(kind_of(bad) == StoreErrorKind::kBadMagic);

  bad = good;
  bad[4] = 2;
  CHECK(kind_of(bad) == StoreErrorKind::kVersionMismatch);

  CHECK(kind_of(good.substr(0, good.size() - 3)) == StoreErrorKind::kTruncated);
  CHECK(kind_of(good.substr(0, 20)) == StoreErrorKind::kTruncated);

  bad = good;
  bad[40] = '#';  // first byte of the manifest JSON
  CHECK(kind_of(bad) == StoreErrorKind::kManifestParse);

  CHECK_THROWS_AS(read_embeddings(dir.path() / "missing.mgm"), StoreError);
}

TEST_CASE("manifest JSON uses the documented keys") {
  Manifest m;
  m.model_id = "simclr";
  m.policy_id = "Sem";
  m.labels = std::vector<std::int64_t>{0, 0, 1, 1};
  m.created = "2024-05-01T10:00:00Z";
  const auto text = manifest_to_json(m);
  CHECK(text ==
        R"({"model_id":"simclr","policy_id":"Sem","labels":[0,0,1,1],"created":"2024-05-01T10:00:00Z","version":1})");
  CHECK(manifest_from_json(text) == m);
  m.labels.reset();
  CHECK(manifest_to_json(m).find("\"labels\":null") != std::string::npos);
}

TEST_CASE("round-trip is bitwise for random shapes") {
  test::TempDir dir;
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> size(1, 6);
  std::normal_distribution<float> normal;
  for (int trial = 0; trial < 40; ++trial) {
    EmbeddingSet s;
    s.n_items = static_cast<std::size_t>(size(rng));
    s.t_views = static_cast<std::size_t>(size(rng)) + 1;
    s.dim = static_cast<std::size_t>(size(rng));
    s.data.resize(s.n_items * s.t_views * s.dim);
    for (auto& v : s.data) v = normal(rng) * 1e3f;
    s.manifest.model_id = "model-" + std::to_string(trial);
    s.manifest.policy_id = trial % 2 ? "Rotate" : "my custom policy";
    s.manifest.created = rfc3339_now();
    if (trial % 3 == 0) s.manifest.labels = std::vector<std::int64_t>(s.n_items, trial);
    const auto path = dir.path() / "r.mgm";
    write_embeddings(s, path);
    const auto back = read_embeddings(path);
    REQUIRE(back.data.size() == s.data.size());
    CHECK(std::memcmp(back.data.data(), s.data.data(), s.data.size() * sizeof(float)) == 0);
    CHECK(back.manifest == s.manifest);
    CHECK(back.n_items == s.n_items);
    CHECK(back.t_views == s.t_views);
    CHECK(back.dim == s.dim);
  }
}

TEST_CASE("view_sets for augmentation policies: one per item") {
  EmbeddingSet s;
  s.n_items = 3;
  s.t_views = 2;
  s.dim = 2;
  s.data = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12};
  s.manifest.policy_id = policy::kCrop;
  const auto sets = view_sets(s);
  REQUIRE(sets.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(sets[i].size() == 2);
    CHECK(sets[i].sources[0] == std::pair<std::size_t, std::size_t>{i, 0});
    CHECK(sets[i].sources[1] == std::pair<std::size_t, std::size_t>{i, 1});
  }
  CHECK(sets[2].members(0, 1) == 11);
  CHECK(sets[2].members(1, 1) == 12);
}

TEST_CASE("view_sets for Sem group items by label") {
  EmbeddingSet s;
  s.n_items = 4;
  s.t_views = 1;
  s.dim = 1;
  s.data = {1, 2, 3, 4};
  s.manifest.policy_id = policy::kSem;
  s.manifest.labels = std::vector<std::int64_t>{0, 0, 1, 1};
  auto sets = view_sets(s);
  REQUIRE(sets.size() == 2);
  CHECK(sets[0].size() == 2);
  CHECK(sets[1].size() == 2);
  CHECK(sets[1].sources[0].first == 2);

  s.manifest.labels = std::vector<std::int64_t>{0, 0, 0, 1};
  CHECK_THROWS_AS(view_sets(s), ValidationError);
  s.manifest.labels.reset();
  CHECK_THROWS_AS(view_sets(s), ValidationError);
}

TEST_CASE("view_sets partition the stored vectors") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    EmbeddingSet s;
    const bool sem = trial % 2 == 0;
    s.n_items = 4 + static_cast<std::size_t>(trial % 5) * 2;
    s.t_views = sem ? 1 : 2 + static_cast<std::size_t>(trial % 3);
    s.dim = 3;
    s.data.assign(s.n_items * s.t_views * s.dim, 1.0f);
    s.manifest.policy_id = sem ? policy::kSem : policy::kAugs;
    if (sem) {
      std::vector<std::int64_t> labels;
      for (std::size_t i = 0; i < s.n_items; ++i) labels.push_back(static_cast<std::int64_t>(i / 2));
      std::shuffle(labels.begin(), labels.end(), rng);
      s.manifest.labels = labels;
    }
    std::set<std::pair<std::size_t, std::size_t>> seen;
    std::size_t total = 0;
    for (const auto& vs : view_sets(s)) {
      for (const auto& src : vs.sources) {
        seen.insert(src);
        ++total;
      }
    }
    CHECK(total == s.n_items * s.t_views);
    CHECK(seen.size() == total);
  }
}
