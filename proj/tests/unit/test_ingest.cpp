#include <doctest.h>

#include <cmath>
#include <limits>

#include "dose/errors.hpp"
#include "dose/ingest.hpp"
#include "helpers.hpp"

using namespace dose;
using testutil::TempDir;

TEST_CASE("one line maps fields directly") {
  TempDir dir;
  testutil::write_text(dir / "s.jsonl", R"({"id":"q1","text_quality":0.91,"clip_score":0.27})" "\n");
  const auto rows = read_scores(dir / "s.jsonl");
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].id == "q1");
  CHECK(rows[0].text_quality == 0.91);
  CHECK(rows[0].clip_score == 0.27);
}

TEST_CASE("empty file is an empty dataset") {
  TempDir dir;
  testutil::write_text(dir / "e.jsonl", "");
  CHECK_THROWS_AS(read_scores(dir / "e.jsonl"), EmptyDataset);
  testutil::write_text(dir / "blank.jsonl", "\n\n");
  CHECK_THROWS_AS(read_scores(dir / "blank.jsonl"), EmptyDataset);
}

TEST_CASE("missing field reports line and name") {
  TempDir dir;
  testutil::write_text(dir / "m.jsonl", R"({"id":"q1","text_quality":0.91})" "\n");
  try {
    (void)read_scores(dir / "m.jsonl");
    FAIL("expected MissingField");
  } catch (const MissingField& e) {
    CHECK(e.line_no() == 1);
    CHECK(e.field() == "clip_score");
  }
}

TEST_CASE("parse errors carry physical line numbers") {
  TempDir dir;
  testutil::write_text(dir / "p.jsonl",
                       R"({"id":"a","text_quality":0.1,"clip_score":0.2})" "\n\n{not json\n");
  try {
    (void)read_scores(dir / "p.jsonl");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line_no() == 3);
  }
  testutil::write_text(dir / "t.jsonl", R"({"id":"a","text_quality":"high","clip_score":0.2})" "\n");
  CHECK_THROWS_AS(read_scores(dir / "t.jsonl"), ParseError);
  testutil::write_text(dir / "arr.jsonl", "[1,2]\n");
  CHECK_THROWS_AS(read_scores(dir / "arr.jsonl"), ParseError);
}

TEST_CASE("missing input is an io error") {
  CHECK_THROWS_AS(read_scores("/nonexistent/dose/scores.jsonl"), IoError);
}

TEST_CASE("scores round-trip bit-for-bit") {
  TempDir dir;
  std::vector<ScoredSample> rows{
      {"a", 0.1, -0.2},
      {"b", 1.0 / 3.0, std::nextafter(0.5, 1.0)},
      {"c", 1e-300, std::numeric_limits<double>::denorm_min()},
      {"unicode-\xc3\xa9", -0.0, 12345.678901234567},
  };
  auto more = testutil::normal_dataset(500, 0.6, 0.1, 0.3, 0.05, 2).records();
  rows.insert(rows.end(), more.begin(), more.end());
  const auto data = validate_dataset(rows);
  write_scores(data, dir / "rt.jsonl");
  const auto back = load_dataset(dir / "rt.jsonl");
  REQUIRE(back.size() == data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    CHECK(back[i].id == data[i].id);
    CHECK(std::memcmp(&back[i].text_quality, &data[i].text_quality, sizeof(double)) == 0);
    CHECK(std::memcmp(&back[i].clip_score, &data[i].clip_score, sizeof(double)) == 0);
  }
}

TEST_CASE("samples round-trip, optional image ref and empty payloads") {
  TempDir dir;
  std::vector<RawSampleRecord> rows{
      {"s1", "What is it?", "A bus.", std::string("img/1.jpg")},
      {"s2", "", "", std::nullopt},
  };
  write_samples(rows, dir / "samples.jsonl");
  const auto back = read_samples(dir / "samples.jsonl");
  REQUIRE(back.size() == 2);
  CHECK(back[0].image_ref == std::optional<std::string>("img/1.jpg"));
  CHECK_FALSE(back[1].image_ref.has_value());
  CHECK(back[1].empty_payload());
  CHECK_FALSE(back[0].empty_payload());
}

TEST_CASE("selection output keeps order and echoes the seed") {
  TempDir dir;
  SelectionResult r;
  r.selected_ids = {"b", "a"};
  r.seed = 77;
  r.target_size = 2;
  r.per_axis_candidate_size = 3;
  r.manifest = {{"component", "test"}};
  write_selection(r, dir / "sel.txt");
  CHECK(testutil::read_file(dir / "sel.txt") == "b\na\n");
  CHECK(read_id_list(dir / "sel.txt") == std::vector<std::string>{"b", "a"});
  const auto m = nlohmann::json::parse(testutil::read_file(dir / "sel.manifest.json"));
  CHECK(m.at("seed") == 77);
  CHECK(m.at("target_size") == 2);
  CHECK(m.at("per_axis_candidate_size") == 3);
  CHECK(m.at("selection_file") == "sel.txt");
}

TEST_CASE("empty budget writes an empty id file and a valid manifest") {
  TempDir dir;
  SelectionResult r;
  r.seed = 1;
  write_selection(r, dir / "empty.txt");
  CHECK(testutil::read_file(dir / "empty.txt").empty());
  const auto manifest = nlohmann::json::parse(testutil::read_file(dir / "empty.manifest.json"));
  CHECK(manifest.is_object());
}

TEST_CASE("unwritable destination is an io error and leaves nothing behind") {
  SelectionResult r;
  r.selected_ids = {"a"};
  CHECK_THROWS_AS(write_selection(r, "/nonexistent/dose/dir/sel.txt"), IoError);
  TempDir dir;
  write_file_atomic(dir / "x.txt", "hello");
  write_file_atomic(dir / "x.txt", "again");
  CHECK(testutil::read_file(dir / "x.txt") == "again");
  std::size_t entries = 0;
  for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(dir.path())) ++entries;
  CHECK(entries == 1);
}

TEST_CASE("manifest path sits beside the id file") {
  CHECK(manifest_path_for("out/selection.txt") == std::filesystem::path("out/selection.manifest.json"));
  CHECK(manifest_path_for("ids") == std::filesystem::path("ids.manifest.json"));
}

TEST_CASE("weight table export") {
  TempDir dir;
  WeightTable t;
  t.ids = {"a", "b"};
  t.raw_weights = {2.0, 6.0};
  t.normalized_weights = {0.25, 0.75};
  write_weight_table(t, dir / "w.jsonl");
  std::vector<nlohmann::json> rows;
  for_each_jsonl(dir / "w.jsonl", [&](std::size_t, const nlohmann::json& j) { rows.push_back(j); });
  REQUIRE(rows.size() == 2);
  CHECK(rows[1].at("id") == "b");
  CHECK(rows[1].at("normalized_weight").get<double>() == 0.75);
}
