#include <doctest.h>

#include <httplib.h>

#include <atomic>
#include <mutex>
#include <set>
#include <thread>

#include "dose/errors.hpp"
#include "dose/prompt_scoring.hpp"
#include "helpers.hpp"

using namespace dose;

namespace {

const std::string kTail =
    "### Does the previous paragraph demarcated within ### contain informative signal for visual "
    "instruction tuning a vision-language model? An informative data point should be "
    "well-formatted, contain usable knowledge of the world, and strictly NOT have any harmful, "
    "racist, sexist, etc. content. OPTIONS: -yes -no";

// In-process stand-in for the scoring bridge.
class FakeBridge {
 public:
  std::function<nlohmann::json(const nlohmann::json& item)> reply_for = [](const nlohmann::json& item) {
    const auto kind = parse_score_kind(item.at("kind").get<std::string>());
    const auto id = item.at("id").get<std::string>();
    return nlohmann::json{{"id", id}, {"score", mock_score(id, kind)}, {"scorer_version", "fake/1"}};
  };
  std::atomic<int> fail_next_posts{0};
  bool reverse_order = true;

  FakeBridge() {
    server_.Get("/v1/health", [](const httplib::Request&, httplib::Response& res) {
      res.set_content(R"({"status":"ok","models":{"text":"fake","clip":"fake"}})", "application/json");
    });
    server_.Post("/v1/score", [this](const httplib::Request& req, httplib::Response& res) {
      if (fail_next_posts > 0) {
        --fail_next_posts;
        res.status = 503;
        return;
      }
      const auto body = nlohmann::json::parse(req.body);
      auto out = nlohmann::json::array();
      {
        std::lock_guard lock(mu_);
        batch_sizes_.push_back(body.size());
        std::set<std::string> kinds;
        for (const auto& item : body) {
          kinds.insert(item.at("kind").get<std::string>());
          received_.push_back(item.at("kind").get<std::string>() + ":" + item.at("id").get<std::string>());
        }
        mixed_kinds_ = mixed_kinds_ || kinds.size() > 1;
        last_body_ = body;
      }
      for (const auto& item : body) {
        auto r = reply_for(item);
        if (!r.is_null()) out.push_back(r);
      }
      if (reverse_order) std::reverse(out.begin(), out.end());
      res.set_content(out.dump(), "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeBridge() {
    server_.stop();
    thread_.join();
  }

  [[nodiscard]] std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }
  std::vector<std::string> received() {
    std::lock_guard lock(mu_);
    return received_;
  }
  std::vector<std::size_t> batch_sizes() {
    std::lock_guard lock(mu_);
    return batch_sizes_;
  }
  bool mixed_kinds() {
    std::lock_guard lock(mu_);
    return mixed_kinds_;
  }
  nlohmann::json last_body() {
    std::lock_guard lock(mu_);
    return last_body_;
  }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
  std::mutex mu_;
  std::vector<std::string> received_;
  std::vector<std::size_t> batch_sizes_;
  bool mixed_kinds_ = false;
  nlohmann::json last_body_;
};

std::vector<ScoreRequest> text_requests(int n, const std::string& prefix = "t") {
  std::vector<ScoreRequest> out;
  for (int i = 0; i < n; ++i) {
    out.push_back({prefix + std::to_string(i), ScoreKind::Text, "p", {}, {}});
  }
  return out;
}

std::vector<RawSampleRecord> samples(int n) {
  std::vector<RawSampleRecord> out;
  for (int i = 0; i < n; ++i) {
    out.push_back({"s" + std::to_string(i), "Question " + std::to_string(i) + "? <image>",
                   "Answer " + std::to_string(i) + ".", "img/" + std::to_string(i) + ".jpg"});
  }
  return out;
}

ScorerOptions bridge_options(const std::string& url) {
  ScorerOptions o;
  o.endpoint = url;
  o.timeout_seconds = 5;
  return o;
}

}  // namespace

TEST_CASE("scoring template on the bus example") {
  const auto p = render_prompt("What are the colors of the bus in the image?",
                               "The bus in the image is white and red.");
  CHECK(p.rendered_text ==
        "### What are the colors of the bus in the image? The bus in the image is white and red. "
        "### Does the previous paragraph demarcated within ### contain informative signal for "
        "visual instruction tuning a vision-language model? An informative data point should be "
        "well-formatted, contain usable knowledge of the world, and strictly NOT have any "
        "harmful, racist, sexist, etc. content. OPTIONS: -yes -no");
  CHECK_FALSE(p.empty_payload);
}

TEST_CASE("image token is omitted from the payload") {
  const auto p = render_prompt("<image>\nWhat are the colors of the bus in the image?",
                               "The bus in the image is white and red.");
  CHECK(p.rendered_text == render_prompt("What are the colors of the bus in the image?",
                                         "The bus in the image is white and red.")
                               .rendered_text);
  for (const auto& q : {"<image>", "a <image> b", "<im<image>age>", "x<image><image>"}) {
    CHECK(render_prompt(q, "<image>").rendered_text.find("<image>") == std::string::npos);
  }
}

TEST_CASE("empty payload is flagged but rendered") {
  const auto p = render_prompt("", "");
  CHECK(p.empty_payload);
  CHECK(p.rendered_text == "###   " + kTail);
}

TEST_CASE("distinct payloads give distinct prompts") {
  std::set<std::string> seen;
  const std::vector<std::string> parts{"", "a", "b", "a b", "what?", "red."};
  std::size_t pairs = 0;
  std::set<std::string> payloads;
  for (const auto& q : parts) {
    for (const auto& a : parts) {
      ++pairs;
      payloads.insert(q + " " + a);
      seen.insert(render_prompt(q, a).rendered_text);
    }
  }
  CHECK(seen.size() == payloads.size());
}

TEST_CASE("mock scorer is deterministic and in range") {
  for (int i = 0; i < 2000; ++i) {
    const auto id = "m" + std::to_string(i);
    const double t = mock_score(id, ScoreKind::Text);
    const double c = mock_score(id, ScoreKind::Clip);
    CHECK(t == mock_score(id, ScoreKind::Text));
    CHECK(t >= 0.0);
    CHECK(t <= 1.0);
    CHECK(c >= -1.0);
    CHECK(c <= 1.0);
  }
  CHECK(mock_score("x", ScoreKind::Text) != mock_score("y", ScoreKind::Text));
}

TEST_CASE("wire format of requests") {
  const ScoreRequest t{"a", ScoreKind::Text, "prompt text", {}, {}};
  const ScoreRequest c{"a", ScoreKind::Clip, {}, "img.jpg", "cap"};
  CHECK(to_json(t) == nlohmann::json{{"id", "a"}, {"kind", "TEXT"}, {"prompt", "prompt text"}});
  CHECK(to_json(c) == nlohmann::json{{"id", "a"}, {"kind", "CLIP"}, {"image_ref", "img.jpg"}, {"caption", "cap"}});
}

TEST_CASE("mock endpoint scores every request in order") {
  const auto reqs = build_requests(samples(10));
  REQUIRE(reqs.size() == 20);
  const auto out = score_batch(reqs, ScorerOptions{});
  REQUIRE(out.responses.size() == 20);
  for (std::size_t i = 0; i < reqs.size(); ++i) {
    CHECK(out.responses[i].id == reqs[i].id);
    CHECK(out.responses[i].kind == reqs[i].kind);
    CHECK(out.responses[i].scorer_version == kMockScorerVersion);
  }
  CHECK(out.scorer == "mock");
}

TEST_CASE("bridge replies are returned in request order") {
  FakeBridge bridge;
  const auto reqs = text_requests(3);
  const auto out = score_batch(reqs, bridge_options(bridge.url()));
  REQUIRE(out.responses.size() == 3);
  for (int i = 0; i < 3; ++i) CHECK(out.responses[i].id == "t" + std::to_string(i));
  CHECK(out.failures.empty());
  CHECK(out.health.at("status") == "ok");
  CHECK(out.responses[0].scorer_version == "fake/1");
}

TEST_CASE("batches respect the size limit and carry one kind") {
  FakeBridge bridge;
  auto opts = bridge_options(bridge.url());
  const auto reqs = build_requests(samples(300));
  const auto out = score_batch(reqs, opts);
  CHECK(out.responses.size() == 600);
  for (auto s : bridge.batch_sizes()) CHECK(s <= kMaxBridgeBatch);
  CHECK_FALSE(bridge.mixed_kinds());
  opts.batch_size = 257;
  CHECK_THROWS_AS(score_batch(reqs, opts), ConfigError);
}

TEST_CASE("unreachable bridge without fallback") {
  // Port 1 on loopback has no listener.
  const auto opts = bridge_options("http://127.0.0.1:1");
  CHECK_THROWS_AS(score_batch(text_requests(2), opts), BridgeUnavailable);
  try {
    (void)score_batch(text_requests(2), opts);
  } catch (const Error& e) {
    CHECK(e.error_class() == ErrorClass::Bridge);
  }
}

TEST_CASE("unreachable bridge with mock fallback") {
  auto opts = bridge_options("http://127.0.0.1:1");
  opts.mock_fallback = true;
  const auto out = score_batch(text_requests(2), opts);
  CHECK(out.responses.size() == 2);
  CHECK(out.scorer == "mock (fallback)");
}

TEST_CASE("out-of-range text score is a per-item failure") {
  FakeBridge bridge;
  bridge.reply_for = [](const nlohmann::json& item) {
    const auto id = item.at("id").get<std::string>();
    return nlohmann::json{{"id", id}, {"score", id == "t1" ? 1.2 : 0.5}, {"scorer_version", "f"}};
  };
  auto opts = bridge_options(bridge.url());
  opts.max_retries = 1;
  const auto out = score_batch(text_requests(3), opts);
  REQUIRE(out.failures.size() == 1);
  CHECK(out.failures[0].id == "t1");
  CHECK(out.failures[0].reason == "out of range");
  CHECK(out.failures[0].attempts == 2);
  CHECK(out.responses.size() == 2);
}

TEST_CASE("per-item errors, missing items and bad scores are reported individually") {
  FakeBridge bridge;
  bridge.reply_for = [](const nlohmann::json& item) -> nlohmann::json {
    const auto id = item.at("id").get<std::string>();
    if (id == "t0") return {{"id", id}, {"error", "decode failed"}};
    if (id == "t1") return nullptr;
    if (id == "t2") return {{"id", id}, {"score", "high"}};
    return {{"id", id}, {"score", 0.25}, {"scorer_version", "f"}};
  };
  auto opts = bridge_options(bridge.url());
  opts.max_retries = 0;
  const auto out = score_batch(text_requests(4), opts);
  REQUIRE(out.failures.size() == 3);
  CHECK(out.failures[0].reason == "decode failed");
  CHECK(out.failures[1].reason == "missing from response");
  CHECK(out.failures[2].reason == "no numeric score");
  CHECK(out.failures[0].attempts == 1);
  REQUIRE(out.responses.size() == 1);
  CHECK(out.responses[0].id == "t3");
}

TEST_CASE("transient transport failures are retried") {
  FakeBridge bridge;
  bridge.fail_next_posts = 1;
  auto opts = bridge_options(bridge.url());
  opts.max_retries = 2;
  const auto out = score_batch(text_requests(5), opts);
  CHECK(out.responses.size() == 5);
  CHECK(out.failures.empty());
}

TEST_CASE("persistent transport failure is a bridge error") {
  FakeBridge bridge;
  bridge.fail_next_posts = 100;
  auto opts = bridge_options(bridge.url());
  opts.max_retries = 1;
  CHECK_THROWS_AS(score_batch(text_requests(5), opts), BridgeUnavailable);
}

TEST_CASE("resume never re-scores checkpointed items") {
  testutil::TempDir dir;
  const auto reqs = build_requests(samples(40));
  auto opts = ScorerOptions{};
  opts.checkpoint = dir / "ckpt.jsonl";
  // First pass covers only part of the work, as if interrupted.
  const std::vector<ScoreRequest> first(reqs.begin(), reqs.begin() + 30);
  const auto a = score_batch(first, opts);
  CHECK(a.responses.size() == 30);

  FakeBridge bridge;
  opts.endpoint = bridge.url();
  const auto b = score_batch(reqs, opts);
  CHECK(b.resumed == 30);
  CHECK(b.responses.size() == reqs.size());
  CHECK(bridge.received().size() == reqs.size() - 30);
  for (std::size_t i = 0; i < 30; ++i) CHECK(b.responses[i].score == a.responses[i].score);

  // Third pass: everything is on file, the bridge sees nothing new.
  const auto before = bridge.received().size();
  const auto c = score_batch(reqs, opts);
  CHECK(c.resumed == reqs.size());
  CHECK(bridge.received().size() == before);
}

TEST_CASE("scoring samples joins both kinds into a dataset") {
  const auto run = score_samples(samples(50), ScorerOptions{});
  CHECK(run.dataset.size() == 50);
  CHECK(run.dropped == 0);
  for (const auto& r : run.dataset.records()) {
    CHECK(r.text_quality == mock_score(r.id, ScoreKind::Text));
    CHECK(r.clip_score == mock_score(r.id, ScoreKind::Clip));
  }
}

TEST_CASE("failed samples abort unless dropping is allowed") {
  FakeBridge bridge;
  bridge.reply_for = [](const nlohmann::json& item) -> nlohmann::json {
    const auto id = item.at("id").get<std::string>();
    if (id == "s3" && item.at("kind") == "CLIP") return {{"id", id}, {"error", "bad image"}};
    return {{"id", id}, {"score", 0.3}, {"scorer_version", "f"}};
  };
  auto opts = bridge_options(bridge.url());
  opts.max_retries = 0;
  try {
    (void)score_samples(samples(6), opts, false);
    FAIL("expected a bridge error");
  } catch (const Error& e) {
    CHECK(e.error_class() == ErrorClass::Bridge);
  }
  const auto run = score_samples(samples(6), opts, true);
  CHECK(run.dataset.size() == 5);
  CHECK(run.dropped == 1);
}

TEST_CASE("clip requests carry image ref and the text payload") {
  FakeBridge bridge;
  (void)score_batch(build_requests({{"only", "<image> Q?", "A.", "pics/1.png"}}), bridge_options(bridge.url()));
  const auto body = bridge.last_body();
  REQUIRE(body.size() == 1);
  CHECK(body[0].at("kind") == "CLIP");
  CHECK(body[0].at("image_ref") == "pics/1.png");
  CHECK(body[0].at("caption") == "Q? A.");
}

TEST_CASE("round-trips under injected failures stay id-complete") {
  FakeBridge bridge;
  bridge.reply_for = [](const nlohmann::json& item) -> nlohmann::json {
    const auto id = item.at("id").get<std::string>();
    const auto kind = parse_score_kind(item.at("kind").get<std::string>());
    if (std::hash<std::string>{}(id) % 17 == 0) return {{"id", id}, {"error", "injected"}};
    return {{"id", id}, {"score", mock_score(id, kind)}, {"scorer_version", "fake/1"}};
  };
  auto opts = bridge_options(bridge.url());
  opts.max_retries = 0;
  const auto reqs = build_requests(samples(500));
  const auto out = score_batch(reqs, opts);
  CHECK(out.responses.size() + out.failures.size() == reqs.size());
  std::set<std::string> seen;
  for (const auto& r : out.responses) {
    CHECK(score_in_range(r.kind, r.score));
    seen.insert(std::string(score_kind_name(r.kind)) + r.id);
  }
  for (const auto& f : out.failures) seen.insert(std::string(score_kind_name(f.kind)) + f.id);
  CHECK(seen.size() == reqs.size());
}
