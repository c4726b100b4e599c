#include "dose/prompt_scoring.hpp"

#include <httplib.h>

#include <atomic>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <thread>
#include <unordered_map>

#include "dose/errors.hpp"
#include "dose/random_keys.hpp"

namespace dose {
namespace {

constexpr std::string_view kImageToken = "<image>";

constexpr std::string_view kTemplateTail =
    "### Does the previous paragraph demarcated within ### contain informative signal for visual "
    "instruction tuning a vision-language model? An informative data point should be "
    "well-formatted, contain usable knowledge of the world, and strictly NOT have any harmful, "
    "racist, sexist, etc. content. OPTIONS: -yes -no";

std::string strip_image_token(std::string_view text) {
  std::string s(text);
  for (auto pos = s.find(kImageToken); pos != std::string::npos; pos = s.find(kImageToken)) {
    s.erase(pos, kImageToken.size());
  }
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::string payload_of(std::string_view question, std::string_view answer) {
  return strip_image_token(question) + " " + strip_image_token(answer);
}

std::string checkpoint_key(ScoreKind kind, std::string_view id) {
  std::string k(score_kind_name(kind));
  k += '\x1f';
  k += id;
  return k;
}

using ResponseMap = std::unordered_map<std::string, ScoreResponse>;

ResponseMap load_checkpoint(const std::filesystem::path& path) {
  ResponseMap done;
  std::error_code ec;
  if (!std::filesystem::exists(path, ec)) return done;
  for_each_jsonl(path, [&](std::size_t line_no, const nlohmann::json& obj) {
    try {
      ScoreResponse r;
      r.id = obj.at("id").get<std::string>();
      r.kind = parse_score_kind(obj.at("kind").get<std::string>());
      r.score = obj.at("score").get<double>();
      r.scorer_version = obj.value("scorer_version", "");
      if (!std::isfinite(r.score) || !score_in_range(r.kind, r.score)) return;
      done[checkpoint_key(r.kind, r.id)] = std::move(r);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(line_no, std::string("checkpoint record: ") + e.what());
    }
  });
  return done;
}

// Appends finished responses; one writer at a time.
class CheckpointWriter {
 public:
  explicit CheckpointWriter(const std::optional<std::filesystem::path>& path) {
    if (!path) return;
    out_.open(*path, std::ios::binary | std::ios::app);
    if (!out_) throw IoError("cannot open checkpoint " + path->string());
  }

  void append(const std::vector<ScoreResponse>& batch) {
    if (!out_.is_open() || batch.empty()) return;
    std::lock_guard lock(mu_);
    for (const auto& r : batch) {
      nlohmann::json j = to_json(r);
      j["kind"] = score_kind_name(r.kind);
      out_ << j.dump() << '\n';
    }
    out_.flush();
    if (!out_) throw IoError("checkpoint write failed");
  }

 private:
  std::ofstream out_;
  std::mutex mu_;
};

std::vector<ScoreResponse> mock_responses(const std::vector<const ScoreRequest*>& pending) {
  std::vector<ScoreResponse> out;
  out.reserve(pending.size());
  for (const auto* req : pending) {
    out.push_back({req->id, req->kind, mock_score(req->id, req->kind), kMockScorerVersion});
  }
  return out;
}

struct BridgeTarget {
  std::string url;
  double timeout_seconds;

  [[nodiscard]] httplib::Client client() const {
    httplib::Client cli(url);
    const auto secs = static_cast<time_t>(timeout_seconds);
    const auto usecs = static_cast<time_t>((timeout_seconds - static_cast<double>(secs)) * 1e6);
    cli.set_connection_timeout(secs, usecs);
    cli.set_read_timeout(secs, usecs);
    cli.set_write_timeout(secs, usecs);
    return cli;
  }
};

std::optional<nlohmann::json> check_health(const BridgeTarget& target) {
  if (target.url.rfind("http://", 0) != 0 && target.url.rfind("https://", 0) != 0) return std::nullopt;
  auto cli = target.client();
  auto res = cli.Get("/v1/health");
  if (!res || res->status != 200) return std::nullopt;
  try {
    auto j = nlohmann::json::parse(res->body);
    if (j.value("status", "") != "ok") return std::nullopt;
    return j;
  } catch (const nlohmann::json::exception&) {
    return std::nullopt;
  }
}

struct BatchResult {
  std::vector<ScoreResponse> ok;
  std::vector<ScoreFailure> failed;
  bool transport_failure = false;
  std::string transport_reason;
};

// Sends one batch, retrying whatever is still unanswered.
BatchResult run_bridge_batch(const BridgeTarget& target, std::vector<const ScoreRequest*> pending,
                             std::size_t max_retries) {
  BatchResult result;
  std::map<std::string, std::string> last_reason;  // id -> reason
  std::size_t attempt = 0;
  auto cli = target.client();
  while (!pending.empty() && attempt <= max_retries) {
    ++attempt;
    auto body = nlohmann::json::array();
    for (const auto* req : pending) body.push_back(to_json(*req));
    auto res = cli.Post("/v1/score", body.dump(), "application/json");
    if (!res || res->status != 200) {
      result.transport_reason = res ? "HTTP " + std::to_string(res->status)
                                    : "transport error: " + httplib::to_string(res.error());
      for (const auto* req : pending) last_reason[req->id] = result.transport_reason;
      continue;
    }
    nlohmann::json reply;
    try {
      reply = nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::exception&) {
      for (const auto* req : pending) last_reason[req->id] = "malformed response body";
      continue;
    }
    if (!reply.is_array()) {
      for (const auto* req : pending) last_reason[req->id] = "response is not an array";
      continue;
    }
    result.transport_reason.clear();

    std::unordered_map<std::string, const nlohmann::json*> by_id;
    for (const auto& item : reply) {
      if (item.is_object() && item.contains("id") && item["id"].is_string()) {
        by_id.emplace(item["id"].get<std::string>(), &item);
      }
    }
    std::vector<const ScoreRequest*> retry;
    for (const auto* req : pending) {
      const auto it = by_id.find(req->id);
      std::string reason;
      if (it == by_id.end()) {
        reason = "missing from response";
      } else if (const auto& item = *it->second; item.contains("error")) {
        reason = item["error"].is_string() ? item["error"].get<std::string>() : item["error"].dump();
      } else if (!item.contains("score") || !item["score"].is_number()) {
        reason = "no numeric score";
      } else {
        const double score = item["score"].get<double>();
        if (!std::isfinite(score)) {
          reason = "non-finite score";
        } else if (!score_in_range(req->kind, score)) {
          reason = "out of range";
        } else {
          result.ok.push_back({req->id, req->kind, score, item.value("scorer_version", "")});
          continue;
        }
      }
      last_reason[req->id] = reason;
      retry.push_back(req);
    }
    pending = std::move(retry);
  }
  if (!pending.empty() && !result.transport_reason.empty()) result.transport_failure = true;
  for (const auto* req : pending) result.failed.push_back({req->id, req->kind, last_reason[req->id], attempt});
  return result;
}

}  // namespace

ScoringPrompt render_prompt(std::string_view question, std::string_view answer) {
  const auto q = strip_image_token(question);
  const auto a = strip_image_token(answer);
  ScoringPrompt p;
  p.empty_payload = q.empty() && a.empty();
  p.rendered_text.reserve(q.size() + a.size() + kTemplateTail.size() + 8);
  p.rendered_text += "### ";
  p.rendered_text += q;
  p.rendered_text += ' ';
  p.rendered_text += a;
  p.rendered_text += ' ';
  p.rendered_text += kTemplateTail;
  return p;
}

std::string_view score_kind_name(ScoreKind kind) noexcept {
  return kind == ScoreKind::Text ? "TEXT" : "CLIP";
}

ScoreKind parse_score_kind(std::string_view name) {
  if (name == "TEXT") return ScoreKind::Text;
  if (name == "CLIP") return ScoreKind::Clip;
  throw ConfigError("unknown score kind '" + std::string(name) + "'");
}

double mock_score(std::string_view id, ScoreKind kind) {
  // Gaussian draw from two hash uniforms, squashed into the native range so
  // mock corpora look unimodal like real scorer output.
  const std::string tag = "mock:" + std::string(score_kind_name(kind));
  const double u1 = uniform_key(0, tag + ":1", id);
  const double u2 = uniform_key(0, tag + ":2", id);
  const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
  if (kind == ScoreKind::Text) return 1.0 / (1.0 + std::exp(-(0.8 + 1.1 * z)));
  return std::tanh(0.28 + 0.06 * z);
}

bool score_in_range(ScoreKind kind, double score) noexcept {
  if (kind == ScoreKind::Text) return score >= 0.0 && score <= 1.0;
  return score >= -1.0 && score <= 1.0;
}

nlohmann::json to_json(const ScoreRequest& request) {
  nlohmann::json j = {{"id", request.id}, {"kind", score_kind_name(request.kind)}};
  if (request.kind == ScoreKind::Text) {
    j["prompt"] = request.prompt;
  } else {
    j["image_ref"] = request.image_ref;
    j["caption"] = request.caption;
  }
  return j;
}

nlohmann::json to_json(const ScoreResponse& response) {
  return {{"id", response.id}, {"score", response.score}, {"scorer_version", response.scorer_version}};
}

BatchOutcome score_batch(const std::vector<ScoreRequest>& requests, const ScorerOptions& options) {
  if (options.batch_size == 0 || options.batch_size > kMaxBridgeBatch) {
    throw ConfigError("batch size must be in [1, " + std::to_string(kMaxBridgeBatch) + "]");
  }
  BatchOutcome outcome;
  ResponseMap done;
  if (options.checkpoint) done = load_checkpoint(*options.checkpoint);

  std::vector<const ScoreRequest*> pending;
  for (const auto& req : requests) {
    if (done.count(checkpoint_key(req.kind, req.id))) {
      ++outcome.resumed;
    } else {
      pending.push_back(&req);
    }
  }

  CheckpointWriter writer(options.checkpoint);
  std::mutex results_mu;
  auto record = [&](std::vector<ScoreResponse> batch) {
    writer.append(batch);
    std::lock_guard lock(results_mu);
    for (auto& r : batch) done[checkpoint_key(r.kind, r.id)] = std::move(r);
  };

  bool use_mock = options.endpoint == "mock";
  const BridgeTarget target{options.endpoint, options.timeout_seconds};
  outcome.scorer = use_mock ? "mock" : options.endpoint;
  if (!use_mock && !pending.empty()) {
    if (auto health = check_health(target)) {
      outcome.health = std::move(*health);
    } else if (options.mock_fallback) {
      std::cerr << "warning: bridge " << options.endpoint << " unavailable; using mock scorer\n";
      use_mock = true;
      outcome.scorer = "mock (fallback)";
    } else {
      throw BridgeUnavailable(options.endpoint);
    }
  }

  // One kind per batch: replies are matched by id, which is only unique within a kind.
  std::vector<std::vector<const ScoreRequest*>> batches;
  for (const auto kind : {ScoreKind::Text, ScoreKind::Clip}) {
    std::vector<const ScoreRequest*> current;
    for (const auto* req : pending) {
      if (req->kind != kind) continue;
      current.push_back(req);
      if (current.size() == options.batch_size) {
        batches.push_back(std::move(current));
        current.clear();
      }
    }
    if (!current.empty()) batches.push_back(std::move(current));
  }

  if (use_mock) {
    for (const auto& batch : batches) record(mock_responses(batch));
  } else if (!batches.empty()) {
    const std::size_t n_batches = batches.size();
    std::atomic<std::size_t> next{0};
    std::atomic<bool> transport_down{false};
    std::string transport_reason;
    std::exception_ptr worker_error;
    auto worker = [&] {
      try {
        for (std::size_t b = next++; b < n_batches; b = next++) {
          auto res = run_bridge_batch(target, batches[b], options.max_retries);
          record(std::move(res.ok));
          std::lock_guard lock(results_mu);
          if (res.transport_failure) {
            transport_down = true;
            transport_reason = res.transport_reason;
          }
          outcome.failures.insert(outcome.failures.end(), res.failed.begin(), res.failed.end());
        }
      } catch (...) {
        std::lock_guard lock(results_mu);
        if (!worker_error) worker_error = std::current_exception();
      }
    };
    const std::size_t workers = std::max<std::size_t>(1, std::min(options.max_in_flight, n_batches));
    std::vector<std::thread> pool;
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    if (worker_error) std::rethrow_exception(worker_error);
    if (transport_down) throw BridgeUnavailable(options.endpoint + " (" + transport_reason + ")");
  }

  // Failures are reported in request order too.
  std::unordered_map<std::string, std::size_t> order;
  for (std::size_t i = 0; i < requests.size(); ++i) order.emplace(checkpoint_key(requests[i].kind, requests[i].id), i);
  std::sort(outcome.failures.begin(), outcome.failures.end(), [&](const auto& a, const auto& b) {
    return order[checkpoint_key(a.kind, a.id)] < order[checkpoint_key(b.kind, b.id)];
  });
  for (const auto& req : requests) {
    const auto it = done.find(checkpoint_key(req.kind, req.id));
    if (it != done.end()) outcome.responses.push_back(it->second);
  }
  return outcome;
}

std::vector<ScoreRequest> build_requests(const std::vector<RawSampleRecord>& samples) {
  std::vector<ScoreRequest> out;
  out.reserve(2 * samples.size());
  for (const auto& s : samples) {
    const auto prompt = render_prompt(s.question, s.answer);
    if (prompt.empty_payload) std::cerr << "warning: sample " << s.id << " has an empty question and answer\n";
    ScoreRequest text{s.id, ScoreKind::Text, prompt.rendered_text, {}, {}};
    ScoreRequest clip{s.id, ScoreKind::Clip, {}, s.image_ref.value_or(""), payload_of(s.question, s.answer)};
    out.push_back(std::move(text));
    out.push_back(std::move(clip));
  }
  return out;
}

ScoringRun score_samples(const std::vector<RawSampleRecord>& samples, const ScorerOptions& options,
                         bool drop_failed) {
  auto outcome = score_batch(build_requests(samples), options);
  if (!outcome.failures.empty() && !drop_failed) {
    const auto& f = outcome.failures.front();
    throw Error(ErrorClass::Bridge, std::to_string(outcome.failures.size()) +
                                        " scoring request(s) failed; first: " + f.id + " [" +
                                        std::string(score_kind_name(f.kind)) + "] " + f.reason +
                                        " after " + std::to_string(f.attempts) + " attempt(s)");
  }
  std::unordered_map<std::string, std::pair<std::optional<double>, std::optional<double>>> scores;
  for (const auto& r : outcome.responses) {
    auto& slot = scores[r.id];
    (r.kind == ScoreKind::Text ? slot.first : slot.second) = r.score;
  }
  ScoringRun run;
  std::vector<ScoredSample> records;
  for (const auto& s : samples) {
    const auto it = scores.find(s.id);
    if (it == scores.end() || !it->second.first || !it->second.second) {
      ++run.dropped;
      continue;
    }
    records.push_back({s.id, *it->second.first, *it->second.second});
  }
  run.dataset = validate_dataset(std::move(records));
  run.outcome = std::move(outcome);
  return run;
}

}  // namespace dose
