#pragma once
// Score acquisition.
//
// Text quality is the yes-probability an instruction-tuned LLM assigns when
// asked whether a (question, answer) pair is informative; the clip score is
// an image/caption cosine similarity. Both models live behind an HTTP bridge:
//
//   POST /v1/score   body: JSON array (<= 256) of requests
//                      {"id", "kind": "TEXT", "prompt"}
//                      {"id", "kind": "CLIP", "image_ref", "caption"}
//                    reply: JSON array of {"id", "score", "scorer_version"}
//                      or {"id", "error"} for a per-item failure
//   GET  /v1/health  reply: {"status": "ok", "models": {...}}
//
// The endpoint "mock" swaps in a deterministic hash-based scorer.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "dose/core_model.hpp"
#include "dose/ingest.hpp"

namespace dose {

inline constexpr std::size_t kMaxBridgeBatch = 256;
inline constexpr const char* kMockScorerVersion = "mock-blake2b/1";

struct ScoringPrompt {
  std::string rendered_text;
  bool empty_payload = false;
};

// Fills the fixed scoring template. Any "<image>" token is dropped from the
// payload and surrounding whitespace trimmed.
ScoringPrompt render_prompt(std::string_view question, std::string_view answer);

enum class ScoreKind { Text, Clip };
std::string_view score_kind_name(ScoreKind kind) noexcept;  // "TEXT" / "CLIP"
ScoreKind parse_score_kind(std::string_view name);

// Deterministic stand-in scorer: TEXT in (0, 1), CLIP in (-1, 1).
double mock_score(std::string_view id, ScoreKind kind);

// TEXT in [0, 1], CLIP in [-1, 1].
bool score_in_range(ScoreKind kind, double score) noexcept;

struct ScoreRequest {
  std::string id;
  ScoreKind kind = ScoreKind::Text;
  std::string prompt;     // TEXT
  std::string image_ref;  // CLIP
  std::string caption;    // CLIP
};

struct ScoreResponse {
  std::string id;
  ScoreKind kind = ScoreKind::Text;
  double score = 0.0;
  std::string scorer_version;
};

struct ScoreFailure {
  std::string id;
  ScoreKind kind = ScoreKind::Text;
  std::string reason;
  std::size_t attempts = 0;
};

nlohmann::json to_json(const ScoreRequest& request);
nlohmann::json to_json(const ScoreResponse& response);

struct ScorerOptions {
  std::string endpoint = "mock";  // "mock" or http://host:port
  bool mock_fallback = false;
  std::size_t batch_size = kMaxBridgeBatch;
  std::size_t max_in_flight = 4;
  std::size_t max_retries = 2;
  double timeout_seconds = 60.0;
  std::optional<std::filesystem::path> checkpoint;  // JSONL, appended as batches finish
};

struct BatchOutcome {
  std::vector<ScoreResponse> responses;  // in request order, successes only
  std::vector<ScoreFailure> failures;
  std::size_t resumed = 0;  // answered from the checkpoint
  std::string scorer;       // "mock", or the bridge URL
  nlohmann::json health;    // bridge health reply, null for mock
};

// Scores every request. Already checkpointed (id, kind) pairs are never sent
// again. Throws BridgeUnavailable when the bridge cannot be reached and
// mock_fallback is off.
BatchOutcome score_batch(const std::vector<ScoreRequest>& requests, const ScorerOptions& options);

// One TEXT and one CLIP request per sample. The caption is the rendered
// question/answer payload.
std::vector<ScoreRequest> build_requests(const std::vector<RawSampleRecord>& samples);

struct ScoringRun {
  Dataset dataset;
  BatchOutcome outcome;
  std::size_t dropped = 0;
};

// Scores the samples and joins the two kinds into a validated dataset.
// Items with any failure are dropped when drop_failed is set; otherwise a
// failure aborts with a bridge-class error.
ScoringRun score_samples(const std::vector<RawSampleRecord>& samples, const ScorerOptions& options,
                         bool drop_failed = false);

}  // namespace dose
