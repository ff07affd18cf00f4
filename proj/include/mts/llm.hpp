#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "mts/errors.hpp"

namespace mts {

enum class Role { System, User, Assistant };

std::string to_string(Role role);
Role role_from_string(const std::string& name);

struct ChatMessage {
  Role role = Role::User;
  std::string content;

  bool operator==(const ChatMessage&) const = default;
};

ChatMessage system_message(std::string content);
ChatMessage user_message(std::string content);
ChatMessage assistant_message(std::string content);

struct SamplingConfig {
  std::string model_id;
  double temperature = 0.1;
  std::optional<double> repetition_penalty = 1.1;  // omitted for endpoints lacking it
  std::optional<long> seed;
  std::optional<int> max_tokens;

  bool operator==(const SamplingConfig&) const = default;
};

// One recorded conversation ending in an assistant reply.
struct Transcript {
  std::string transcript_id;
  std::vector<ChatMessage> messages;
  SamplingConfig sampling;
  std::string essay_id;
  std::string trait_name;
  std::string pipeline_name;
  std::vector<std::string> timestamps;  // one per completion, ISO-8601 UTC

  bool operator==(const Transcript&) const = default;
};

// Roles must alternate user/assistant after an optional leading system message.
void validate_transcript(const Transcript& transcript);

// Deterministic digest of a request: model id, ordered roles and contents,
// temperature, repetition penalty and seed. Stable across runs and platforms;
// timestamps do not participate.
std::string request_key(const std::vector<ChatMessage>& messages, const SamplingConfig& sampling);

class TransportError : public Error {
 public:
  using Error::Error;
};

// A replay store has no recorded reply for the request.
class ReplayMissError : public Error {
 public:
  explicit ReplayMissError(std::string key)
      : Error("replay miss for request key " + key), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

class Backend {
 public:
  virtual ~Backend() = default;
  // messages must end with a user message; returns the assistant reply.
  virtual std::string complete(const std::vector<ChatMessage>& messages,
                               const SamplingConfig& sampling) = 0;
  virtual std::string name() const = 0;
};

struct RetryPolicy {
  int max_attempts = 5;
  int base_delay_ms = 1000;
  int max_delay_ms = 60000;
};

struct HttpBackendConfig {
  std::string base_url;  // e.g. http://localhost:8000/v1
  std::string api_key;   // sent as a bearer token when non-empty
  RetryPolicy retry;
  int timeout_sec = 300;
};

// Speaks the chat-completions wire protocol (POST {base_url}/chat/completions
// with role-tagged messages). Transport failures are retried with exponential
// backoff per the policy, then surfaced as TransportError. Endpoints that
// reject repetition_penalty get it dropped, not errored.
std::unique_ptr<Backend> make_http_backend(HttpBackendConfig config);

using MockHandler =
    std::function<std::string(const std::vector<ChatMessage>&, const SamplingConfig&)>;

// Scripted backend for tests: the handler sees every request.
std::unique_ptr<Backend> make_mock_backend(MockHandler handler);
// Returns the replies in order; throws TransportError when exhausted.
std::unique_ptr<Backend> make_scripted_backend(std::vector<std::string> replies);

class ReplayStore {
 public:
  ReplayStore() = default;

  // Loads a newline-delimited store of serialized transcripts. A corrupt line
  // raises IoError naming the line number. Duplicate keys: latest wins.
  static ReplayStore load(const std::filesystem::path& path);

  std::optional<std::string> lookup(const std::string& key) const;
  std::size_t size() const { return replies_.size(); }
  int duplicates_overwritten() const { return duplicates_; }

 private:
  std::unordered_map<std::string, std::string> replies_;
  int duplicates_ = 0;
};

// Serves recorded replies; unseen requests raise ReplayMissError.
std::unique_ptr<Backend> make_replay_backend(ReplayStore store);

// Thread-safe append-only JSONL writer for transcripts.
class TranscriptRecorder {
 public:
  explicit TranscriptRecorder(const std::filesystem::path& path);
  ~TranscriptRecorder();

  TranscriptRecorder(const TranscriptRecorder&) = delete;
  TranscriptRecorder& operator=(const TranscriptRecorder&) = delete;

  void record(const Transcript& transcript);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

std::string serialize_transcript(const Transcript& transcript);
Transcript deserialize_transcript(const std::string& line);

// Current UTC time as ISO-8601, for transcript timestamps.
std::string utc_timestamp();

}  // namespace mts
