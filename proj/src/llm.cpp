#include "mts/llm.hpp"

#include <atomic>
#include <chrono>
#include <cstdint>
#include <ctime>
#include <deque>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

namespace mts {

using nlohmann::json;

std::string to_string(Role role) {
  switch (role) {
    case Role::System: return "system";
    case Role::User: return "user";
    case Role::Assistant: return "assistant";
  }
  throw ValidationError("unknown role");
}

Role role_from_string(const std::string& name) {
  if (name == "system") return Role::System;
  if (name == "user") return Role::User;
  if (name == "assistant") return Role::Assistant;
  throw ValidationError("unknown role: " + name);
}

ChatMessage system_message(std::string content) { return {Role::System, std::move(content)}; }
ChatMessage user_message(std::string content) { return {Role::User, std::move(content)}; }
ChatMessage assistant_message(std::string content) {
  return {Role::Assistant, std::move(content)};
}

void validate_transcript(const Transcript& transcript) {
  const auto& messages = transcript.messages;
  if (messages.empty()) throw ValidationError("transcript has no messages");
  std::size_t start = messages.front().role == Role::System ? 1 : 0;
  if (start == 1 && messages.front().content.empty()) {
    throw ValidationError("system message must be non-empty");
  }
  for (std::size_t i = start; i < messages.size(); ++i) {
    Role expected = (i - start) % 2 == 0 ? Role::User : Role::Assistant;
    if (messages[i].role != expected) {
      throw ValidationError("transcript roles must alternate user/assistant (message " +
                            std::to_string(i) + ")");
    }
    if (messages[i].role == Role::User && messages[i].content.empty()) {
      throw ValidationError("user message must be non-empty");
    }
  }
}

namespace {

void append_field(std::string& buffer, const std::string& field) {
  buffer += std::to_string(field.size());
  buffer += ':';
  buffer += field;
}

std::string format_double(double value) {
  std::ostringstream out;
  out << std::setprecision(17) << value;
  return out.str();
}

}  // namespace

std::string request_key(const std::vector<ChatMessage>& messages,
                        const SamplingConfig& sampling) {
  std::string canonical;
  append_field(canonical, sampling.model_id);
  append_field(canonical, format_double(sampling.temperature));
  append_field(canonical, sampling.repetition_penalty.has_value()
                              ? format_double(*sampling.repetition_penalty)
                              : "-");
  append_field(canonical, sampling.seed.has_value() ? std::to_string(*sampling.seed) : "-");
  for (const auto& message : messages) {
    append_field(canonical, to_string(message.role));
    append_field(canonical, message.content);
  }
  // FNV-1a, 64 bit; stable across platforms and runs.
  std::uint64_t hash = 0xcbf29ce484222325ull;
  for (unsigned char byte : canonical) {
    hash ^= byte;
    hash *= 0x100000001b3ull;
  }
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << hash;
  return out.str();
}

std::string utc_timestamp() {
  std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buffer[32];
  std::strftime(buffer, sizeof buffer, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buffer;
}

// --- JSON round-trip -------------------------------------------------------

namespace {

json message_to_json(const ChatMessage& message) {
  return json{{"role", to_string(message.role)}, {"content", message.content}};
}

ChatMessage message_from_json(const json& value) {
  return {role_from_string(value.at("role").get<std::string>()),
          value.at("content").get<std::string>()};
}

json sampling_to_json(const SamplingConfig& sampling) {
  json value{{"model_id", sampling.model_id}, {"temperature", sampling.temperature}};
  value["repetition_penalty"] =
      sampling.repetition_penalty.has_value() ? json(*sampling.repetition_penalty) : json();
  value["seed"] = sampling.seed.has_value() ? json(*sampling.seed) : json();
  value["max_tokens"] = sampling.max_tokens.has_value() ? json(*sampling.max_tokens) : json();
  return value;
}

SamplingConfig sampling_from_json(const json& value) {
  SamplingConfig sampling;
  sampling.model_id = value.at("model_id").get<std::string>();
  sampling.temperature = value.at("temperature").get<double>();
  sampling.repetition_penalty.reset();
  if (!value.at("repetition_penalty").is_null()) {
    sampling.repetition_penalty = value.at("repetition_penalty").get<double>();
  }
  if (!value.at("seed").is_null()) sampling.seed = value.at("seed").get<long>();
  if (!value.at("max_tokens").is_null()) sampling.max_tokens = value.at("max_tokens").get<int>();
  return sampling;
}

}  // namespace

std::string serialize_transcript(const Transcript& transcript) {
  json value;
  value["transcript_id"] = transcript.transcript_id;
  value["essay_id"] = transcript.essay_id;
  value["trait_name"] = transcript.trait_name;
  value["pipeline_name"] = transcript.pipeline_name;
  value["sampling"] = sampling_to_json(transcript.sampling);
  value["messages"] = json::array();
  for (const auto& message : transcript.messages) {
    value["messages"].push_back(message_to_json(message));
  }
  value["timestamps"] = transcript.timestamps;
  return value.dump();
}

Transcript deserialize_transcript(const std::string& line) {
  json value = json::parse(line);
  Transcript transcript;
  transcript.transcript_id = value.at("transcript_id").get<std::string>();
  transcript.essay_id = value.at("essay_id").get<std::string>();
  transcript.trait_name = value.at("trait_name").get<std::string>();
  transcript.pipeline_name = value.at("pipeline_name").get<std::string>();
  transcript.sampling = sampling_from_json(value.at("sampling"));
  for (const auto& message : value.at("messages")) {
    transcript.messages.push_back(message_from_json(message));
  }
  transcript.timestamps = value.at("timestamps").get<std::vector<std::string>>();
  return transcript;
}

// --- backends ---------------------------------------------------------------

namespace {

void check_request(const std::vector<ChatMessage>& messages) {
  if (messages.empty() || messages.back().role != Role::User) {
    throw ValidationError("completion request must end with a user message");
  }
}

class MockBackend final : public Backend {
 public:
  explicit MockBackend(MockHandler handler) : handler_(std::move(handler)) {}

  std::string complete(const std::vector<ChatMessage>& messages,
                       const SamplingConfig& sampling) override {
    check_request(messages);
    return handler_(messages, sampling);
  }

  std::string name() const override { return "mock"; }

 private:
  MockHandler handler_;
};

class ScriptedBackend final : public Backend {
 public:
  explicit ScriptedBackend(std::vector<std::string> replies)
      : replies_(replies.begin(), replies.end()) {}

  std::string complete(const std::vector<ChatMessage>& messages,
                       const SamplingConfig&) override {
    check_request(messages);
    std::scoped_lock lock(mutex_);
    if (replies_.empty()) throw TransportError("scripted backend ran out of replies");
    std::string reply = std::move(replies_.front());
    replies_.pop_front();
    return reply;
  }

  std::string name() const override { return "scripted"; }

 private:
  std::mutex mutex_;
  std::deque<std::string> replies_;
};

class ReplayBackend final : public Backend {
 public:
  explicit ReplayBackend(ReplayStore store) : store_(std::move(store)) {}

  std::string complete(const std::vector<ChatMessage>& messages,
                       const SamplingConfig& sampling) override {
    check_request(messages);
    std::string key = request_key(messages, sampling);
    auto reply = store_.lookup(key);
    if (!reply.has_value()) throw ReplayMissError(key);
    return *reply;
  }

  std::string name() const override { return "replay"; }

 private:
  ReplayStore store_;
};

class HttpBackend final : public Backend {
 public:
  explicit HttpBackend(HttpBackendConfig config) : config_(std::move(config)) {
    auto scheme_end = config_.base_url.find("://");
    if (scheme_end == std::string::npos) {
      throw ConfigError("backend url must include a scheme: " + config_.base_url);
    }
    auto path_start = config_.base_url.find('/', scheme_end + 3);
    host_ = config_.base_url.substr(0, path_start);
    path_prefix_ = path_start == std::string::npos ? "" : config_.base_url.substr(path_start);
    while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
    if (host_.rfind("https://", 0) == 0) {
      throw ConfigError("built without TLS support; use an http:// endpoint");
    }
#endif
  }

  std::string complete(const std::vector<ChatMessage>& messages,
                       const SamplingConfig& sampling) override {
    check_request(messages);
    std::string last_error;
    for (int attempt = 0; attempt < config_.retry.max_attempts; ++attempt) {
      if (attempt > 0) {
        long delay = config_.retry.base_delay_ms;
        for (int i = 1; i < attempt; ++i) delay *= 2;
        delay = std::min<long>(delay, config_.retry.max_delay_ms);
        std::this_thread::sleep_for(std::chrono::milliseconds(delay));
      }
      httplib::Client client(host_);
      client.set_read_timeout(config_.timeout_sec, 0);
      client.set_connection_timeout(10, 0);
      httplib::Headers headers;
      if (!config_.api_key.empty()) {
        headers.emplace("Authorization", "Bearer " + config_.api_key);
      }
      auto result = client.Post(path_prefix_ + "/chat/completions", headers,
                                build_body(messages, sampling), "application/json");
      if (!result) {
        last_error = "transport failure: " + httplib::to_string(result.error());
        continue;
      }
      if (result->status == 200) {
        try {
          json reply = json::parse(result->body);
          return reply.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const std::exception& error) {
          last_error = std::string("malformed completion response: ") + error.what();
          continue;
        }
      }
      // Endpoints without repetition_penalty reject the field; drop it and go on.
      if (result->status == 400 && send_repetition_penalty_ &&
          result->body.find("repetition_penalty") != std::string::npos) {
        send_repetition_penalty_ = false;
        --attempt;
        continue;
      }
      if (result->status >= 400 && result->status < 500 && result->status != 429 &&
          result->status != 408) {
        throw TransportError("endpoint rejected request (" + std::to_string(result->status) +
                             "): " + result->body);
      }
      last_error = "endpoint returned " + std::to_string(result->status);
    }
    throw TransportError("completion failed after " + std::to_string(config_.retry.max_attempts) +
                         " attempts; last error: " + last_error);
  }

  std::string name() const override { return "http:" + config_.base_url; }

 private:
  std::string build_body(const std::vector<ChatMessage>& messages,
                         const SamplingConfig& sampling) const {
    json body;
    body["model"] = sampling.model_id;
    body["temperature"] = sampling.temperature;
    if (sampling.repetition_penalty.has_value() && send_repetition_penalty_) {
      body["repetition_penalty"] = *sampling.repetition_penalty;
    }
    if (sampling.seed.has_value()) body["seed"] = *sampling.seed;
    if (sampling.max_tokens.has_value()) body["max_tokens"] = *sampling.max_tokens;
    body["messages"] = json::array();
    for (const auto& message : messages) body["messages"].push_back(message_to_json(message));
    return body.dump();
  }

  HttpBackendConfig config_;
  std::string host_;
  std::string path_prefix_;
  std::atomic<bool> send_repetition_penalty_{true};
};

}  // namespace

std::unique_ptr<Backend> make_mock_backend(MockHandler handler) {
  return std::make_unique<MockBackend>(std::move(handler));
}

std::unique_ptr<Backend> make_scripted_backend(std::vector<std::string> replies) {
  return std::make_unique<ScriptedBackend>(std::move(replies));
}

std::unique_ptr<Backend> make_replay_backend(ReplayStore store) {
  return std::make_unique<ReplayBackend>(std::move(store));
}

std::unique_ptr<Backend> make_http_backend(HttpBackendConfig config) {
  return std::make_unique<HttpBackend>(std::move(config));
}

ReplayStore ReplayStore::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read replay store: " + path.string());
  ReplayStore store;
  std::string line;
  long line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    Transcript transcript;
    try {
      transcript = deserialize_transcript(line);
    } catch (const std::exception& error) {
      throw IoError("replay store " + path.string() + " line " + std::to_string(line_number) +
                    ": corrupt entry: " + error.what());
    }
    if (transcript.messages.empty() || transcript.messages.back().role != Role::Assistant) {
      throw IoError("replay store " + path.string() + " line " + std::to_string(line_number) +
                    ": transcript does not end with an assistant reply");
    }
    std::vector<ChatMessage> request(transcript.messages.begin(),
                                     transcript.messages.end() - 1);
    std::string key = request_key(request, transcript.sampling);
    auto [it, inserted] = store.replies_.insert_or_assign(key, transcript.messages.back().content);
    if (!inserted) ++store.duplicates_;  // latest record wins
  }
  return store;
}

std::optional<std::string> ReplayStore::lookup(const std::string& key) const {
  auto it = replies_.find(key);
  if (it == replies_.end()) return std::nullopt;
  return it->second;
}

struct TranscriptRecorder::Impl {
  std::mutex mutex;
  std::ofstream out;
};

TranscriptRecorder::TranscriptRecorder(const std::filesystem::path& path)
    : impl_(std::make_unique<Impl>()) {
  impl_->out.open(path, std::ios::binary | std::ios::app);
  if (!impl_->out) throw IoError("cannot open transcript store for append: " + path.string());
}

TranscriptRecorder::~TranscriptRecorder() = default;

void TranscriptRecorder::record(const Transcript& transcript) {
  validate_transcript(transcript);
  std::string line = serialize_transcript(transcript);
  std::scoped_lock lock(impl_->mutex);
  impl_->out << line << "\n";
  impl_->out.flush();
}

}  // namespace mts
