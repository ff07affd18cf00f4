#include <doctest.h>

#include <atomic>
#include <fstream>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "mts/llm.hpp"
#include "test_support.hpp"

using namespace mts;

namespace {

SamplingConfig sampling_fixture() {
  SamplingConfig sampling;
  sampling.model_id = "llama2-13b-chat";
  sampling.temperature = 0.1;
  sampling.repetition_penalty = 1.1;
  sampling.seed = 42;
  return sampling;
}

std::vector<ChatMessage> conversation_fixture() {
  return {system_message("You are a rater."), user_message("Rate this essay.")};
}

}  // namespace

TEST_SUITE("llm") {

TEST_CASE("request_key is deterministic and content-sensitive") {
  auto messages = conversation_fixture();
  auto sampling = sampling_fixture();
  CHECK(request_key(messages, sampling) == request_key(messages, sampling));

  auto other = messages;
  other[1].content += "!";
  CHECK(request_key(messages, sampling) != request_key(other, sampling));

  auto warmer = sampling;
  warmer.temperature = 0.2;
  CHECK(request_key(messages, sampling) != request_key(messages, warmer));

  auto reseeded = sampling;
  reseeded.seed = 43;
  CHECK(request_key(messages, sampling) != request_key(messages, reseeded));

  // Field boundaries matter: moving a character across messages changes nothing
  // visible to naive concatenation, but must change the key.
  std::vector<ChatMessage> a{user_message("ab"), assistant_message("c"), user_message("x")};
  std::vector<ChatMessage> b{user_message("a"), assistant_message("bc"), user_message("x")};
  CHECK(request_key(a, sampling) != request_key(b, sampling));
}

TEST_CASE("mock and scripted backends") {
  auto mock = make_mock_backend([](const std::vector<ChatMessage>& messages,
                                   const SamplingConfig&) {
    return "echo: " + messages.back().content;
  });
  CHECK(mock->complete(conversation_fixture(), sampling_fixture()) == "echo: Rate this essay.");

  auto scripted = make_scripted_backend({"Score: <score>7</score>", "second"});
  CHECK(scripted->complete(conversation_fixture(), sampling_fixture()) ==
        "Score: <score>7</score>");
  CHECK(scripted->complete(conversation_fixture(), sampling_fixture()) == "second");
  CHECK_THROWS_AS(scripted->complete(conversation_fixture(), sampling_fixture()),
                  TransportError);

  CHECK_THROWS_AS(mock->complete({assistant_message("x")}, sampling_fixture()),
                  ValidationError);
}

TEST_CASE("transcript validation enforces role alternation") {
  Transcript transcript;
  transcript.transcript_id = "t";
  transcript.sampling = sampling_fixture();
  transcript.messages = {system_message("s"), user_message("u"), assistant_message("a")};
  CHECK_NOTHROW(validate_transcript(transcript));

  transcript.messages = {user_message("u"), user_message("u2")};
  CHECK_THROWS_AS(validate_transcript(transcript), ValidationError);

  transcript.messages = {system_message("s"), assistant_message("a")};
  CHECK_THROWS_AS(validate_transcript(transcript), ValidationError);
}

TEST_CASE("transcript JSON round-trips") {
  Transcript transcript;
  transcript.transcript_id = "mts:e1:Task Response:t2:a1";
  transcript.messages = {system_message("sys"), user_message("q"), assistant_message("a")};
  transcript.sampling = sampling_fixture();
  transcript.essay_id = "e1";
  transcript.trait_name = "Task Response";
  transcript.pipeline_name = "mts";
  transcript.timestamps = {"2024-05-01T10:00:00Z"};
  CHECK(deserialize_transcript(serialize_transcript(transcript)) == transcript);
}

TEST_CASE("record then replay returns the recorded reply byte-exactly") {
  testsupport::TempDir dir("replay");
  auto store_path = dir.path() / "store.jsonl";
  auto sampling = sampling_fixture();
  auto request = conversation_fixture();

  {
    TranscriptRecorder recorder(store_path);
    Transcript transcript;
    transcript.transcript_id = "t1";
    transcript.messages = request;
    transcript.messages.push_back(assistant_message("the exact reply — bytes"));
    transcript.sampling = sampling;
    transcript.pipeline_name = "mts";
    transcript.timestamps = {utc_timestamp()};
    recorder.record(transcript);
  }

  auto backend = make_replay_backend(ReplayStore::load(store_path));
  CHECK(backend->complete(request, sampling) == "the exact reply — bytes");

  auto other = request;
  other[1].content = "different";
  try {
    backend->complete(other, sampling);
    FAIL("expected a replay miss");
  } catch (const ReplayMissError& miss) {
    CHECK(miss.key() == request_key(other, sampling));
    CHECK(std::string(miss.what()).find(miss.key()) != std::string::npos);
  }
}

TEST_CASE("replay store: duplicates, corruption, empty store") {
  testsupport::TempDir dir("replay2");
  auto store_path = dir.path() / "store.jsonl";
  auto sampling = sampling_fixture();
  auto request = conversation_fixture();

  {
    TranscriptRecorder recorder(store_path);
    for (const char* reply : {"first", "latest"}) {
      Transcript transcript;
      transcript.transcript_id = "t";
      transcript.messages = request;
      transcript.messages.push_back(assistant_message(reply));
      transcript.sampling = sampling;
      transcript.timestamps = {utc_timestamp()};
      recorder.record(transcript);
    }
  }
  ReplayStore store = ReplayStore::load(store_path);
  CHECK(store.size() == 1);
  CHECK(store.duplicates_overwritten() == 1);
  CHECK(store.lookup(request_key(request, sampling)) == "latest");

  {
    std::ofstream corrupt(store_path, std::ios::app);
    corrupt << "{not json\n";
  }
  try {
    ReplayStore::load(store_path);
    FAIL("expected corrupt-entry error");
  } catch (const IoError& error) {
    CHECK(std::string(error.what()).find("line 3") != std::string::npos);
  }

  auto empty_path = dir.path() / "empty.jsonl";
  { std::ofstream touch(empty_path); }
  ReplayStore empty = ReplayStore::load(empty_path);
  CHECK(empty.size() == 0);
  CHECK_FALSE(empty.lookup("anything").has_value());
}

TEST_CASE("http backend speaks the chat-completions protocol") {
  httplib::Server server;
  std::atomic<int> hits{0};
  std::string seen_body;
  std::string seen_auth;
  server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    hits++;
    seen_body = req.body;
    seen_auth = req.get_header_value("Authorization");
    nlohmann::json reply = {
        {"choices", {{{"message", {{"role", "assistant"}, {"content", "Score: <score>7</score>"}}}}}}};
    res.set_content(reply.dump(), "application/json");
  });
  int port = server.bind_to_any_port("127.0.0.1");
  std::thread worker([&]() { server.listen_after_bind(); });
  server.wait_until_ready();

  HttpBackendConfig config;
  config.base_url = "http://127.0.0.1:" + std::to_string(port) + "/v1";
  config.api_key = "sk-test";
  config.retry = {3, 0, 0};
  auto backend = make_http_backend(config);
  std::string reply = backend->complete(conversation_fixture(), sampling_fixture());
  CHECK(reply == "Score: <score>7</score>");
  CHECK(hits == 1);
  CHECK(seen_auth == "Bearer sk-test");

  nlohmann::json body = nlohmann::json::parse(seen_body);
  CHECK(body["model"] == "llama2-13b-chat");
  CHECK(body["temperature"] == 0.1);
  CHECK(body["repetition_penalty"] == 1.1);
  CHECK(body["seed"] == 42);
  REQUIRE(body["messages"].size() == 2);
  CHECK(body["messages"][0]["role"] == "system");
  CHECK(body["messages"][1]["content"] == "Rate this essay.");

  server.stop();
  worker.join();
}

TEST_CASE("http backend retries transient failures with a bounded budget") {
  httplib::Server server;
  std::atomic<int> hits{0};
  server.Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
    int n = ++hits;
    if (n < 3 || n >= 1000) {
      res.status = 500;
      res.set_content("overloaded", "text/plain");
      return;
    }
    nlohmann::json reply = {
        {"choices", {{{"message", {{"role", "assistant"}, {"content", "ok"}}}}}}};
    res.set_content(reply.dump(), "application/json");
  });
  int port = server.bind_to_any_port("127.0.0.1");
  std::thread worker([&]() { server.listen_after_bind(); });
  server.wait_until_ready();

  HttpBackendConfig config;
  config.base_url = "http://127.0.0.1:" + std::to_string(port) + "/v1";
  config.retry = {5, 0, 0};
  auto backend = make_http_backend(config);
  CHECK(backend->complete(conversation_fixture(), sampling_fixture()) == "ok");
  CHECK(hits == 3);

  hits = 1000;  // every remaining attempt fails
  CHECK_THROWS_AS(backend->complete(conversation_fixture(), sampling_fixture()),
                  TransportError);

  server.stop();
  worker.join();
}

TEST_CASE("endpoints that reject repetition_penalty get it dropped, not errored") {
  httplib::Server server;
  std::atomic<int> hits{0};
  std::vector<std::string> bodies;
  server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    hits++;
    bodies.push_back(req.body);
    if (req.body.find("repetition_penalty") != std::string::npos) {
      res.status = 400;
      res.set_content("{\"error\": \"unknown parameter: repetition_penalty\"}",
                      "application/json");
      return;
    }
    nlohmann::json reply = {
        {"choices", {{{"message", {{"role", "assistant"}, {"content", "ok"}}}}}}};
    res.set_content(reply.dump(), "application/json");
  });
  int port = server.bind_to_any_port("127.0.0.1");
  std::thread worker([&]() { server.listen_after_bind(); });
  server.wait_until_ready();

  HttpBackendConfig config;
  config.base_url = "http://127.0.0.1:" + std::to_string(port) + "/v1";
  config.retry = {3, 0, 0};
  auto backend = make_http_backend(config);
  CHECK(backend->complete(conversation_fixture(), sampling_fixture()) == "ok");
  CHECK(hits == 2);
  // Subsequent requests skip the parameter straight away.
  CHECK(backend->complete(conversation_fixture(), sampling_fixture()) == "ok");
  CHECK(hits == 3);
  CHECK(bodies.back().find("repetition_penalty") == std::string::npos);

  server.stop();
  worker.join();
}

TEST_CASE("other 4xx responses fail fast") {
  httplib::Server server;
  std::atomic<int> hits{0};
  server.Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
    hits++;
    res.status = 401;
    res.set_content("bad key", "text/plain");
  });
  int port = server.bind_to_any_port("127.0.0.1");
  std::thread worker([&]() { server.listen_after_bind(); });
  server.wait_until_ready();

  HttpBackendConfig config;
  config.base_url = "http://127.0.0.1:" + std::to_string(port) + "/v1";
  config.retry = {5, 0, 0};
  auto backend = make_http_backend(config);
  CHECK_THROWS_AS(backend->complete(conversation_fixture(), sampling_fixture()),
                  TransportError);
  CHECK(hits == 1);

  server.stop();
  worker.join();
}

}  // TEST_SUITE
