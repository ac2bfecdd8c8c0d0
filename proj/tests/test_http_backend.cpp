#include <catch2/catch_amalgamated.hpp>

#include <atomic>
#include <thread>

#include "httplib.h"
#include "rdr/http_backend.hpp"
#include "rdr/image.hpp"
#include "rdr/png.hpp"
#include "support/temp_dir.hpp"

using rdr::BackendConfig;
using rdr::ModelRequest;

namespace {

// Local chat-completions server with a scriptable status sequence and a hit
// counter; the instrumented transport for hermeticity checks.
class LocalServer {
 public:
  explicit LocalServer(std::vector<int> status_plan = {})
      : status_plan_(std::move(status_plan)) {
    server_.Post("/v1/chat/completions",
                 [this](const httplib::Request& req, httplib::Response& res) {
                   const int hit = hits_.fetch_add(1);
                   last_body_ = req.body;
                   last_auth_ = req.get_header_value("Authorization");
                   const int status =
                       hit < static_cast<int>(status_plan_.size())
                           ? status_plan_[hit]
                           : 200;
                   if (status != 200) {
                     res.status = status;
                     res.set_content("busy", "text/plain");
                     return;
                   }
                   const nlohmann::json reply = {
                       {"choices",
                        {{{"message", {{"role", "assistant"},
                                       {"content", content_}}}}}}};
                   res.set_content(reply.dump(), "application/json");
                 });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  ~LocalServer() {
    server_.stop();
    thread_.join();
  }

  std::string url() const {
    return "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat/completions";
  }

  int hits() const { return hits_.load(); }
  const std::string& last_body() const { return last_body_; }
  const std::string& last_auth() const { return last_auth_; }
  void set_content(std::string c) { content_ = std::move(c); }

 private:
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::atomic<int> hits_{0};
  std::string last_body_;
  std::string last_auth_;
  std::string content_ = "B";
  std::vector<int> status_plan_;
};

BackendConfig config_for(const LocalServer& server) {
  BackendConfig cfg;
  cfg.endpoint_url = server.url();
  cfg.model_name = "test-model";
  cfg.api_key_env_var = "RDR_TEST_API_KEY";
  cfg.retry.max_attempts = 3;
  cfg.retry.base_backoff_ms = 0;  // no sleeping in tests
  cfg.timeout_ms = 5000;
  return cfg;
}

ModelRequest request() {
  ModelRequest req;
  req.png = rdr::encode_png(rdr::Image::filled(3, 3, 1, 2, 3));
  req.prompt = "Which bar is the tallest?";
  req.answer_type = rdr::AnswerType::multiple_choice;
  return req;
}

}  // namespace

TEST_CASE("http backend: wire format and happy path") {
  LocalServer server;
  setenv("RDR_TEST_API_KEY", "sk-test-123", 1);
  rdr::HttpChatBackend backend(config_for(server));

  const auto resp = backend.infer(request());
  REQUIRE(resp.raw_text == "B");
  REQUIRE(resp.attempt_count == 1);
  REQUIRE_FALSE(resp.from_cache);
  REQUIRE(server.hits() == 1);
  REQUIRE(server.last_auth() == "Bearer sk-test-123");

  const auto body = nlohmann::json::parse(server.last_body());
  REQUIRE(body.at("model") == "test-model");
  REQUIRE(body.at("temperature") == 0.0);
  REQUIRE(body.at("max_tokens") == 1024);
  const auto& content = body.at("messages").at(0).at("content");
  REQUIRE(content.at(0).at("type") == "text");
  REQUIRE(content.at(0).at("text") == "Which bar is the tallest?");
  const std::string url = content.at(1).at("image_url").at("url");
  REQUIRE(url.rfind("data:image/png;base64,", 0) == 0);
}

TEST_CASE("http backend: transient 503 then success") {
  LocalServer server({503});
  rdr::HttpChatBackend backend(config_for(server));
  const auto resp = backend.infer(request());
  REQUIRE(resp.raw_text == "B");
  REQUIRE(resp.attempt_count == 2);
  REQUIRE(server.hits() == 2);
}

TEST_CASE("http backend: retries exhausted becomes a transport error") {
  LocalServer server({503, 503, 503, 503});
  rdr::HttpChatBackend backend(config_for(server));
  REQUIRE_THROWS_AS(backend.infer(request()), rdr::TransportError);
  REQUIRE(server.hits() == 3);  // max_attempts, no more
}

TEST_CASE("http backend: 4xx aborts without retry") {
  LocalServer server({401});
  rdr::HttpChatBackend backend(config_for(server));
  REQUIRE_THROWS_AS(backend.infer(request()), rdr::ConfigError);
  REQUIRE(server.hits() == 1);
}

TEST_CASE("http backend: unreachable endpoint") {
  BackendConfig cfg;
  cfg.endpoint_url = "http://127.0.0.1:1/v1/chat/completions";
  cfg.model_name = "m";
  cfg.retry.max_attempts = 2;
  cfg.retry.base_backoff_ms = 0;
  cfg.timeout_ms = 200;
  rdr::HttpChatBackend backend(cfg);
  REQUIRE_THROWS_AS(backend.infer(request()), rdr::TransportError);
}

TEST_CASE("http backend: malformed body is a protocol error with excerpt") {
  LocalServer server;
  server.set_content("");  // shape below replaces choices wholesale
  httplib::Server bad;
  bad.Post("/v1/chat/completions",
           [](const httplib::Request&, httplib::Response& res) {
             res.set_content("{\"surprise\": true}", "application/json");
           });
  const int port = bad.bind_to_any_port("127.0.0.1");
  std::thread t([&] { bad.listen_after_bind(); });
  bad.wait_until_ready();

  BackendConfig cfg;
  cfg.endpoint_url = "http://127.0.0.1:" + std::to_string(port) +
                     "/v1/chat/completions";
  cfg.model_name = "m";
  cfg.retry.base_backoff_ms = 0;
  rdr::HttpChatBackend backend(cfg);
  try {
    backend.infer(request());
    FAIL("expected ProtocolError");
  } catch (const rdr::ProtocolError& e) {
    REQUIRE(std::string(e.what()).find("surprise") != std::string::npos);
  }
  bad.stop();
  t.join();
}

TEST_CASE("http backend behind the replay cache: warm runs touch no network") {
  LocalServer server;
  testsup::TempDir dir;
  auto http = std::make_shared<rdr::HttpChatBackend>(config_for(server));
  rdr::CachedBackend cached(http, dir.path(), "test-model");

  const auto req = request();
  const auto cold = cached.infer(req);
  REQUIRE(cold.raw_text == "B");
  REQUIRE(server.hits() == 1);

  const auto warm = cached.infer(req);
  REQUIRE(warm.raw_text == "B");
  REQUIRE(warm.from_cache);
  REQUIRE(server.hits() == 1);  // zero additional network operations
}
