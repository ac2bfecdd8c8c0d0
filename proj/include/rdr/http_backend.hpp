#pragma once

// HTTP chat-completions client. Speaks the de-facto messages-array format
// with the image attached as a base64 PNG data URL; decode parameters come
// straight from the request. Retries cover transport failures and 5xx only;
// 4xx means the run is misconfigured and aborts.

#include <chrono>
#include <cstdlib>
#include <random>
#include <string>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "rdr/backend.hpp"
#include "rdr/error.hpp"

namespace rdr {

namespace http_detail {

inline std::string base64_encode(std::span<const std::uint8_t> data) {
  static const char* tbl =
      "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  out.reserve((data.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 3 <= data.size(); i += 3) {
    const unsigned v = (data[i] << 16) | (data[i + 1] << 8) | data[i + 2];
    out.push_back(tbl[(v >> 18) & 63]);
    out.push_back(tbl[(v >> 12) & 63]);
    out.push_back(tbl[(v >> 6) & 63]);
    out.push_back(tbl[v & 63]);
  }
  if (i + 1 == data.size()) {
    const unsigned v = data[i] << 16;
    out.push_back(tbl[(v >> 18) & 63]);
    out.push_back(tbl[(v >> 12) & 63]);
    out += "==";
  } else if (i + 2 == data.size()) {
    const unsigned v = (data[i] << 16) | (data[i + 1] << 8);
    out.push_back(tbl[(v >> 18) & 63]);
    out.push_back(tbl[(v >> 12) & 63]);
    out.push_back(tbl[(v >> 6) & 63]);
    out.push_back('=');
  }
  return out;
}

struct Endpoint {
  std::string base;  // scheme://host[:port]
  std::string path;  // leading slash
};

inline Endpoint parse_endpoint(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw ConfigError("endpoint URL must carry a scheme: " + url);
  }
  const auto path_at = url.find('/', scheme_end + 3);
  if (path_at == std::string::npos) return {url, "/"};
  return {url.substr(0, path_at), url.substr(path_at)};
}

inline std::string excerpt(const std::string& body, std::size_t limit = 160) {
  if (body.size() <= limit) return body;
  return body.substr(0, limit) + "...";
}

}  // namespace http_detail

inline nlohmann::json build_chat_body(const ModelRequest& req,
                                      const std::string& model_name) {
  const std::string data_url =
      "data:image/png;base64," + http_detail::base64_encode(req.png);
  return {{"model", model_name},
          {"temperature", req.decode.temperature},
          {"max_tokens", req.decode.max_output_tokens},
          {"messages",
           nlohmann::json::array(
               {{{"role", "user"},
                 {"content",
                  nlohmann::json::array(
                      {{{"type", "text"}, {"text", req.prompt}},
                       {{"type", "image_url"},
                        {"image_url", {{"url", data_url}}}}})}}})}};
}

inline std::string parse_chat_response(const std::string& body) {
  try {
    const auto j = nlohmann::json::parse(body);
    return j.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ProtocolError(std::string("malformed chat response: ") + e.what() +
                        "; body: " + http_detail::excerpt(body));
  }
}

class HttpChatBackend : public ModelBackend {
 public:
  explicit HttpChatBackend(BackendConfig cfg)
      : cfg_(std::move(cfg)),
        endpoint_(http_detail::parse_endpoint(cfg_.endpoint_url)),
        sem_(std::make_unique<std::counting_semaphore<>>(cfg_.max_in_flight)) {
    cfg_.validate();
    if (cfg_.model_name.empty()) {
      throw ConfigError("http backend: model_name must be set");
    }
    if (!cfg_.api_key_env_var.empty()) {
      if (const char* key = std::getenv(cfg_.api_key_env_var.c_str())) {
        api_key_ = key;
      }
    }
  }

  ModelResponse infer(const ModelRequest& req) override {
    sem_->acquire();
    struct Release {
      std::counting_semaphore<>* s;
      ~Release() { s->release(); }
    } release{sem_.get()};

    const std::string body = build_chat_body(req, cfg_.model_name).dump();
    httplib::Headers headers;
    if (!api_key_.empty()) {
      headers.emplace("Authorization", "Bearer " + api_key_);
    }

    const auto t0 = std::chrono::steady_clock::now();
    std::string last_failure;
    for (int attempt = 1; attempt <= cfg_.retry.max_attempts; ++attempt) {
      if (attempt > 1) backoff(attempt - 1);

      httplib::Client client(endpoint_.base);
      client.set_connection_timeout(0, cfg_.timeout_ms * 1000LL);
      client.set_read_timeout(cfg_.timeout_ms / 1000, (cfg_.timeout_ms % 1000) * 1000);
      client.set_write_timeout(cfg_.timeout_ms / 1000, (cfg_.timeout_ms % 1000) * 1000);

      auto res = client.Post(endpoint_.path, headers, body, "application/json");
      if (!res) {
        last_failure = "transport: " + httplib::to_string(res.error());
        continue;
      }
      if (res->status >= 200 && res->status < 300) {
        ModelResponse resp;
        resp.raw_text = parse_chat_response(res->body);
        resp.latency_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                              std::chrono::steady_clock::now() - t0)
                              .count();
        resp.attempt_count = attempt;
        return resp;
      }
      if (res->status >= 500) {
        last_failure = "HTTP " + std::to_string(res->status) + ": " +
                       http_detail::excerpt(res->body);
        continue;
      }
      // 4xx: misconfiguration or bad auth. Retrying would only corrupt the
      // call accounting.
      throw ConfigError("HTTP " + std::to_string(res->status) + " from " +
                        cfg_.endpoint_url + ": " +
                        http_detail::excerpt(res->body));
    }
    throw TransportError("request failed after " +
                         std::to_string(cfg_.retry.max_attempts) +
                         " attempts; last: " + last_failure);
  }

  std::string name() const override { return cfg_.model_name; }

 private:
  void backoff(int failures) const {
    if (cfg_.retry.base_backoff_ms <= 0) return;
    thread_local std::mt19937 jitter_rng(0x9e3779b9u);
    double ms = static_cast<double>(cfg_.retry.base_backoff_ms) *
                static_cast<double>(1LL << (failures - 1));
    if (cfg_.retry.jitter > 0) {
      std::uniform_real_distribution<double> u(-cfg_.retry.jitter,
                                               cfg_.retry.jitter);
      ms *= 1.0 + u(jitter_rng);
    }
    std::this_thread::sleep_for(
        std::chrono::milliseconds(static_cast<long long>(ms)));
  }

  BackendConfig cfg_;
  http_detail::Endpoint endpoint_;
  std::string api_key_;
  std::unique_ptr<std::counting_semaphore<>> sem_;
};

}  // namespace rdr
