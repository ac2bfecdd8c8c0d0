#pragma once

// Model backends: the answer function behind the harness. Everything speaks
// ModelRequest -> ModelResponse; implementations here are the test stubs and
// the content-addressed replay cache. The HTTP client lives in
// http_backend.hpp, the pixel-measuring oracle in oracle.hpp.

#include <openssl/evp.h>

#include <array>
#include <atomic>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "rdr/error.hpp"
#include "rdr/question.hpp"
#include "rdr/version.hpp"

namespace rdr {

// Paper-fixed decoding defaults: greedy, temperature 0, 1024 output tokens.
// Overridable only through explicit config.
struct DecodeParams {
  double temperature = 0.0;
  int max_output_tokens = 1024;
  bool greedy = true;

  bool operator==(const DecodeParams&) const = default;

  nlohmann::json to_json() const {
    return {{"temperature", temperature},
            {"max_output_tokens", max_output_tokens},
            {"greedy", greedy}};
  }
};

struct ModelRequest {
  std::vector<std::uint8_t> png;  // encoded view image
  std::string prompt;             // full rendered text for the model
  std::string prompt_template_id = "default";
  AnswerType answer_type = AnswerType::multiple_choice;
  DecodeParams decode;
  // Metadata for scripted backends and logs; not part of the cache key.
  int view_index = 0;
  std::optional<QuestionRecord> question;
};

struct ModelResponse {
  std::string raw_text;
  long long latency_ms = 0;
  int attempt_count = 1;
  bool from_cache = false;
};

struct RetryPolicy {
  int max_attempts = 3;
  int base_backoff_ms = 250;
  double jitter = 0.25;  // fraction of the backoff randomized
};

struct BackendConfig {
  std::string endpoint_url;
  std::string model_name;
  std::string api_key_env_var = "RDR_API_KEY";
  int max_in_flight = 4;
  RetryPolicy retry;
  int timeout_ms = 60'000;

  void validate() const {
    if (max_in_flight < 1) throw ConfigError("backend: max_in_flight must be >= 1");
    if (retry.max_attempts < 1) {
      throw ConfigError("backend: retry.max_attempts must be >= 1");
    }
    if (retry.base_backoff_ms < 0 || retry.jitter < 0 || retry.jitter > 1) {
      throw ConfigError("backend: bad retry policy");
    }
  }

  nlohmann::json to_json() const {
    return {{"endpoint_url", endpoint_url},
            {"model_name", model_name},
            {"api_key_env_var", api_key_env_var},
            {"max_in_flight", max_in_flight},
            {"retry",
             {{"max_attempts", retry.max_attempts},
              {"base_backoff_ms", retry.base_backoff_ms},
              {"jitter", retry.jitter}}},
            {"timeout_ms", timeout_ms}};
  }
};

class ModelBackend {
 public:
  virtual ~ModelBackend() = default;
  virtual ModelResponse infer(const ModelRequest& req) = 0;
  virtual std::string name() const = 0;
};

// --- digests ----------------------------------------------------------------

class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new()) {
    if (!ctx_ || EVP_DigestInit_ex(ctx_, EVP_sha256(), nullptr) != 1) {
      throw RdrError("sha256: init failed");
    }
  }
  ~Sha256() { EVP_MD_CTX_free(ctx_); }
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  void update(std::span<const std::uint8_t> bytes) {
    if (EVP_DigestUpdate(ctx_, bytes.data(), bytes.size()) != 1) {
      throw RdrError("sha256: update failed");
    }
  }
  void update(std::string_view s) {
    update(std::span<const std::uint8_t>(
        reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
  }

  std::string hex() {
    std::array<std::uint8_t, 32> out{};
    unsigned int len = 0;
    if (EVP_DigestFinal_ex(ctx_, out.data(), &len) != 1 || len != 32) {
      throw RdrError("sha256: final failed");
    }
    static const char* d = "0123456789abcdef";
    std::string hex;
    hex.reserve(64);
    for (auto b : out) {
      hex.push_back(d[b >> 4]);
      hex.push_back(d[b & 0xf]);
    }
    return hex;
  }

 private:
  EVP_MD_CTX* ctx_;
};

// 256-bit content digest over (PNG bytes, rendered prompt, model name,
// decode params), length-framed so part boundaries cannot alias.
inline std::string cache_key(const ModelRequest& req,
                             const std::string& model_name) {
  Sha256 h;
  const auto frame = [&h](std::span<const std::uint8_t> part) {
    std::uint8_t len[8];
    std::uint64_t n = part.size();
    for (int i = 0; i < 8; ++i) len[i] = static_cast<std::uint8_t>(n >> (8 * i));
    h.update(std::span<const std::uint8_t>(len, 8));
    h.update(part);
  };
  const auto frame_str = [&frame](std::string_view s) {
    frame(std::span<const std::uint8_t>(
        reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
  };
  frame(req.png);
  frame_str(req.prompt);
  frame_str(model_name);
  frame_str(req.decode.to_json().dump());
  return h.hex();
}

// --- replay cache -----------------------------------------------------------

// One JSON file per digest under <dir>/<first-2-hex>/<digest>.json. Writes
// are tmp-file + rename, so concurrent inserts of the same key leave one
// complete entry (last writer wins on identical content).
class ReplayCache {
 public:
  explicit ReplayCache(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
  }

  std::filesystem::path path_for(const std::string& digest) const {
    return dir_ / digest.substr(0, 2) / (digest + ".json");
  }

  std::optional<nlohmann::json> lookup(const std::string& digest) const {
    const auto p = path_for(digest);
    std::ifstream in(p);
    if (!in) return std::nullopt;
    try {
      return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw DecodeError("cache entry " + p.string() + ": " + e.what());
    }
  }

  void store(const std::string& digest, const nlohmann::json& entry) const {
    const auto p = path_for(digest);
    std::filesystem::create_directories(p.parent_path());
    static std::atomic<unsigned> salt{0};
    const auto tmp = p.string() + ".tmp" + std::to_string(salt.fetch_add(1)) +
                     "." +
                     std::to_string(std::hash<std::thread::id>{}(
                         std::this_thread::get_id()));
    {
      std::ofstream out(tmp, std::ios::trunc);
      if (!out) throw RdrError("cache: cannot write " + tmp);
      out << entry.dump(2) << '\n';
    }
    std::filesystem::rename(tmp, p);
  }

  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
};

// Content-addressed layer in front of any backend. With a null inner backend
// it is the pure replay backend: cache misses become transport errors.
class CachedBackend : public ModelBackend {
 public:
  CachedBackend(std::shared_ptr<ModelBackend> inner, std::filesystem::path dir,
                std::string model_name)
      : inner_(std::move(inner)),
        cache_(std::move(dir)),
        model_name_(std::move(model_name)) {}

  ModelResponse infer(const ModelRequest& req) override {
    const std::string digest = cache_key(req, model_name_);
    if (auto hit = cache_.lookup(digest)) {
      ModelResponse resp;
      resp.raw_text = hit->at("raw_text").get<std::string>();
      resp.latency_ms = 0;
      resp.attempt_count = 0;
      resp.from_cache = true;
      return resp;
    }
    if (!inner_) {
      throw TransportError("replay cache miss for digest " + digest +
                           " and no live backend configured");
    }
    ModelResponse resp = inner_->infer(req);
    nlohmann::json entry = {{"digest", digest},
                            {"model_name", model_name_},
                            {"prompt", req.prompt},
                            {"prompt_template_id", req.prompt_template_id},
                            {"answer_type", to_string(req.answer_type)},
                            {"decode", req.decode.to_json()},
                            {"raw_text", resp.raw_text},
                            {"harness_version", kVersion}};
    cache_.store(digest, entry);
    return resp;
  }

  std::string name() const override { return model_name_; }

  const ReplayCache& cache() const { return cache_; }

 private:
  std::shared_ptr<ModelBackend> inner_;
  ReplayCache cache_;
  std::string model_name_;
};

// Concurrency throttle: at most max_in_flight infer() calls run inside the
// wrapped backend at any moment.
class BoundedBackend : public ModelBackend {
 public:
  BoundedBackend(std::shared_ptr<ModelBackend> inner, int max_in_flight)
      : inner_(std::move(inner)),
        sem_(std::make_unique<std::counting_semaphore<>>(max_in_flight)) {
    if (max_in_flight < 1) {
      throw ConfigError("BoundedBackend: max_in_flight must be >= 1");
    }
  }

  ModelResponse infer(const ModelRequest& req) override {
    sem_->acquire();
    struct Release {
      std::counting_semaphore<>* s;
      ~Release() { s->release(); }
    } release{sem_.get()};
    return inner_->infer(req);
  }

  std::string name() const override { return inner_->name(); }

 private:
  std::shared_ptr<ModelBackend> inner_;
  std::unique_ptr<std::counting_semaphore<>> sem_;
};

// --- stubs ------------------------------------------------------------------

class ConstantBackend : public ModelBackend {
 public:
  explicit ConstantBackend(std::string answer) : answer_(std::move(answer)) {}
  ModelResponse infer(const ModelRequest&) override {
    return {answer_, 0, 1, false};
  }
  std::string name() const override { return "stub-constant"; }

 private:
  std::string answer_;
};

// Scripted stub: answers are an arbitrary function of the request. Tests use
// it to stage designed answer multisets per view.
class CallbackBackend : public ModelBackend {
 public:
  using Fn = std::function<std::string(const ModelRequest&)>;
  explicit CallbackBackend(Fn fn, std::string name = "stub-scripted")
      : fn_(std::move(fn)), name_(std::move(name)) {}
  ModelResponse infer(const ModelRequest& req) override {
    return {fn_(req), 0, 1, false};
  }
  std::string name() const override { return name_; }

 private:
  Fn fn_;
  std::string name_;
};

}  // namespace rdr
