#pragma once

#include <atomic>
#include <chrono>
#include <memory>
#include <mutex>
#include <string>

namespace dpr {

// Generation settings forwarded to the completion endpoint.
struct GenerationParams {
  double top_p = 0.95;
  int top_k = 50;
  double temperature = 0.7;
  int max_new_tokens = 64;
  int n_queries_requested = 3;

  void validate() const;
};

struct EndpointConfig {
  std::string url;               // e.g. http://host:8000/complete
  std::string auth_token_env;    // name of the env var holding a bearer token
  double timeout_s = 30.0;
  int retry_budget = 2;          // retries after the first attempt
  double backoff_base_s = 0.5;   // doubles per retry
  double rate_limit_rps = 0.0;   // 0 = unlimited
  std::string model_name = "remote";
};

struct TransportResponse {
  bool transport_ok = false;  // false: connect/read failure, no status
  int status = 0;
  std::string body;
  std::string error;
};

// Seam for tests: the real transport speaks HTTP, fakes script responses.
class CompletionTransport {
 public:
  virtual ~CompletionTransport() = default;
  virtual TransportResponse post(const std::string& url, const std::string& json_body,
                                 const std::string& bearer_token, double timeout_s) = 0;
};

std::unique_ptr<CompletionTransport> make_http_transport();

// Thread-safe requests-per-second limiter shared by a worker pool.
class RateLimiter {
 public:
  explicit RateLimiter(double rps) : interval_s_(rps > 0 ? 1.0 / rps : 0.0) {}
  void acquire();

 private:
  double interval_s_;
  std::mutex mu_;
  std::chrono::steady_clock::time_point next_ = std::chrono::steady_clock::now();
};

// One completion call with idempotent retries and exponential backoff.
// Non-2xx and transport failures retry up to the budget; a malformed
// response body is a parse error and does not retry.
class RemoteGenerator {
 public:
  RemoteGenerator(EndpointConfig cfg, std::unique_ptr<CompletionTransport> transport = nullptr);

  std::string generate(const std::string& prompt, const GenerationParams& params);

  const EndpointConfig& config() const { return cfg_; }
  long requests_issued() const { return requests_issued_.load(); }

 private:
  EndpointConfig cfg_;
  std::unique_ptr<CompletionTransport> transport_;
  RateLimiter limiter_;
  std::atomic<long> requests_issued_{0};
};

}  // namespace dpr
