#include "dpr/expand/client.hpp"

#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "dpr/error.hpp"

namespace dpr {

void GenerationParams::validate() const {
  if (!(top_p > 0.0 && top_p <= 1.0)) throw ContractError("GenerationParams: top_p outside (0, 1]");
  if (top_k < 1) throw ContractError("GenerationParams: top_k must be >= 1");
  if (!(temperature > 0.0)) throw ContractError("GenerationParams: temperature must be > 0");
  if (max_new_tokens < 1) throw ContractError("GenerationParams: max_new_tokens must be >= 1");
  if (n_queries_requested < 1) throw ContractError("GenerationParams: n_queries_requested must be >= 1");
}

namespace {

class HttpTransport : public CompletionTransport {
 public:
  TransportResponse post(const std::string& url, const std::string& json_body,
                         const std::string& bearer_token, double timeout_s) override {
    // Split scheme://host:port and path.
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) return {false, 0, "", "bad endpoint url: " + url};
    const auto path_start = url.find('/', scheme_end + 3);
    const std::string origin = path_start == std::string::npos ? url : url.substr(0, path_start);
    const std::string path = path_start == std::string::npos ? "/" : url.substr(path_start);

    httplib::Client client(origin);
    client.set_connection_timeout(std::chrono::milliseconds(static_cast<long>(timeout_s * 1000)));
    client.set_read_timeout(std::chrono::milliseconds(static_cast<long>(timeout_s * 1000)));
    httplib::Headers headers;
    if (!bearer_token.empty()) headers.emplace("Authorization", "Bearer " + bearer_token);
    auto res = client.Post(path, headers, json_body, "application/json");
    if (!res) return {false, 0, "", httplib::to_string(res.error())};
    return {true, res->status, res->body, ""};
  }
};

}  // namespace

std::unique_ptr<CompletionTransport> make_http_transport() {
  return std::make_unique<HttpTransport>();
}

void RateLimiter::acquire() {
  if (interval_s_ <= 0.0) return;
  std::chrono::steady_clock::time_point wake;
  {
    std::lock_guard<std::mutex> lock(mu_);
    const auto now = std::chrono::steady_clock::now();
    if (next_ < now) next_ = now;
    wake = next_;
    next_ += std::chrono::microseconds(static_cast<long>(interval_s_ * 1e6));
  }
  std::this_thread::sleep_until(wake);
}

RemoteGenerator::RemoteGenerator(EndpointConfig cfg, std::unique_ptr<CompletionTransport> transport)
    : cfg_(std::move(cfg)),
      transport_(transport ? std::move(transport) : make_http_transport()),
      limiter_(cfg_.rate_limit_rps) {
  if (cfg_.url.empty()) throw ContractError("RemoteGenerator: endpoint url not configured");
}

std::string RemoteGenerator::generate(const std::string& prompt, const GenerationParams& params) {
  params.validate();
  nlohmann::ordered_json body;
  body["prompt"] = prompt;
  body["top_p"] = params.top_p;
  body["top_k"] = params.top_k;
  body["temperature"] = params.temperature;
  body["max_tokens"] = params.max_new_tokens;
  const std::string payload = body.dump();

  std::string token;
  if (!cfg_.auth_token_env.empty()) {
    if (const char* v = std::getenv(cfg_.auth_token_env.c_str())) token = v;
  }

  TransportResponse last;
  for (int attempt = 0; attempt <= cfg_.retry_budget; ++attempt) {
    if (attempt > 0) {
      const double delay = cfg_.backoff_base_s * static_cast<double>(1 << (attempt - 1));
      std::this_thread::sleep_for(std::chrono::microseconds(static_cast<long>(delay * 1e6)));
    }
    limiter_.acquire();
    requests_issued_.fetch_add(1);
    last = transport_->post(cfg_.url, payload, token, cfg_.timeout_s);
    if (!last.transport_ok) continue;  // connect/timeout: retry
    if (last.status < 200 || last.status >= 300) continue;

    try {
      auto j = nlohmann::json::parse(last.body);
      if (!j.contains("text") || !j["text"].is_string())
        throw ParseError("endpoint response lacks a string \"text\" field");
      return j["text"].get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("endpoint response is not valid JSON: ") + e.what());
    }
  }
  if (!last.transport_ok)
    throw EndpointError("endpoint unreachable after " + std::to_string(cfg_.retry_budget) +
                            " retries: " + last.error,
                        0);
  throw EndpointError("endpoint returned status " + std::to_string(last.status) + " after " +
                          std::to_string(cfg_.retry_budget) + " retries",
                      last.status);
}

}  // namespace dpr
