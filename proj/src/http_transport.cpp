#include "evidencedesk/http_transport.hpp"

#include "evidencedesk/error.hpp"

#include <algorithm>
#include <atomic>
#include <thread>

#ifdef EVIDENCEDESK_WITH_OPENSSL
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include "httplib.h"

namespace evidencedesk::net {
namespace {

class HttplibTransport final : public HttpTransport {
 public:
  explicit HttplibTransport(const std::string& base_url) {
    auto scheme_end = base_url.find("://");
    std::size_t host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
    auto path_start = base_url.find('/', host_start);
    origin_ = base_url.substr(0, path_start);
    if (path_start != std::string::npos) prefix_ = base_url.substr(path_start);
    while (!prefix_.empty() && prefix_.back() == '/') prefix_.pop_back();
  }

  HttpResponse post_json(const std::string& path, const std::string& body,
                         const Headers& headers,
                         std::chrono::milliseconds timeout) override {
    ++sent_;
    httplib::Client client(origin_);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout);
    const auto usecs =
        std::chrono::duration_cast<std::chrono::microseconds>(timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());
    httplib::Headers h(headers.begin(), headers.end());
    auto res = client.Post(prefix_ + path, h, body, "application/json");
    if (!res) {
      const auto err = res.error();
      if (err == httplib::Error::Read || err == httplib::Error::Write ||
          err == httplib::Error::ConnectionTimeout) {
        throw Error(ErrorCode::kTimeout,
                    "request to " + origin_ + " timed out: " +
                        httplib::to_string(err));
      }
      throw Error(ErrorCode::kTransport, "request to " + origin_ +
                                             " failed: " +
                                             httplib::to_string(err));
    }
    return {res->status, res->body};
  }

  std::size_t requests_sent() const override { return sent_.load(); }

 private:
  std::string origin_;
  std::string prefix_;
  std::atomic<std::size_t> sent_{0};
};

}  // namespace

std::shared_ptr<HttpTransport> make_http_transport(const std::string& base_url) {
  if (!base_url.starts_with("http://") && !base_url.starts_with("https://")) {
    throw Error(ErrorCode::kInvalidArgument,
                "base URL must start with http:// or https://: '" + base_url + "'");
  }
  return std::make_shared<HttplibTransport>(base_url);
}

HttpResponse post_with_retry(HttpTransport& transport, const std::string& path,
                             const std::string& body, const Headers& headers,
                             const RetryPolicy& policy, const SleepFn& sleep) {
  auto backoff = policy.initial_backoff;
  ErrorCode last_code = ErrorCode::kTransport;
  std::string last_message;
  for (int attempt = 0; attempt <= policy.max_retries; ++attempt) {
    if (attempt > 0) {
      if (sleep) {
        sleep(backoff);
      } else {
        std::this_thread::sleep_for(backoff);
      }
      backoff = std::min(
          policy.max_backoff,
          std::chrono::milliseconds(static_cast<long long>(
              static_cast<double>(backoff.count()) * policy.backoff_multiplier)));
    }
    HttpResponse res;
    try {
      res = transport.post_json(path, body, headers, policy.attempt_timeout);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kTransport && e.code() != ErrorCode::kTimeout) {
        throw;
      }
      last_code = e.code();
      last_message = e.what();
      continue;
    }
    if (res.status >= 200 && res.status < 300) return res;
    if (res.status == 429) {
      last_code = ErrorCode::kRateLimited;
      last_message = "rate limited (HTTP 429)";
    } else if (res.status >= 500) {
      last_code = ErrorCode::kTransport;
      last_message = "server error (HTTP " + std::to_string(res.status) + ")";
    } else {
      throw Error(ErrorCode::kTransport,
                  "HTTP " + std::to_string(res.status) + ": " + res.body);
    }
  }
  throw Error(last_code, "giving up after " +
                             std::to_string(policy.max_retries + 1) +
                             " attempts: " + last_message);
}

}  // namespace evidencedesk::net
