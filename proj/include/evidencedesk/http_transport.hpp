#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <string>

namespace evidencedesk::net {

using Headers = std::multimap<std::string, std::string>;

struct HttpResponse {
  int status = 0;
  std::string body;
};

/// Minimal JSON-over-HTTP POST seam. Implementations throw Error with
/// kTransport on connection failure and kTimeout when the per-attempt timeout
/// elapses; HTTP error statuses are returned, not thrown.
class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  virtual HttpResponse post_json(const std::string& path,
                                 const std::string& body,
                                 const Headers& headers,
                                 std::chrono::milliseconds timeout) = 0;
  /// Number of requests attempted on the wire.
  virtual std::size_t requests_sent() const = 0;
};

/// `base_url` is scheme://host[:port][/prefix]; POST paths are appended to the
/// prefix. https requires the build to have OpenSSL support.
std::shared_ptr<HttpTransport> make_http_transport(const std::string& base_url);

struct RetryPolicy {
  int max_retries = 3;
  std::chrono::milliseconds initial_backoff{500};
  double backoff_multiplier = 2.0;
  std::chrono::milliseconds max_backoff{8000};
  std::chrono::milliseconds attempt_timeout{60000};
};

using SleepFn = std::function<void(std::chrono::milliseconds)>;

/// POSTs with exponential backoff. Retries transport failures, timeouts, 429
/// and 5xx. Returns the first 2xx response; throws kTimeout, kRateLimited or
/// kTransport once retries are exhausted, and kTransport immediately for other
/// 4xx statuses.
HttpResponse post_with_retry(HttpTransport& transport, const std::string& path,
                             const std::string& body, const Headers& headers,
                             const RetryPolicy& policy, const SleepFn& sleep);

}  // namespace evidencedesk::net
