#pragma once

#include <chrono>
#include <condition_variable>
#include <memory>
#include <mutex>
#include <string>

#include <nlohmann/json.hpp>

namespace ragev {

struct HttpSettings {
    std::string base_url;         // e.g. http://localhost:8080 or http://host/api
    std::string api_key;          // sent as "Authorization: Bearer <key>" when non-empty
    int max_in_flight = 4;
    int max_attempts = 3;
    std::chrono::milliseconds initial_backoff{200};
    std::chrono::seconds timeout{60};
};

// Reads RAGEV_API_KEY (and RAGEV_BASE_URL when base_url is empty).
HttpSettings settings_from_env(HttpSettings settings = {});

// JSON-over-HTTP POST client shared by the embedding and chat backends.
// Bounds concurrent requests and retries with exponential backoff on
// connection failures, 429 and 5xx.
class JsonHttpClient {
public:
    explicit JsonHttpClient(HttpSettings settings);
    ~JsonHttpClient();
    JsonHttpClient(const JsonHttpClient&) = delete;
    JsonHttpClient& operator=(const JsonHttpClient&) = delete;

    // path is appended to the base URL's path prefix. Throws TransportError.
    nlohmann::json post(const std::string& path, const nlohmann::json& body) const;

    const HttpSettings& settings() const { return settings_; }

private:
    class Slot;

    HttpSettings settings_;
    std::string scheme_host_port_;
    std::string path_prefix_;
    mutable std::mutex mutex_;
    mutable std::condition_variable cv_;
    mutable int in_flight_ = 0;
};

}  // namespace ragev
