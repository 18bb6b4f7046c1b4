#include "ragev/http_client.hpp"

#include <atomic>
#include <cstdlib>
#include <optional>
#include <thread>

#include <httplib.h>

#include "ragev/error.hpp"

namespace ragev {

namespace {

std::atomic<unsigned long long> g_request_counter{0};

}  // namespace

class JsonHttpClient::Slot {
public:
    explicit Slot(const JsonHttpClient& client) : client_(client) {
        std::unique_lock lock(client_.mutex_);
        client_.cv_.wait(lock, [&] { return client_.in_flight_ < client_.settings_.max_in_flight; });
        ++client_.in_flight_;
    }
    ~Slot() {
        {
            std::lock_guard lock(client_.mutex_);
            --client_.in_flight_;
        }
        client_.cv_.notify_one();
    }

private:
    const JsonHttpClient& client_;
};

HttpSettings settings_from_env(HttpSettings settings) {
    if (settings.api_key.empty()) {
        if (const char* key = std::getenv("RAGEV_API_KEY")) settings.api_key = key;
    }
    if (settings.base_url.empty()) {
        if (const char* url = std::getenv("RAGEV_BASE_URL")) settings.base_url = url;
    }
    return settings;
}

JsonHttpClient::JsonHttpClient(HttpSettings settings) : settings_(std::move(settings)) {
    if (settings_.base_url.empty()) throw_invalid("remote endpoint requires a base URL");
    if (settings_.max_in_flight < 1) settings_.max_in_flight = 1;
    if (settings_.max_attempts < 1) settings_.max_attempts = 1;
    const std::string& url = settings_.base_url;
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw_invalid("base URL lacks a scheme: " + url);
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) {
        scheme_host_port_ = url;
    } else {
        scheme_host_port_ = url.substr(0, path_start);
        path_prefix_ = url.substr(path_start);
        while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
    }
}

JsonHttpClient::~JsonHttpClient() = default;

nlohmann::json JsonHttpClient::post(const std::string& path, const nlohmann::json& body) const {
    Slot slot(*this);
    const std::string request_id = "ragev-" + std::to_string(++g_request_counter);
    httplib::Headers headers{{"X-Request-Id", request_id}};
    if (!settings_.api_key.empty()) {
        headers.emplace("Authorization", "Bearer " + settings_.api_key);
    }
    const std::string payload = body.dump();
    const std::string full_path = path_prefix_ + path;

    std::optional<int> last_status;
    std::string last_error;
    auto backoff = settings_.initial_backoff;
    for (int attempt = 1; attempt <= settings_.max_attempts; ++attempt) {
        httplib::Client client(scheme_host_port_);
        client.set_connection_timeout(settings_.timeout);
        client.set_read_timeout(settings_.timeout);
        auto res = client.Post(full_path, headers, payload, "application/json");
        if (res) {
            last_status = res->status;
            if (res->status >= 200 && res->status < 300) {
                try {
                    return nlohmann::json::parse(res->body);
                } catch (const nlohmann::json::exception& e) {
                    throw TransportError("malformed response body from " + full_path + ": " + e.what(),
                                         attempt, last_status);
                }
            }
            last_error = "HTTP " + std::to_string(res->status) + " from " + full_path;
            const bool retryable = res->status == 429 || res->status >= 500;
            if (!retryable) throw TransportError(last_error, attempt, last_status);
        } else {
            last_error = "request to " + scheme_host_port_ + full_path + " failed: " +
                         httplib::to_string(res.error());
        }
        if (attempt < settings_.max_attempts) {
            std::this_thread::sleep_for(backoff);
            backoff *= 2;
        }
    }
    throw TransportError(last_error, settings_.max_attempts, last_status);
}

}  // namespace ragev
