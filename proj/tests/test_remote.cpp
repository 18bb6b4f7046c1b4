#include <doctest.h>

#include <httplib.h>

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <thread>

#include "fixtures.hpp"
#include "ragev/bench.hpp"
#include "ragev/embedding.hpp"
#include "ragev/error.hpp"
#include "ragev/generation.hpp"
#include "ragev/http_client.hpp"
#include "ragev/parallel.hpp"

using namespace ragev;
using nlohmann::json;

namespace {

// OpenAI-style fake: embeddings are [length, 1], chat echoes a fixed answer.
class FakeEndpoint {
public:
    FakeEndpoint() {
        server_.Post("/api/v1/embeddings", [this](const httplib::Request& req, httplib::Response& res) {
            record(req);
            if (fail_next_ > 0) {
                --fail_next_;
                res.status = 503;
                return;
            }
            const auto body = json::parse(req.body);
            json data = json::array();
            for (const auto& text : body.at("input")) {
                data.push_back({{"embedding", {double(text.get<std::string>().size()), 1.0}}});
            }
            res.set_content(json{{"data", data}}.dump(), "application/json");
        });
        server_.Post("/api/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
            record(req);
            const int now = ++in_flight_;
            int seen = max_in_flight_.load();
            while (now > seen && !max_in_flight_.compare_exchange_weak(seen, now)) {
            }
            std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms_));
            --in_flight_;
            if (status_ != 200) {
                res.status = status_;
                return;
            }
            if (fail_next_ > 0) {
                --fail_next_;
                res.status = 429;
                return;
            }
            last_body_ = req.body;
            const json reply = {{"choices", {{{"message", {{"role", "assistant"}, {"content", "SHORT: no\nNot shown [C1]."}}},
                                              {"finish_reason", finish_}}}}};
            res.set_content(reply.dump(), "application/json");
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~FakeEndpoint() {
        server_.stop();
        thread_.join();
    }

    std::string base() const { return "http://127.0.0.1:" + std::to_string(port_) + "/api"; }

    std::atomic<int> requests{0};
    std::atomic<int> fail_next_{0};
    std::atomic<int> status_{200};
    std::atomic<int> delay_ms_{0};
    std::atomic<int> in_flight_{0};
    std::atomic<int> max_in_flight_{0};
    std::string finish_ = "stop";
    std::string last_auth;
    std::string last_request_id;
    std::string last_body_;

private:
    void record(const httplib::Request& req) {
        ++requests;
        std::lock_guard lock(mutex_);
        last_auth = req.get_header_value("Authorization");
        last_request_id = req.get_header_value("X-Request-Id");
    }

    httplib::Server server_;
    std::thread thread_;
    std::mutex mutex_;
    int port_ = 0;
};

HttpSettings fast(HttpSettings h = {}) {
    h.initial_backoff = std::chrono::milliseconds(5);
    return h;
}

}  // namespace

TEST_SUITE("remote") {
    TEST_CASE("remote embeddings with retry and headers") {
        FakeEndpoint fake;
        ProviderConfig p;
        p.kind = ProviderKind::RemoteEndpoint;
        p.endpoint_url = fake.base();
        p.model_name = "fake-embed";
        p.http = fast();
        p.http.api_key = "secret";
        fake.fail_next_ = 2;
        const auto e = make_embedder(p);
        std::vector<std::string> texts;
        for (int i = 0; i < 70; ++i) texts.push_back(std::string(std::size_t(i + 1), 'x'));
        const auto vecs = e->embed_batch(texts);
        REQUIRE(vecs.size() == 70);
        CHECK(vecs[69][0] == 70.0);
        CHECK(fake.requests == 4);  // two 503s, then two batches of at most 64
        CHECK(fake.last_auth == "Bearer secret");
        CHECK(fake.last_request_id.rfind("ragev-", 0) == 0);
    }

    TEST_CASE("retries run out") {
        FakeEndpoint fake;
        fake.fail_next_ = 10;
        HttpSettings h = fast();
        h.base_url = fake.base();
        const JsonHttpClient client(h);
        try {
            client.post("/v1/embeddings", json{{"input", {"a"}}});
            FAIL("expected a transport error");
        } catch (const TransportError& e) {
            CHECK(e.attempts() == 3);
            CHECK(e.last_status() == 503);
        }
        CHECK(fake.requests == 3);
    }

    TEST_CASE("client errors are not retried") {
        FakeEndpoint fake;
        fake.status_ = 400;
        GeneratorConfig g;
        g.kind = GeneratorKind::RemoteChat;
        g.endpoint_url = fake.base();
        g.http = fast();
        CHECK_THROWS_AS(generate(g, assemble_prompt("q", {}), nullptr), TransportError);
        CHECK(fake.requests == 1);
    }

    TEST_CASE("unreachable endpoint") {
        HttpSettings h = fast();
        h.base_url = "http://127.0.0.1:1";
        h.timeout = std::chrono::seconds(2);
        const JsonHttpClient client(h);
        CHECK_THROWS_AS(client.post("/v1/chat/completions", json::object()), TransportError);
        CHECK_THROWS_AS(JsonHttpClient(HttpSettings{}), Error);
    }

    TEST_CASE("chat completion round trip") {
        FakeEndpoint fake;
        fake.fail_next_ = 1;
        fake.finish_ = "length";
        GeneratorConfig g;
        g.kind = GeneratorKind::RemoteChat;
        g.model_name = "fake-chat";
        g.endpoint_url = fake.base();
        g.http = fast();
        RetrievedContext ctx;
        ctx.items.push_back({{"d#0000", "d", 1.0, 1}, "some passage"});
        const auto prompt = assemble_prompt("Does it work?", ctx);
        const Completion c = generate(g, prompt, nullptr);
        CHECK(c.finish_reason == "length");
        const auto parsed = parse_answer(c, prompt);
        CHECK(parsed.short_label == AnswerLabel::No);
        CHECK(parsed.truncated);
        CHECK(parsed.cited_labels == std::vector<std::string>{"[C1]"});
        const auto body = json::parse(fake.last_body_);
        CHECK(body.at("model") == "fake-chat");
        CHECK(body.at("messages").size() == 2);
        CHECK(body.at("messages")[1].at("content").get<std::string>().find("[C1] (source: d) some passage") !=
              std::string::npos);
    }

    TEST_CASE("in-flight requests are bounded") {
        FakeEndpoint fake;
        fake.delay_ms_ = 40;
        GeneratorConfig g;
        g.kind = GeneratorKind::RemoteChat;
        g.endpoint_url = fake.base();
        g.http = fast();
        g.http.max_in_flight = 2;
        const Generator gen(g);
        const auto prompt = assemble_prompt("q", {});
        parallel_for(8, 8, [&](std::size_t) { gen.generate(prompt, nullptr); });
        CHECK(fake.requests == 8);
        CHECK(fake.max_in_flight_ <= 2);
        CHECK(fake.max_in_flight_ >= 1);
    }

    TEST_CASE("remote run records per-item failures") {
        FakeEndpoint fake;
        const auto items = fixtures::synthetic_dataset(10);
        const auto col = fixtures::collection_of(items);
        RunSettings s;
        s.generator.kind = GeneratorKind::RemoteChat;
        s.generator.endpoint_url = fake.base();
        s.generator.http = fast();
        s.generator.http.max_attempts = 1;
        s.concurrency = 1;
        fake.fail_next_ = 1;  // first item fails once, no retry
        IndexCache cache;
        ExperimentConfig cfg;
        cfg.levels = {{"MOD", "R"}};
        cfg.mnemonic = "NORAG-R";
        cfg.norag = true;
        const auto rec = run_experiment(cfg, col, items, s, cache);
        CHECK(rec.complete);
        CHECK(rec.failed == 1);
        CHECK(rec.items[0].failed);
        CHECK(rec.aggregates.at("accuracy").n == 9);
    }
}
