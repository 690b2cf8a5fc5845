#include "kginstruct/chat_client.hpp"

#include <httplib.h>
#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <mutex>
#include <thread>

#include "kginstruct/errors.hpp"

namespace kgi {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

struct ChatClient::Impl {
    ChatEndpoint ep;
    std::mutex slot_mutex;
    Clock::time_point next_slot = Clock::now();

    // Hands out evenly spaced send times; callers sleep outside the lock so
    // paced requests can still overlap in flight.
    void pace() {
        if (ep.requests_per_second <= 0.0) return;
        auto interval = std::chrono::duration_cast<Clock::duration>(
            std::chrono::duration<double>(1.0 / ep.requests_per_second));
        Clock::time_point my_slot;
        {
            std::lock_guard lock(slot_mutex);
            auto now = Clock::now();
            my_slot = next_slot < now ? now : next_slot;
            next_slot = my_slot + interval;
        }
        std::this_thread::sleep_until(my_slot);
    }
};

ChatClient::ChatClient(ChatEndpoint endpoint) : impl_(std::make_unique<Impl>()) {
    if (endpoint.base_url.empty()) throw Error(Err::ConfigError, "chat endpoint base_url is empty");
    impl_->ep = std::move(endpoint);
}

ChatClient::~ChatClient() = default;

const ChatEndpoint& ChatClient::endpoint() const { return impl_->ep; }

namespace {

// Pulls choices[0].message.content out of a chat-completion reply.
// Returns false when the body is not the expected shape at all.
bool extract_content(const std::string& body, std::string& out) {
    json reply = json::parse(body, nullptr, /*allow_exceptions=*/false);
    if (!reply.is_object() || !reply.contains("choices") || !reply["choices"].is_array())
        return false;
    if (reply["choices"].empty()) {
        out.clear();  // well-formed but empty: the caller reports it as such
        return true;
    }
    const json& first = reply["choices"][0];
    if (!first.is_object() || !first.contains("message")) return false;
    const json& msg = first["message"];
    if (!msg.is_object() || !msg.contains("content") || !msg["content"].is_string()) return false;
    out = msg["content"].get<std::string>();
    return true;
}

}  // namespace

std::string ChatClient::complete(const std::string& system_text, const std::string& user_text) {
    const ChatEndpoint& ep = impl_->ep;

    json messages = json::array();
    if (!system_text.empty()) messages.push_back({{"role", "system"}, {"content", system_text}});
    messages.push_back({{"role", "user"}, {"content", user_text}});
    json request = {{"model", ep.model}, {"messages", messages}, {"temperature", ep.temperature}};
    std::string body = request.dump();

    httplib::Headers headers;
    if (!ep.api_token_env.empty()) {
        const char* token = std::getenv(ep.api_token_env.c_str());
        if (token && *token) headers.emplace("Authorization", std::string("Bearer ") + token);
    }

    std::string last_failure = "no attempt made";
    int attempts = ep.max_retries < 0 ? 1 : ep.max_retries + 1;
    for (int attempt = 0; attempt < attempts; ++attempt) {
        if (attempt > 0) {
            // 250ms, 500ms, 1s, ... capped at 4s.
            auto backoff = std::chrono::milliseconds(250) * (1 << std::min(attempt - 1, 4));
            std::this_thread::sleep_for(backoff);
        }
        impl_->pace();

        // A connection per attempt keeps concurrent complete() calls safe.
        httplib::Client cli(ep.base_url);
        cli.set_connection_timeout(ep.timeout_seconds, 0);
        cli.set_read_timeout(ep.timeout_seconds, 0);
        cli.set_write_timeout(ep.timeout_seconds, 0);

        auto res = cli.Post(ep.path, headers, body, "application/json");
        if (!res) {
            last_failure = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status == 429 || res->status >= 500) {
            last_failure = "status " + std::to_string(res->status);
            continue;
        }
        if (res->status != 200)
            throw Error(Err::BackendUnavailable, ep.base_url + ep.path + " answered status " +
                                                     std::to_string(res->status));
        std::string content;
        if (!extract_content(res->body, content)) {
            last_failure = "malformed completion body";
            continue;
        }
        if (content.empty())
            throw Error(Err::EmptyBackendResponse, ep.base_url + ep.path + " returned no text");
        return content;
    }
    throw Error(Err::BackendUnavailable, ep.base_url + ep.path + " unreachable after " +
                                             std::to_string(attempts) + " attempts (" +
                                             last_failure + ")");
}

}  // namespace kgi
