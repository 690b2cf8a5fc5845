#pragma once

#include <memory>
#include <string>

namespace kgi {

// Where and how to reach a chat-completion endpoint. The token is never
// stored in config files; only the name of the environment variable is.
struct ChatEndpoint {
    std::string base_url;  // "http://host:port"
    std::string path = "/v1/chat/completions";
    std::string model;
    std::string api_token_env = "KGINSTRUCT_API_TOKEN";
    double temperature = 0.0;
    int max_retries = 3;        // retries after the first attempt
    int timeout_seconds = 30;   // per-request connect/read/write timeout
    double requests_per_second = 0.0;  // 0 = unthrottled
};

// Minimal chat-completion client: one system + one user message in, the first
// choice's text out. Transport failures and 429/5xx responses are retried
// with exponential backoff before surfacing BackendUnavailable; other 4xx
// statuses fail immediately since a retry cannot fix the request. A reply
// that parses but carries no text throws EmptyBackendResponse.
//
// complete() is safe to call from several threads: each call opens its own
// connection, and the shared rate limiter hands out send slots so the
// combined request rate stays at requests_per_second.
class ChatClient {
  public:
    explicit ChatClient(ChatEndpoint endpoint);
    ~ChatClient();
    ChatClient(const ChatClient&) = delete;
    ChatClient& operator=(const ChatClient&) = delete;

    std::string complete(const std::string& system_text, const std::string& user_text);

    const ChatEndpoint& endpoint() const;

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace kgi
