#pragma once

#include "whatif/common.hpp"

#include <chrono>
#include <mutex>

namespace whatif {

/// Chat-completion endpoint settings. An empty endpoint disables the provider.
struct ProviderConfig {
    std::string endpoint;  // e.g. https://api.example.com/v1/chat/completions
    std::string model;
    std::string api_key;
    double timeout_seconds = 30.0;

    bool enabled() const { return !endpoint.empty(); }
    /// WHATIF_LLM_ENDPOINT, WHATIF_LLM_MODEL and WHATIF_LLM_API_KEY override
    /// the configured values when set.
    ProviderConfig with_env_overrides() const;
};

class ProviderError : public Error {
public:
    using Error::Error;
};

/// Minimal chat-completion client. One request in flight at a time.
class LlmClient {
public:
    explicit LlmClient(ProviderConfig cfg);

    /// Sends a system + user message and returns the first choice's content.
    /// Throws ProviderError on transport failure, non-2xx or malformed reply.
    std::string complete(const std::string& system, const std::string& user);
    const ProviderConfig& config() const { return cfg_; }

private:
    ProviderConfig cfg_;
    std::mutex mu_;
};

}  // namespace whatif
