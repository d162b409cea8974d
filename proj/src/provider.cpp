#include "whatif/provider.hpp"

#include <httplib.h>
#include <json.hpp>

#include <cstdlib>

namespace whatif {

namespace {

struct Url {
    std::string origin;  // scheme://host[:port]
    std::string path;
};

Url split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw ProviderError("provider endpoint must be an http(s) URL: " + url);
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

ProviderConfig ProviderConfig::with_env_overrides() const {
    ProviderConfig out = *this;
    if (const char* v = std::getenv("WHATIF_LLM_ENDPOINT")) out.endpoint = v;
    if (const char* v = std::getenv("WHATIF_LLM_MODEL")) out.model = v;
    if (const char* v = std::getenv("WHATIF_LLM_API_KEY")) out.api_key = v;
    return out;
}

LlmClient::LlmClient(ProviderConfig cfg) : cfg_(std::move(cfg)) {}

std::string LlmClient::complete(const std::string& system, const std::string& user) {
    std::lock_guard lock(mu_);
    if (!cfg_.enabled()) throw ProviderError("provider is not configured");
    const Url url = split_url(cfg_.endpoint);
    httplib::Client cli(url.origin);
    const auto secs = static_cast<time_t>(cfg_.timeout_seconds);
    cli.set_connection_timeout(secs, 0);
    cli.set_read_timeout(secs, 0);
    cli.set_write_timeout(secs, 0);
    httplib::Headers headers;
    if (!cfg_.api_key.empty()) headers.emplace("Authorization", "Bearer " + cfg_.api_key);

    const nlohmann::json body = {
        {"model", cfg_.model},
        {"temperature", 0},
        {"messages", {{{"role", "system"}, {"content", system}}, {{"role", "user"}, {"content", user}}}}};
    auto res = cli.Post(url.path, headers, body.dump(), "application/json");
    if (!res) throw ProviderError("provider unreachable: " + httplib::to_string(res.error()));
    if (res->status < 200 || res->status >= 300)
        throw ProviderError("provider returned HTTP " + std::to_string(res->status));
    try {
        const auto reply = nlohmann::json::parse(res->body);
        return reply.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw ProviderError(std::string("malformed provider reply: ") + e.what());
    }
}

}  // namespace whatif
