#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "gazekit/evaluation.hpp"
#include "gazekit/ingest.hpp"

namespace gazekit {

/// Connection settings for a chat-completion endpoint. The API key is always
/// read from the named environment variable; it is never stored in configs
/// or logs.
struct LlmProviderConfig {
    std::string endpoint_url;
    std::string model_name;
    std::string api_key_env_var = "GAZEKIT_API_KEY";
    double timeout_s = 30.0;
    std::size_t max_snippet_chars = 4000;
    std::string audit_log_path;  // JSONL; empty disables auditing
};

enum class TemplateName { stage1_detailed, stage1_simple, stage3_diagnose };

const char* to_string(TemplateName name);

struct PromptTemplate {
    TemplateName name = TemplateName::stage1_detailed;
    std::string body;  // with {sample_chars} and {snippet} placeholders
};

const PromptTemplate& builtin_template(TemplateName name);

/// Substitutes {sample_chars} and {snippet} (snippet truncated to max_chars).
std::string render_prompt(const PromptTemplate& tmpl, std::size_t max_chars,
                          std::string_view snippet);

/// Sends a rendered prompt, returns the assistant message text. The injected
/// transport takes the request body JSON and returns the response body JSON;
/// it throws ProviderTimeout on timeout/connect failure. Tests substitute a
/// canned transport, production uses http_transport.
using Transport = std::function<std::string(const std::string& request_body)>;

Transport http_transport(const LlmProviderConfig& cfg);

/// One chat-completion round trip (messages list, temperature 0) plus
/// optional JSONL audit logging of the request/response pair.
std::string complete(const LlmProviderConfig& cfg, TemplateName template_name,
                     const std::string& prompt, const Transport& transport);

/// Last balanced top-level JSON object in the text, if any.
std::optional<nlohmann::json> extract_last_json_object(std::string_view text);

/// Stage-1 via the provider: prompt with a truncated data snippet, strict-JSON
/// extraction from the tail of the response, contract validation, one repair
/// retry, then SchemaValidationFailed. Callers that allow fallback catch the
/// error and run sniff_schema instead.
SchemaDescription infer_schema_llm(std::string_view raw_bytes, const LlmProviderConfig& cfg,
                                   const PromptTemplate& tmpl, const Transport& transport);

/// A numeric parameter suggestion pulled out of provider prose: the number
/// plus the nearby keyword that anchored it ("threshold", "deg/s", "ms").
struct ExtractedSuggestion {
    std::string context;
    double value = 0.0;

    bool operator==(const ExtractedSuggestion&) const = default;
};

struct DiagnosisNarrative {
    std::string narrative;
    std::vector<ExtractedSuggestion> suggestions;
};

/// Stage-3 via the provider: metrics JSON embedded in the diagnosis prompt,
/// raw narrative returned with bounded-grammar suggestion extraction. Never
/// applies anything.
DiagnosisNarrative diagnose_llm(const MetricsReport& metrics, const LlmProviderConfig& cfg,
                                const PromptTemplate& tmpl, const Transport& transport);

/// Exposed for tests: suggestion extraction grammar over free text.
std::vector<ExtractedSuggestion> extract_suggestions(std::string_view narrative);

}  // namespace gazekit
