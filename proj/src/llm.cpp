#include "gazekit/llm.hpp"

#include <cctype>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>

#include <httplib.h>

#include "gazekit/errors.hpp"

namespace gazekit {

namespace {

const char* kStage1DetailedBody =
    R"(You are a data analysis assistant. Without executing any code, determine the structure and semantics of the given raw data fragments.

When outputting:
1) Begin with a concise concluding statement.
2) Then provide a structured JSON (strict JSON, keys in English, values as objective as possible), including but not limited to:

{
  "format": "csv/tsv/jsonl/ndjson/fixed_width/sql_dump/html_table/log/markdown_table/raw_text/other",
  "encoding_guess": "utf-8/gbk/latin1/unknown",
  "dialect": {
    "delimiter": ",",
    "quotechar": "\"",
    "escapechar": null,
    "decimal": ".",
    "thousands": ",",
    "header_row_index": 0
  },
  "columns": [
    {
      "name": "col1",
      "type_guess": "string/int/float/bool/date/datetime/categorical",
      "examples": ["...", "..."],
      "nullable": true
    }
  ],
  "has_header": true,
  "row_count_estimate": "unknown|~N",
  "missing_values_patterns": ["", "NA", "null", "N/A", "-"],
  "notes": ["Any explanations of uncertainty or ambiguity"]
}

3) Do not add any extra text after the JSON.

Below is a snippet of the original data (maximum displaying {sample_chars} characters):

<DATA_SNIPPET>
{snippet}
</DATA_SNIPPET>

Please output the conclusion and strict JSON as required (the JSON must be parsable by json.loads).)";

const char* kStage1SimpleBody =
    R"(Analyze the data snippet and output its structure and information.

<DATA_SNIPPET>
{snippet}
</DATA_SNIPPET>)";

const char* kStage3DiagnoseBody =
    R"(This is the result I obtained using the algorithm in this code. Please analyze whether there are any anomalies, and if so, how I can optimize it.

{snippet})";

std::string iso8601_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t tt = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&tt, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void replace_all(std::string& text, const std::string& from, const std::string& to) {
    std::size_t pos = 0;
    while ((pos = text.find(from, pos)) != std::string::npos) {
        text.replace(pos, from.size(), to);
        pos += to.size();
    }
}

}  // namespace

const char* to_string(TemplateName name) {
    switch (name) {
        case TemplateName::stage1_detailed: return "stage1_detailed";
        case TemplateName::stage1_simple: return "stage1_simple";
        case TemplateName::stage3_diagnose: return "stage3_diagnose";
    }
    return "stage1_detailed";
}

const PromptTemplate& builtin_template(TemplateName name) {
    static const PromptTemplate detailed{TemplateName::stage1_detailed, kStage1DetailedBody};
    static const PromptTemplate simple{TemplateName::stage1_simple, kStage1SimpleBody};
    static const PromptTemplate diagnose{TemplateName::stage3_diagnose, kStage3DiagnoseBody};
    switch (name) {
        case TemplateName::stage1_detailed: return detailed;
        case TemplateName::stage1_simple: return simple;
        case TemplateName::stage3_diagnose: return diagnose;
    }
    return detailed;
}

std::string render_prompt(const PromptTemplate& tmpl, std::size_t max_chars,
                          std::string_view snippet) {
    std::string prompt = tmpl.body;
    if (snippet.size() > max_chars) snippet = snippet.substr(0, max_chars);
    replace_all(prompt, "{sample_chars}", std::to_string(max_chars));
    replace_all(prompt, "{snippet}", std::string(snippet));
    return prompt;
}

Transport http_transport(const LlmProviderConfig& cfg) {
    return [cfg](const std::string& request_body) -> std::string {
        std::string url = cfg.endpoint_url;
        std::string path = "/";
        const std::size_t scheme_end = url.find("://");
        const std::size_t path_start =
            url.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
        if (path_start != std::string::npos) {
            path = url.substr(path_start);
            url = url.substr(0, path_start);
        }

        httplib::Client client(url);
        const auto timeout =
            std::chrono::milliseconds(static_cast<long long>(cfg.timeout_s * 1000.0));
        client.set_connection_timeout(timeout);
        client.set_read_timeout(timeout);
        client.set_write_timeout(timeout);

        httplib::Headers headers;
        if (const char* key = std::getenv(cfg.api_key_env_var.c_str()); key && *key)
            headers.emplace("Authorization", std::string("Bearer ") + key);

        auto result = client.Post(path, headers, request_body, "application/json");
        if (!result)
            throw ProviderTimeout("provider unreachable: " + cfg.endpoint_url + " (" +
                                  httplib::to_string(result.error()) + ")");
        if (result->status < 200 || result->status >= 300)
            throw ProviderTimeout("provider returned HTTP " + std::to_string(result->status));
        return result->body;
    };
}

std::string complete(const LlmProviderConfig& cfg, TemplateName template_name,
                     const std::string& prompt, const Transport& transport) {
    nlohmann::ordered_json request;
    request["model"] = cfg.model_name;
    request["temperature"] = 0;
    request["messages"] = nlohmann::ordered_json::array(
        {nlohmann::ordered_json{{"role", "user"}, {"content", prompt}}});
    const std::string body =
        request.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);

    const std::string response_body = transport(body);

    if (!cfg.audit_log_path.empty()) {
        std::ofstream audit(cfg.audit_log_path, std::ios::app);
        if (audit) {
            nlohmann::ordered_json entry;
            entry["ts"] = iso8601_now();
            entry["template"] = to_string(template_name);
            entry["request"] = request;
            entry["response"] = response_body;
            audit << entry.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace)
                  << "\n";
        }
    }

    nlohmann::json response = nlohmann::json::parse(response_body, nullptr, false);
    if (response.is_discarded() || !response.contains("choices") ||
        !response["choices"].is_array() || response["choices"].empty())
        throw ProviderTimeout("provider returned a malformed completion payload");
    const auto& choice = response["choices"][0];
    if (!choice.contains("message") || !choice["message"].contains("content") ||
        !choice["message"]["content"].is_string())
        throw ProviderTimeout("provider response has no message content");
    return choice["message"]["content"].get<std::string>();
}

std::optional<nlohmann::json> extract_last_json_object(std::string_view text) {
    // Walk the text tracking brace depth outside string literals; remember
    // every balanced top-level object and keep the last parseable one.
    std::optional<nlohmann::json> last;
    std::size_t start = std::string_view::npos;
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (in_string) {
            if (escaped) escaped = false;
            else if (c == '\\') escaped = true;
            else if (c == '"') in_string = false;
            continue;
        }
        if (c == '"') {
            in_string = true;
        } else if (c == '{') {
            if (depth == 0) start = i;
            ++depth;
        } else if (c == '}') {
            if (depth > 0 && --depth == 0 && start != std::string_view::npos) {
                nlohmann::json candidate = nlohmann::json::parse(
                    text.substr(start, i - start + 1), nullptr, false);
                if (candidate.is_object()) last = std::move(candidate);
                start = std::string_view::npos;
            }
        }
    }
    return last;
}

SchemaDescription infer_schema_llm(std::string_view raw_bytes, const LlmProviderConfig& cfg,
                                   const PromptTemplate& tmpl, const Transport& transport) {
    const std::string prompt = render_prompt(tmpl, cfg.max_snippet_chars, raw_bytes);

    auto attempt = [&](const std::string& p) -> SchemaDescription {
        const std::string text = complete(cfg, tmpl.name, p, transport);
        const auto obj = extract_last_json_object(text);
        if (!obj)
            throw SchemaValidationFailed("response contains no parsable JSON object", text);
        return schema_from_json(*obj);
    };

    try {
        return attempt(prompt);
    } catch (const SchemaValidationFailed&) {
        const std::string repair =
            prompt +
            "\n\nYour previous response did not contain valid strict JSON matching the "
            "required structure. Respond again with only the corrected strict JSON object. "
            "Do not add any extra text after the JSON.";
        return attempt(repair);
    }
}

std::vector<ExtractedSuggestion> extract_suggestions(std::string_view narrative) {
    std::vector<ExtractedSuggestion> out;
    const std::string text(narrative);
    std::size_t i = 0;
    while (i < text.size() && out.size() < 32) {
        if (!std::isdigit(static_cast<unsigned char>(text[i]))) {
            ++i;
            continue;
        }
        // Avoid matching the fractional tail of a number we already consumed.
        if (i > 0 && (text[i - 1] == '.' || std::isdigit(static_cast<unsigned char>(text[i - 1])))) {
            ++i;
            continue;
        }
        std::size_t end = i;
        while (end < text.size() &&
               (std::isdigit(static_cast<unsigned char>(text[end])) || text[end] == '.'))
            ++end;
        const double value = std::strtod(text.substr(i, end - i).c_str(), nullptr);

        const std::size_t window_begin = i >= 48 ? i - 48 : 0;
        const std::string before = text.substr(window_begin, i - window_begin);
        const std::string after = text.substr(end, std::min<std::size_t>(12, text.size() - end));

        std::string context;
        if (after.find("deg/s") != std::string::npos ||
            after.find("°/s") != std::string::npos ||
            before.find("deg/s") != std::string::npos)
            context = "deg/s";
        else if (after.find("ms") != std::string::npos)
            context = "ms";
        else if (before.find("threshold") != std::string::npos ||
                 after.find("threshold") != std::string::npos)
            context = "threshold";

        if (!context.empty()) out.push_back(ExtractedSuggestion{context, value});
        i = end;
    }
    return out;
}

DiagnosisNarrative diagnose_llm(const MetricsReport& metrics, const LlmProviderConfig& cfg,
                                const PromptTemplate& tmpl, const Transport& transport) {
    const std::string metrics_json = metrics_to_json(metrics).dump(2);
    const std::string prompt = render_prompt(tmpl, cfg.max_snippet_chars, metrics_json);
    DiagnosisNarrative out;
    out.narrative = complete(cfg, tmpl.name, prompt, transport);
    out.suggestions = extract_suggestions(out.narrative);
    return out;
}

}  // namespace gazekit
