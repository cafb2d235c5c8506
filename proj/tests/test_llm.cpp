#include <doctest.h>

#include <atomic>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "gazekit/errors.hpp"
#include "gazekit/llm.hpp"
#include "support.hpp"

using namespace gazekit;

namespace {

std::string completion_envelope(const std::string& content) {
    nlohmann::json j;
    j["choices"] = nlohmann::json::array();
    j["choices"].push_back({{"message", {{"role", "assistant"}, {"content", content}}}});
    return j.dump();
}

Transport canned(const std::string& content, int* calls = nullptr) {
    return [content, calls](const std::string&) {
        if (calls) ++*calls;
        return completion_envelope(content);
    };
}

LlmProviderConfig test_config() {
    LlmProviderConfig cfg;
    cfg.endpoint_url = "http://localhost:1/v1/chat/completions";
    cfg.model_name = "test-model";
    cfg.max_snippet_chars = 4000;
    return cfg;
}

}  // namespace

TEST_CASE("builtin stage-1 template carries the JSON contract and placeholders") {
    const PromptTemplate& tmpl = builtin_template(TemplateName::stage1_detailed);
    CHECK(tmpl.body.find("data analysis assistant") != std::string::npos);
    CHECK(tmpl.body.find("{sample_chars}") != std::string::npos);
    CHECK(tmpl.body.find("{snippet}") != std::string::npos);
    CHECK(tmpl.body.find("\"missing_values_patterns\"") != std::string::npos);
    CHECK(tmpl.body.find("Do not add any extra text after the JSON.") != std::string::npos);

    const PromptTemplate& simple = builtin_template(TemplateName::stage1_simple);
    CHECK(simple.body.find(
              "Analyze the data snippet and output its structure and information.") !=
          std::string::npos);

    const PromptTemplate& diag = builtin_template(TemplateName::stage3_diagnose);
    CHECK(diag.body.find("Please analyze whether there are any anomalies") !=
          std::string::npos);
}

TEST_CASE("prompt rendering substitutes and truncates the snippet") {
    const PromptTemplate& tmpl = builtin_template(TemplateName::stage1_detailed);
    const std::string snippet(10000, 'a');
    const std::string prompt = render_prompt(tmpl, 100, snippet);
    CHECK(prompt.find("{snippet}") == std::string::npos);
    CHECK(prompt.find("{sample_chars}") == std::string::npos);
    CHECK(prompt.find(std::string(100, 'a')) != std::string::npos);
    CHECK(prompt.find(std::string(101, 'a')) == std::string::npos);
}

TEST_CASE("the last balanced JSON object is extracted") {
    CHECK(!extract_last_json_object("no json here").has_value());
    const auto single = extract_last_json_object("prefix {\"a\": 1} suffix");
    REQUIRE(single.has_value());
    CHECK((*single)["a"] == 1);

    const auto last = extract_last_json_object("{\"a\": 1} and then {\"b\": {\"c\": 2}}");
    REQUIRE(last.has_value());
    CHECK((*last)["b"]["c"] == 2);

    // Braces inside string literals must not confuse the scanner.
    const auto tricky = extract_last_json_object(
        "note {\"k\": \"open { brace\", \"n\": 3} trailing prose");
    REQUIRE(tricky.has_value());
    CHECK((*tricky)["n"] == 3);
}

TEST_CASE("mocked provider returning the reference schema equals the sniffer") {
    const std::string fixture = testsupport::read_file(testsupport::data_dir() /
                                                       "appendix_inspect.csv");
    const std::string reference = testsupport::read_file(testsupport::data_dir() /
                                                         "appendix_schema.json");
    const std::string content =
        "The snippet is a comma-separated table of four float columns with a header "
        "row.\n\n" +
        reference;

    const SchemaDescription via_llm = infer_schema_llm(
        fixture, test_config(), builtin_template(TemplateName::stage1_detailed),
        canned(content));
    const SchemaDescription via_sniffer = sniff_schema(fixture, 65536);
    CHECK(via_llm == via_sniffer);
}

TEST_CASE("prose-only responses get one repair retry then fail with the raw text") {
    int calls = 0;
    const Transport transport = canned("I cannot produce JSON, sorry.", &calls);
    try {
        infer_schema_llm("time,x\n1,2\n", test_config(),
                         builtin_template(TemplateName::stage1_detailed), transport);
        FAIL("expected SchemaValidationFailed");
    } catch (const SchemaValidationFailed& e) {
        CHECK(calls == 2);
        CHECK(e.raw_response.find("cannot produce JSON") != std::string::npos);
    }
}

TEST_CASE("invalid-contract JSON also triggers the retry path") {
    int calls = 0;
    const Transport transport = canned("{\"format\": \"csv\"}", &calls);
    CHECK_THROWS_AS(infer_schema_llm("x\n1\n", test_config(),
                                     builtin_template(TemplateName::stage1_detailed),
                                     transport),
                    SchemaValidationFailed);
    CHECK(calls == 2);
}

TEST_CASE("diagnosis narrative returns suggestions from the bounded grammar") {
    MetricsReport metrics;
    metrics.fixation.precision = 1.0;
    metrics.fixation.recall = 0.0025;
    metrics.saccade.precision = 0.0998;
    metrics.saccade.recall = 1.0;

    const std::string narrative =
        "The velocity detector looks abnormal. Increase the velocity threshold; typical "
        "thresholds range from 30 deg/s to 100 deg/s depending on noise. A minimum "
        "fixation duration of 60 ms is standard.";
    const DiagnosisNarrative result = diagnose_llm(
        metrics, test_config(), builtin_template(TemplateName::stage3_diagnose),
        canned(narrative));
    CHECK(result.narrative == narrative);
    REQUIRE(result.suggestions.size() == 3);
    CHECK(result.suggestions[0] == ExtractedSuggestion{"deg/s", 30.0});
    CHECK(result.suggestions[1] == ExtractedSuggestion{"deg/s", 100.0});
    CHECK(result.suggestions[2] == ExtractedSuggestion{"ms", 60.0});
}

TEST_CASE("suggestion extraction ignores unanchored numbers") {
    const auto none = extract_suggestions("We saw 42 apples and 17 oranges yesterday.");
    CHECK(none.empty());
    const auto anchored = extract_suggestions("raise the threshold to 45");
    REQUIRE(anchored.size() == 1);
    CHECK(anchored[0].context == "threshold");
    CHECK(anchored[0].value == 45.0);
}

TEST_CASE("audit log records template name, request, and response") {
    const auto dir = testsupport::fresh_temp_dir("audit");
    LlmProviderConfig cfg = test_config();
    cfg.audit_log_path = (dir / "audit.jsonl").string();
    complete(cfg, TemplateName::stage1_detailed, "hello", canned("world"));
    complete(cfg, TemplateName::stage3_diagnose, "again", canned("ok"));

    const std::string log = testsupport::read_file(cfg.audit_log_path);
    std::size_t lines = 0;
    std::istringstream stream(log);
    std::string line;
    while (std::getline(stream, line)) {
        if (line.empty()) continue;
        ++lines;
        const auto entry = nlohmann::json::parse(line);
        CHECK(entry.contains("ts"));
        CHECK(entry.contains("template"));
        CHECK(entry.contains("request"));
        CHECK(entry.contains("response"));
    }
    CHECK(lines == 2);
    std::filesystem::remove_all(dir);
}

TEST_CASE("requests carry temperature zero and the user message") {
    std::string seen_body;
    const Transport transport = [&](const std::string& body) {
        seen_body = body;
        return completion_envelope("ok");
    };
    complete(test_config(), TemplateName::stage1_detailed, "prompt text", transport);
    const auto request = nlohmann::json::parse(seen_body);
    CHECK(request["temperature"] == 0);
    CHECK(request["model"] == "test-model");
    REQUIRE(request["messages"].size() == 1);
    CHECK(request["messages"][0]["role"] == "user");
    CHECK(request["messages"][0]["content"] == "prompt text");
}

TEST_CASE("http transport round-trips against a local server") {
    httplib::Server server;
    std::string received;
    server.Post("/v1/chat/completions",
                [&](const httplib::Request& req, httplib::Response& res) {
                    received = req.body;
                    res.set_content(completion_envelope("from-server"), "application/json");
                });
    const int port = server.bind_to_any_port("127.0.0.1");
    if (port <= 0) {
        WARN("could not bind a loopback port; skipping transport test");
        return;
    }
    std::thread worker([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    LlmProviderConfig cfg = test_config();
    cfg.endpoint_url = "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions";
    cfg.timeout_s = 5.0;
    const std::string content =
        complete(cfg, TemplateName::stage1_detailed, "ping", http_transport(cfg));
    CHECK(content == "from-server");
    CHECK(nlohmann::json::parse(received)["messages"][0]["content"] == "ping");

    server.stop();
    worker.join();
}

TEST_CASE("all three provider-backed stages are byte-deterministic when mocked") {
    const std::string fixture = testsupport::read_file(testsupport::data_dir() /
                                                       "appendix_inspect.csv");
    const std::string reference = testsupport::read_file(testsupport::data_dir() /
                                                         "appendix_schema.json");
    const Transport schema_transport = canned("Four float columns.\n\n" + reference);
    const Transport diag_transport =
        canned("The velocity detector is abnormal; raise the threshold to 45 deg/s.");

    auto run_once = [&]() -> std::string {
        // stage 1: schema, stage 2 replaced by the native cleaner, stage 3: diagnosis
        const SchemaDescription schema = infer_schema_llm(
            fixture, test_config(), builtin_template(TemplateName::stage1_detailed),
            schema_transport);
        const RawTable table = parse_table(fixture, schema);
        const CleanResult cleaned = clean(table, infer_mapping(schema), schema, {});
        MetricsReport metrics;
        metrics.fixation.precision = 0.9;
        metrics.fixation.recall = 0.9;
        metrics.saccade.precision = 0.8;
        metrics.saccade.recall = 0.7;
        const DiagnosisNarrative narrative = diagnose_llm(
            metrics, test_config(), builtin_template(TemplateName::stage3_diagnose),
            diag_transport);
        std::string blob = schema_to_json(schema).dump();
        for (const auto& s : cleaned.recording.samples)
            blob += "," + std::to_string(s.t) + ":" + std::to_string(s.x);
        blob += narrative.narrative;
        for (const auto& sug : narrative.suggestions)
            blob += sug.context + std::to_string(sug.value);
        return blob;
    };
    CHECK(run_once() == run_once());
}

TEST_CASE("unreachable providers raise ProviderTimeout") {
    LlmProviderConfig cfg = test_config();
    cfg.endpoint_url = "http://127.0.0.1:1/v1/chat/completions";
    cfg.timeout_s = 0.5;
    CHECK_THROWS_AS(complete(cfg, TemplateName::stage1_detailed, "x", http_transport(cfg)),
                    ProviderTimeout);
}
