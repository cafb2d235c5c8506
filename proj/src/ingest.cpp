#include "gazekit/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "gazekit/errors.hpp"

namespace gazekit {

namespace {

const std::vector<std::string>& canonical_missing_patterns() {
    static const std::vector<std::string> patterns = {"",    "NA",  "null", "N/A",
                                                      "-",   "NaN", "nan",  "NULL"};
    return patterns;
}

bool is_missing_token(const std::string& cell, const std::vector<std::string>& schema_patterns) {
    if (std::find(schema_patterns.begin(), schema_patterns.end(), cell) !=
        schema_patterns.end())
        return true;
    const auto& canonical = canonical_missing_patterns();
    return std::find(canonical.begin(), canonical.end(), cell) != canonical.end();
}

bool is_valid_utf8(std::string_view text) {
    std::size_t i = 0;
    while (i < text.size()) {
        const unsigned char c = static_cast<unsigned char>(text[i]);
        std::size_t extra = 0;
        if (c < 0x80) extra = 0;
        else if ((c & 0xE0) == 0xC0) extra = 1;
        else if ((c & 0xF0) == 0xE0) extra = 2;
        else if ((c & 0xF8) == 0xF0) extra = 3;
        else return false;
        for (std::size_t k = 1; k <= extra; ++k) {
            if (i + k >= text.size()) return false;
            if ((static_cast<unsigned char>(text[i + k]) & 0xC0) != 0x80) return false;
        }
        i += extra + 1;
    }
    return true;
}

std::string latin1_to_utf8(std::string_view bytes) {
    std::string out;
    out.reserve(bytes.size() * 2);
    for (char ch : bytes) {
        const unsigned char c = static_cast<unsigned char>(ch);
        if (c < 0x80) {
            out.push_back(static_cast<char>(c));
        } else {
            out.push_back(static_cast<char>(0xC0 | (c >> 6)));
            out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
        }
    }
    return out;
}

DecodedText decode_bytes(std::string_view raw) {
    if (raw.size() >= 3 && static_cast<unsigned char>(raw[0]) == 0xEF &&
        static_cast<unsigned char>(raw[1]) == 0xBB &&
        static_cast<unsigned char>(raw[2]) == 0xBF)
        raw.remove_prefix(3);
    if (is_valid_utf8(raw)) return {std::string(raw), "utf-8"};
    return {latin1_to_utf8(raw), "latin1"};
}

bool looks_binary(std::string_view text) {
    if (text.find('\0') != std::string_view::npos) return true;
    std::size_t control = 0;
    const std::size_t probe = std::min<std::size_t>(text.size(), 4096);
    for (std::size_t i = 0; i < probe; ++i) {
        const unsigned char c = static_cast<unsigned char>(text[i]);
        if (c < 0x20 && c != '\t' && c != '\n' && c != '\r') ++control;
    }
    return probe > 0 && control * 5 > probe;
}

std::vector<std::string> split_lines(std::string_view text) {
    std::vector<std::string> lines;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= text.size(); ++i) {
        if (i == text.size() || text[i] == '\n' || text[i] == '\r') {
            lines.emplace_back(text.substr(start, i - start));
            if (i + 1 < text.size() && text[i] == '\r' && text[i + 1] == '\n') ++i;
            start = i + 1;
        }
    }
    while (!lines.empty() && lines.back().empty()) lines.pop_back();
    return lines;
}

std::vector<std::string> split_delimited(std::string_view line, char delim, char quote) {
    std::vector<std::string> out;
    std::string cur;
    bool in_quotes = false;
    bool field_started = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (in_quotes) {
            if (c == quote) {
                if (i + 1 < line.size() && line[i + 1] == quote) {
                    cur.push_back(quote);
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                cur.push_back(c);
            }
        } else if (c == quote && !field_started) {
            in_quotes = true;
            field_started = true;
        } else if (c == delim) {
            out.push_back(std::move(cur));
            cur.clear();
            field_started = false;
        } else {
            cur.push_back(c);
            field_started = true;
        }
    }
    out.push_back(std::move(cur));
    return out;
}

std::string trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

std::optional<double> parse_number(const std::string& raw, char decimal,
                                   std::optional<char> thousands) {
    std::string s = trim(raw);
    if (s.empty()) return std::nullopt;
    if (thousands) s.erase(std::remove(s.begin(), s.end(), *thousands), s.end());
    if (decimal != '.') std::replace(s.begin(), s.end(), decimal, '.');
    const char* begin = s.c_str();
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(begin, &end);
    if (end == begin || *end != '\0') return std::nullopt;
    return v;
}

bool is_int_token(const std::string& raw) {
    const std::string s = trim(raw);
    if (s.empty()) return false;
    std::size_t i = (s[0] == '+' || s[0] == '-') ? 1 : 0;
    if (i >= s.size()) return false;
    for (; i < s.size(); ++i)
        if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
    return true;
}

bool is_bool_token(const std::string& raw) {
    const std::string s = trim(raw);
    return s == "true" || s == "false" || s == "True" || s == "False" ||
           s == "TRUE" || s == "FALSE";
}

bool digits(std::string_view s, std::size_t from, std::size_t count) {
    if (from + count > s.size()) return false;
    for (std::size_t i = from; i < from + count; ++i)
        if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
    return true;
}

bool is_date_token(const std::string& raw) {
    const std::string s = trim(raw);
    return s.size() == 10 && digits(s, 0, 4) && s[4] == '-' && digits(s, 5, 2) &&
           s[7] == '-' && digits(s, 8, 2);
}

bool is_datetime_token(const std::string& raw) {
    const std::string s = trim(raw);
    if (s.size() < 16) return false;
    if (!(digits(s, 0, 4) && s[4] == '-' && digits(s, 5, 2) && s[7] == '-' &&
          digits(s, 8, 2)))
        return false;
    if (s[10] != 'T' && s[10] != ' ') return false;
    return digits(s, 11, 2) && s[13] == ':' && digits(s, 14, 2);
}

std::string guess_column_type(const std::vector<std::string>& values, char decimal) {
    bool any = false;
    bool all_int = true, all_num = true, all_bool = true, all_date = true,
         all_datetime = true;
    std::set<std::string> distinct;
    for (const std::string& v : values) {
        any = true;
        if (!is_int_token(v)) all_int = false;
        if (!parse_number(v, decimal, std::nullopt)) all_num = false;
        if (!is_bool_token(v)) all_bool = false;
        if (!is_date_token(v)) all_date = false;
        if (!is_datetime_token(v)) all_datetime = false;
        if (distinct.size() <= 8) distinct.insert(trim(v));
    }
    if (!any) return "string";
    if (all_int) return "int";
    if (all_num) return "float";
    if (all_bool) return "bool";
    if (all_date) return "date";
    if (all_datetime) return "datetime";
    if (values.size() >= 20 && distinct.size() <= 5) return "categorical";
    return "string";
}

bool numeric_cell(const std::string& cell) {
    return parse_number(cell, '.', std::nullopt).has_value();
}

struct DelimiterScore {
    char delim = ',';
    std::size_t modal_columns = 1;
    double consistency = 0.0;
};

DelimiterScore score_delimiter(const std::vector<std::string>& lines, char delim) {
    DelimiterScore score;
    score.delim = delim;
    std::map<std::size_t, std::size_t> counts;
    std::size_t considered = 0;
    for (const std::string& line : lines) {
        if (line.empty()) continue;
        ++considered;
        counts[split_delimited(line, delim, '"').size()] += 1;
    }
    if (considered == 0) return score;
    auto best = std::max_element(counts.begin(), counts.end(),
                                 [](const auto& a, const auto& b) {
                                     return a.second < b.second;
                                 });
    score.modal_columns = best->first;
    score.consistency = static_cast<double>(best->second) / static_cast<double>(considered);
    return score;
}

bool comma_decimal_token(const std::string& raw) {
    const std::string s = trim(raw);
    if (s.empty()) return false;
    std::size_t i = (s[0] == '+' || s[0] == '-') ? 1 : 0;
    bool comma = false, digit = false;
    for (; i < s.size(); ++i) {
        const char c = s[i];
        if (std::isdigit(static_cast<unsigned char>(c))) {
            digit = true;
        } else if (c == ',' && !comma) {
            comma = true;
        } else {
            return false;
        }
    }
    return digit && comma;
}

}  // namespace

const char* to_string(TableFormat format) {
    switch (format) {
        case TableFormat::csv: return "csv";
        case TableFormat::tsv: return "tsv";
        case TableFormat::jsonl: return "jsonl";
        case TableFormat::other: return "other";
    }
    return "other";
}

SchemaDescription sniff_schema(std::string_view raw_bytes, std::size_t sample_chars) {
    if (raw_bytes.empty()) throw UnreadableInput("input is empty");

    DecodedText decoded = decode_bytes(raw_bytes);
    if (decoded.text.empty()) throw UnreadableInput("input is empty");
    if (looks_binary(decoded.text)) throw UnreadableInput("input looks like binary data");

    std::string_view sample_view = decoded.text;
    bool whole = true;
    if (decoded.text.size() > sample_chars) {
        whole = false;
        sample_view = sample_view.substr(0, sample_chars);
        const std::size_t cut = sample_view.rfind('\n');
        if (cut != std::string_view::npos && cut > 0) sample_view = sample_view.substr(0, cut);
    }

    std::vector<std::string> lines = split_lines(sample_view);
    lines.erase(std::remove_if(lines.begin(), lines.end(),
                               [](const std::string& l) { return trim(l).empty(); }),
                lines.end());
    if (lines.empty()) throw UnreadableInput("no usable lines in sample");

    SchemaDescription schema;
    schema.encoding_guess = decoded.encoding_guess;

    // JSONL probe: every leading object line parses as a JSON object.
    if (trim(lines.front()).front() == '{') {
        bool jsonl = true;
        std::vector<std::string> keys;
        std::vector<nlohmann::json> objects;
        const std::size_t probe = std::min<std::size_t>(lines.size(), 200);
        for (std::size_t i = 0; i < probe; ++i) {
            nlohmann::json obj = nlohmann::json::parse(lines[i], nullptr, false);
            if (!obj.is_object()) {
                jsonl = false;
                break;
            }
            for (auto it = obj.begin(); it != obj.end(); ++it)
                if (std::find(keys.begin(), keys.end(), it.key()) == keys.end())
                    keys.push_back(it.key());
            objects.push_back(std::move(obj));
        }
        if (jsonl && !keys.empty()) {
            schema.format = TableFormat::jsonl;
            schema.has_header = false;
            schema.dialect.header_row_index = -1;
            for (const std::string& key : keys) {
                ColumnSchema col;
                col.name = key;
                std::vector<std::string> values;
                for (const auto& obj : objects) {
                    if (!obj.contains(key)) {
                        col.nullable = true;
                        continue;
                    }
                    const auto& v = obj.at(key);
                    std::string text = v.is_string() ? v.get<std::string>() : v.dump();
                    if (is_missing_token(text, {})) {
                        col.nullable = true;
                        continue;
                    }
                    if (col.examples.size() < 3) col.examples.push_back(text);
                    values.push_back(std::move(text));
                }
                col.type_guess = guess_column_type(values, '.');
                schema.columns.push_back(std::move(col));
            }
            const std::size_t rows = lines.size();
            schema.row_count_estimate =
                "~" + std::to_string(whole ? rows
                                           : static_cast<std::size_t>(std::llround(
                                                 static_cast<double>(rows) *
                                                 static_cast<double>(decoded.text.size()) /
                                                 static_cast<double>(sample_view.size()))));
            return schema;
        }
    }

    // Delimiter search over the usual suspects.
    DelimiterScore best;
    for (char delim : {',', '\t', ';', '|'}) {
        DelimiterScore s = score_delimiter(lines, delim);
        const bool better = (s.modal_columns >= 2 && s.consistency >= 0.9) &&
                            (best.modal_columns < 2 || s.consistency > best.consistency ||
                             (s.consistency == best.consistency &&
                              s.modal_columns > best.modal_columns));
        if (better) best = s;
    }

    bool single_column = false;
    if (best.modal_columns < 2 || best.consistency < 0.9) {
        std::size_t with_delims = 0;
        for (const std::string& line : lines)
            if (line.find_first_of(",\t;|") != std::string::npos) ++with_delims;
        if (with_delims * 10 <= lines.size()) {
            single_column = true;
        } else {
            throw UnreadableInput(
                "no delimiter hypothesis yields >=2 consistent columns over sampled rows");
        }
    }

    schema.dialect.delimiter = single_column ? ',' : best.delim;
    schema.dialect.quotechar = '"';
    schema.format = schema.dialect.delimiter == '\t' ? TableFormat::tsv : TableFormat::csv;

    auto tokenize = [&](const std::string& line) {
        if (single_column) return std::vector<std::string>{line};
        return split_delimited(line, schema.dialect.delimiter, schema.dialect.quotechar);
    };

    const std::vector<std::string> first_row = tokenize(lines.front());
    bool first_row_numeric = false;
    for (const std::string& cell : first_row)
        if (numeric_cell(cell)) first_row_numeric = true;
    bool data_numeric = false;
    for (std::size_t i = 1; i < lines.size(); ++i)
        for (const std::string& cell : tokenize(lines[i]))
            if (numeric_cell(cell)) data_numeric = true;
    schema.has_header = !first_row_numeric && data_numeric && lines.size() > 1;
    schema.dialect.header_row_index = schema.has_header ? 0 : -1;

    std::vector<std::string> names;
    if (schema.has_header) {
        for (std::size_t c = 0; c < first_row.size(); ++c) {
            std::string name = trim(first_row[c]);
            if (name.empty()) name = "col" + std::to_string(c);
            while (std::find(names.begin(), names.end(), name) != names.end())
                name += "_2";
            names.push_back(std::move(name));
        }
    } else {
        const std::size_t width = single_column ? 1 : best.modal_columns;
        for (std::size_t c = 0; c < width; ++c) names.push_back("col" + std::to_string(c));
        schema.notes.push_back("no header row detected; synthetic column names assigned");
    }

    const std::size_t width = names.size();
    std::vector<std::vector<std::string>> column_values(width);
    std::vector<bool> nullable(width, false);
    std::vector<std::vector<std::string>> examples(width);
    std::set<std::string> observed_missing;
    std::size_t data_rows = 0;
    for (std::size_t i = schema.has_header ? 1 : 0; i < lines.size(); ++i) {
        // Concatenated exports repeat the header mid-file; keep it out of the
        // type evidence (cleaning drops it as unparseable anyway).
        if (schema.has_header && lines[i] == lines.front()) continue;
        std::vector<std::string> cells = tokenize(lines[i]);
        cells.resize(width);
        ++data_rows;
        for (std::size_t c = 0; c < width; ++c) {
            const std::string cell = trim(cells[c]);
            if (is_missing_token(cell, {})) {
                nullable[c] = true;
                const auto& canonical = canonical_missing_patterns();
                if (std::find(canonical.begin(), canonical.end(), cell) != canonical.end())
                    observed_missing.insert(cell);
                continue;
            }
            if (examples[c].size() < 3) examples[c].push_back(cells[c]);
            column_values[c].push_back(cells[c]);
        }
    }
    if (data_rows == 0) throw UnreadableInput("no data rows in sample");

    for (std::size_t c = 0; c < width; ++c) {
        ColumnSchema col;
        col.name = names[c];
        col.type_guess = guess_column_type(column_values[c], schema.dialect.decimal);
        col.examples = examples[c];
        col.nullable = nullable[c];
        schema.columns.push_back(std::move(col));
    }

    // European numeric convention: non-comma delimiter plus comma-decimal
    // string columns.
    if (schema.dialect.delimiter != ',') {
        bool any_comma_decimal = false;
        bool any_dot_float = false;
        for (std::size_t c = 0; c < width; ++c) {
            if (schema.columns[c].type_guess == "float") any_dot_float = true;
            if (schema.columns[c].type_guess != "string") continue;
            const auto& values = column_values[c];
            if (!values.empty() && std::all_of(values.begin(), values.end(),
                                               comma_decimal_token))
                any_comma_decimal = true;
        }
        if (any_comma_decimal && !any_dot_float) {
            schema.dialect.decimal = ',';
            for (std::size_t c = 0; c < width; ++c)
                schema.columns[c].type_guess =
                    guess_column_type(column_values[c], schema.dialect.decimal);
        }
    }

    for (const std::string& p : canonical_missing_patterns())
        if (observed_missing.count(p)) schema.missing_values_patterns.push_back(p);

    for (std::size_t c = 0; c < width; ++c) {
        const auto& values = column_values[c];
        if (values.size() >= 2 &&
            std::all_of(values.begin(), values.end(), [&](const std::string& v) {
                return trim(v) == trim(values.front());
            }))
            schema.notes.push_back("All " + names[c] + " values are " +
                                   trim(values.front()) +
                                   ", indicating no variability in this column.");
    }
    if (decoded.encoding_guess == "latin1")
        schema.notes.push_back("input was not valid UTF-8; decoded as latin1");

    const std::size_t estimate =
        whole ? data_rows
              : static_cast<std::size_t>(std::llround(
                    static_cast<double>(data_rows) *
                    static_cast<double>(decoded.text.size()) /
                    static_cast<double>(sample_view.size())));
    schema.row_count_estimate = "~" + std::to_string(estimate);
    return schema;
}

nlohmann::ordered_json schema_to_json(const SchemaDescription& schema) {
    nlohmann::ordered_json j;
    j["format"] = to_string(schema.format);
    j["encoding_guess"] = schema.encoding_guess;
    nlohmann::ordered_json dialect;
    dialect["delimiter"] = std::string(1, schema.dialect.delimiter);
    dialect["quotechar"] = std::string(1, schema.dialect.quotechar);
    dialect["escapechar"] = schema.dialect.escapechar
                                ? nlohmann::ordered_json(std::string(1, *schema.dialect.escapechar))
                                : nlohmann::ordered_json(nullptr);
    dialect["decimal"] = std::string(1, schema.dialect.decimal);
    dialect["thousands"] = schema.dialect.thousands
                               ? nlohmann::ordered_json(std::string(1, *schema.dialect.thousands))
                               : nlohmann::ordered_json(nullptr);
    dialect["header_row_index"] = schema.dialect.header_row_index;
    j["dialect"] = std::move(dialect);
    j["columns"] = nlohmann::ordered_json::array();
    for (const ColumnSchema& col : schema.columns) {
        nlohmann::ordered_json jc;
        jc["name"] = col.name;
        jc["type_guess"] = col.type_guess;
        jc["examples"] = col.examples;
        jc["nullable"] = col.nullable;
        j["columns"].push_back(std::move(jc));
    }
    j["has_header"] = schema.has_header;
    j["row_count_estimate"] = schema.row_count_estimate;
    j["missing_values_patterns"] = schema.missing_values_patterns;
    j["notes"] = schema.notes;
    return j;
}

namespace {

[[noreturn]] void contract_error(const std::string& what, const nlohmann::json& j) {
    throw SchemaValidationFailed("schema contract violation: " + what, j.dump());
}

char char_field(const nlohmann::json& j, const char* key, const nlohmann::json& root) {
    if (!j.contains(key) || !j.at(key).is_string() || j.at(key).get<std::string>().empty())
        contract_error(std::string("dialect.") + key + " must be a 1-char string", root);
    return j.at(key).get<std::string>()[0];
}

std::optional<char> opt_char_field(const nlohmann::json& j, const char* key,
                                   const nlohmann::json& root) {
    if (!j.contains(key)) contract_error(std::string("dialect.") + key + " missing", root);
    if (j.at(key).is_null()) return std::nullopt;
    if (!j.at(key).is_string() || j.at(key).get<std::string>().empty())
        contract_error(std::string("dialect.") + key + " must be null or a 1-char string",
                       root);
    return j.at(key).get<std::string>()[0];
}

}  // namespace

SchemaDescription schema_from_json(const nlohmann::json& j) {
    if (!j.is_object()) contract_error("root must be an object", j);
    for (const char* key : {"format", "encoding_guess", "dialect", "columns", "has_header",
                            "row_count_estimate", "missing_values_patterns", "notes"})
        if (!j.contains(key)) contract_error(std::string("missing field '") + key + "'", j);

    SchemaDescription schema;
    if (!j.at("format").is_string()) contract_error("format must be a string", j);
    const std::string format = j.at("format").get<std::string>();
    if (format == "csv") schema.format = TableFormat::csv;
    else if (format == "tsv") schema.format = TableFormat::tsv;
    else if (format == "jsonl" || format == "ndjson") schema.format = TableFormat::jsonl;
    else schema.format = TableFormat::other;

    if (!j.at("encoding_guess").is_string())
        contract_error("encoding_guess must be a string", j);
    schema.encoding_guess = j.at("encoding_guess").get<std::string>();

    const auto& dialect = j.at("dialect");
    if (!dialect.is_object()) contract_error("dialect must be an object", j);
    schema.dialect.delimiter = char_field(dialect, "delimiter", j);
    schema.dialect.quotechar = char_field(dialect, "quotechar", j);
    schema.dialect.escapechar = opt_char_field(dialect, "escapechar", j);
    schema.dialect.decimal = char_field(dialect, "decimal", j);
    schema.dialect.thousands = opt_char_field(dialect, "thousands", j);
    if (!dialect.contains("header_row_index") ||
        !dialect.at("header_row_index").is_number_integer())
        contract_error("dialect.header_row_index must be an integer", j);
    schema.dialect.header_row_index = dialect.at("header_row_index").get<int>();

    if (!j.at("columns").is_array() || j.at("columns").empty())
        contract_error("columns must be a non-empty array", j);
    static const std::set<std::string> kTypes = {"string", "int",      "float",   "bool",
                                                 "date",   "datetime", "categorical"};
    for (const auto& jc : j.at("columns")) {
        if (!jc.is_object()) contract_error("columns entries must be objects", j);
        ColumnSchema col;
        if (!jc.contains("name") || !jc.at("name").is_string())
            contract_error("column.name must be a string", j);
        col.name = jc.at("name").get<std::string>();
        if (!jc.contains("type_guess") || !jc.at("type_guess").is_string() ||
            !kTypes.count(jc.at("type_guess").get<std::string>()))
            contract_error("column.type_guess must be one of the allowed type names", j);
        col.type_guess = jc.at("type_guess").get<std::string>();
        if (!jc.contains("examples") || !jc.at("examples").is_array())
            contract_error("column.examples must be an array", j);
        for (const auto& e : jc.at("examples"))
            col.examples.push_back(e.is_string() ? e.get<std::string>() : e.dump());
        if (!jc.contains("nullable") || !jc.at("nullable").is_boolean())
            contract_error("column.nullable must be a boolean", j);
        col.nullable = jc.at("nullable").get<bool>();
        schema.columns.push_back(std::move(col));
    }

    if (!j.at("has_header").is_boolean()) contract_error("has_header must be a boolean", j);
    schema.has_header = j.at("has_header").get<bool>();
    if (!j.at("row_count_estimate").is_string())
        contract_error("row_count_estimate must be a string", j);
    schema.row_count_estimate = j.at("row_count_estimate").get<std::string>();
    if (!j.at("missing_values_patterns").is_array())
        contract_error("missing_values_patterns must be an array", j);
    for (const auto& p : j.at("missing_values_patterns")) {
        if (!p.is_string()) contract_error("missing_values_patterns entries must be strings", j);
        schema.missing_values_patterns.push_back(p.get<std::string>());
    }
    if (!j.at("notes").is_array()) contract_error("notes must be an array", j);
    for (const auto& n : j.at("notes")) {
        if (!n.is_string()) contract_error("notes entries must be strings", j);
        schema.notes.push_back(n.get<std::string>());
    }
    return schema;
}

TimeUnitGuess detect_time_units(std::span<const double> timestamps) {
    std::vector<double> positive;
    for (std::size_t i = 1; i < timestamps.size(); ++i) {
        const double d = timestamps[i] - timestamps[i - 1];
        if (d > 0.0) positive.push_back(d);
    }
    if (positive.empty())
        throw NoPositiveDeltas("cannot detect time units: no positive inter-sample delta");

    std::sort(positive.begin(), positive.end());
    const std::size_t n = positive.size();
    const double d = n % 2 == 1 ? positive[n / 2]
                                : 0.5 * (positive[n / 2 - 1] + positive[n / 2]);

    TimeUnitGuess guess;
    if (d < 0.1) guess.unit = TimeUnits::s;
    else if (d < 100.0) guess.unit = TimeUnits::ms;
    else if (d < 1e5) guess.unit = TimeUnits::us;
    else guess.unit = TimeUnits::ns;

    for (double boundary : {0.1, 100.0, 1e5})
        if (d >= boundary / 2.0 && d <= boundary * 2.0) guess.ambiguous = true;
    return guess;
}

double time_unit_divisor(TimeUnits unit) {
    switch (unit) {
        case TimeUnits::s: return 1.0;
        case TimeUnits::ms: return 1e3;
        case TimeUnits::us: return 1e6;
        case TimeUnits::ns: return 1e9;
    }
    return 1.0;
}

RawTable parse_table(std::string_view raw_bytes, const SchemaDescription& schema) {
    DecodedText decoded = decode_bytes(raw_bytes);
    std::vector<std::string> lines = split_lines(decoded.text);
    lines.erase(std::remove_if(lines.begin(), lines.end(),
                               [](const std::string& l) { return trim(l).empty(); }),
                lines.end());

    RawTable table;
    for (const ColumnSchema& col : schema.columns) table.columns.push_back(col.name);
    const std::size_t width = table.columns.size();

    if (schema.format == TableFormat::jsonl) {
        for (const std::string& line : lines) {
            nlohmann::json obj = nlohmann::json::parse(line, nullptr, false);
            std::vector<std::string> row(width);
            if (obj.is_object()) {
                for (std::size_t c = 0; c < width; ++c) {
                    if (!obj.contains(table.columns[c])) continue;
                    const auto& v = obj.at(table.columns[c]);
                    row[c] = v.is_string() ? v.get<std::string>() : v.dump();
                }
            }
            table.rows.push_back(std::move(row));
        }
        return table;
    }
    if (schema.format == TableFormat::other)
        throw UnreadableInput("cannot parse rows for format 'other'");

    // Header row plus any preamble above it is skipped.
    const int header_index = schema.has_header ? std::max(schema.dialect.header_row_index, 0)
                                               : -1;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (static_cast<int>(i) <= header_index) continue;
        std::vector<std::string> row =
            split_delimited(lines[i], schema.dialect.delimiter, schema.dialect.quotechar);
        row.resize(width);
        table.rows.push_back(std::move(row));
    }
    return table;
}

namespace {

bool name_matches(const std::string& name, std::initializer_list<const char*> candidates) {
    std::string lower = name;
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    for (const char* cand : candidates)
        if (lower == cand) return true;
    return false;
}

bool numeric_type(const std::string& type_guess) {
    return type_guess == "int" || type_guess == "float";
}

}  // namespace

ColumnMapping infer_mapping(const SchemaDescription& schema) {
    ColumnMapping mapping;
    std::vector<std::string> numeric;
    // Exact-name matches win regardless of type evidence (an all-missing
    // column has none); the positional fallback insists on numeric columns.
    for (const ColumnSchema& col : schema.columns) {
        if (name_matches(col.name, {"time", "timestamp", "t", "time_s", "time_ms"}) &&
            mapping.time_col.empty())
            mapping.time_col = col.name;
        else if (name_matches(col.name, {"x", "gaze_x", "gx", "porx", "x_deg", "x_px"}) &&
                 mapping.x_col.empty())
            mapping.x_col = col.name;
        else if (name_matches(col.name, {"y", "gaze_y", "gy", "pory", "y_deg", "y_px"}) &&
                 mapping.y_col.empty())
            mapping.y_col = col.name;
        else if (name_matches(col.name, {"label", "event", "class", "event_label"}) &&
                 !mapping.label_col)
            mapping.label_col = col.name;
        if (numeric_type(col.type_guess)) numeric.push_back(col.name);
    }
    // Positional fallback: first numeric column is time, the next two are x/y.
    auto take_next_numeric = [&](const std::string& already1, const std::string& already2,
                                 const std::string& already3) -> std::string {
        for (const std::string& name : numeric)
            if (name != already1 && name != already2 && name != already3) return name;
        return {};
    };
    if (mapping.time_col.empty())
        mapping.time_col = take_next_numeric(mapping.x_col, mapping.y_col, "");
    if (mapping.x_col.empty())
        mapping.x_col = take_next_numeric(mapping.time_col, mapping.y_col, "");
    if (mapping.y_col.empty())
        mapping.y_col = take_next_numeric(mapping.time_col, mapping.x_col, "");
    for (const ColumnSchema& col : schema.columns) {
        if (col.name != mapping.time_col && col.name != mapping.x_col &&
            col.name != mapping.y_col &&
            (!mapping.label_col || col.name != *mapping.label_col))
            mapping.drop_cols.push_back(col.name);
    }
    return mapping;
}

CleanResult clean(const RawTable& table, const ColumnMapping& mapping,
                  const SchemaDescription& schema, const CleanOptions& options) {
    auto column_index = [&](const std::string& name) -> std::size_t {
        auto it = std::find(table.columns.begin(), table.columns.end(), name);
        if (it == table.columns.end())
            throw UnreadableInput("mapped column '" + name + "' not found in table");
        return static_cast<std::size_t>(it - table.columns.begin());
    };
    const std::size_t ti = column_index(mapping.time_col);
    const std::size_t xi = column_index(mapping.x_col);
    const std::size_t yi = column_index(mapping.y_col);
    std::optional<std::size_t> li;
    if (mapping.label_col) li = column_index(*mapping.label_col);

    std::optional<std::size_t> ci;
    if (options.min_confidence) {
        std::string conf_name;
        if (options.confidence_col) {
            conf_name = *options.confidence_col;
        } else {
            for (const std::string& name : table.columns)
                if (name_matches(name, {"confidence", "conf", "validity"})) conf_name = name;
        }
        if (!conf_name.empty()) ci = column_index(conf_name);
    }

    CleanResult out;
    out.report.input_rows = table.rows.size();

    struct Row {
        double t, x, y;
        std::string label;
    };
    std::vector<Row> rows;
    rows.reserve(table.rows.size());

    const char decimal = schema.dialect.decimal;
    const auto& thousands = schema.dialect.thousands;
    for (const auto& raw : table.rows) {
        const std::string t_cell = trim(raw[ti]);
        const std::string x_cell = trim(raw[xi]);
        const std::string y_cell = trim(raw[yi]);
        if (is_missing_token(t_cell, schema.missing_values_patterns) ||
            is_missing_token(x_cell, schema.missing_values_patterns) ||
            is_missing_token(y_cell, schema.missing_values_patterns)) {
            ++out.report.dropped_missing;
            continue;
        }
        const auto t = parse_number(t_cell, decimal, thousands);
        const auto x = parse_number(x_cell, decimal, thousands);
        const auto y = parse_number(y_cell, decimal, thousands);
        if (!t || !x || !y) {
            ++out.report.dropped_missing;
            continue;
        }
        if (!std::isfinite(*t) || !std::isfinite(*x) || !std::isfinite(*y)) {
            ++out.report.dropped_nonfinite;
            continue;
        }
        if (ci && options.min_confidence) {
            const auto conf = parse_number(trim(raw[*ci]), decimal, thousands);
            if (conf && *conf < *options.min_confidence) {
                ++out.report.dropped_low_confidence;
                continue;
            }
        }
        Row row{*t, *x, *y, {}};
        if (li) row.label = trim(raw[*li]);
        rows.push_back(std::move(row));
    }

    if (rows.empty()) throw EmptyAfterCleaning("no rows survived cleaning");
    out.report.kept = rows.size();

    std::stable_sort(rows.begin(), rows.end(),
                     [](const Row& a, const Row& b) { return a.t < b.t; });

    std::vector<double> t_sorted;
    t_sorted.reserve(rows.size());
    for (const Row& r : rows) t_sorted.push_back(r.t);
    TimeUnits unit = TimeUnits::s;
    bool ambiguous = false;
    try {
        const TimeUnitGuess guess = detect_time_units(t_sorted);
        unit = guess.unit;
        ambiguous = guess.ambiguous;
    } catch (const NoPositiveDeltas&) {
        // All stamps equal (or a single row): assume seconds, flag the guess.
        ambiguous = true;
    }
    const double divisor = time_unit_divisor(unit);

    out.report.time_units = unit;
    out.report.time_units_ambiguous = ambiguous;
    out.recording.time_units_detected = unit;
    out.recording.samples.reserve(rows.size());
    if (li) out.truth_labels.emplace();
    for (const Row& r : rows) {
        out.recording.samples.push_back(GazeSample{r.t / divisor, r.x, r.y});
        if (li) out.truth_labels->push_back(r.label);
    }
    return out;
}

nlohmann::ordered_json clean_report_to_json(const CleanReport& report) {
    nlohmann::ordered_json j;
    j["input_rows"] = report.input_rows;
    j["kept"] = report.kept;
    j["dropped_missing"] = report.dropped_missing;
    j["dropped_nonfinite"] = report.dropped_nonfinite;
    j["dropped_low_confidence"] = report.dropped_low_confidence;
    j["time_units"] = to_string(report.time_units);
    j["time_units_ambiguous"] = report.time_units_ambiguous;
    return j;
}

DecodedText read_text_file(const std::filesystem::path& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) throw UnreadableInput("cannot open file: " + path.string());
    std::ostringstream buffer;
    buffer << file.rdbuf();
    return decode_bytes(buffer.str());
}

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc()) return "0";
    return std::string(buf, ptr);
}

void write_recording_csv(const std::filesystem::path& path, const GazeRecording& rec,
                         const std::optional<std::vector<std::string>>& truth_labels) {
    std::ofstream file(path, std::ios::binary);
    if (!file) throw Error("cannot write file: " + path.string());
    const bool with_labels = truth_labels.has_value();
    file << "time_s,x,y" << (with_labels ? ",label" : "") << "\n";
    for (std::size_t i = 0; i < rec.samples.size(); ++i) {
        const GazeSample& s = rec.samples[i];
        file << format_double(s.t) << ',' << format_double(s.x) << ','
             << format_double(s.y);
        if (with_labels) file << ',' << (i < truth_labels->size() ? (*truth_labels)[i] : "");
        file << "\n";
    }
}

CleanResult read_recording_csv(const std::filesystem::path& path) {
    DecodedText decoded = read_text_file(path);
    std::vector<std::string> lines = split_lines(decoded.text);
    if (lines.empty()) throw UnreadableInput("empty recording file: " + path.string());
    const std::vector<std::string> header = split_delimited(lines[0], ',', '"');
    if (header.size() < 3 || header[0] != "time_s")
        throw UnreadableInput("not a cleaned recording file (expected time_s,x,y[,label])");
    const bool with_labels = header.size() >= 4 && header[3] == "label";

    CleanResult out;
    if (with_labels) out.truth_labels.emplace();
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (trim(lines[i]).empty()) continue;
        const std::vector<std::string> cells = split_delimited(lines[i], ',', '"');
        if (cells.size() < 3) throw UnreadableInput("malformed recording row: " + lines[i]);
        const auto t = parse_number(cells[0], '.', std::nullopt);
        const auto x = parse_number(cells[1], '.', std::nullopt);
        const auto y = parse_number(cells[2], '.', std::nullopt);
        if (!t || !x || !y) throw UnreadableInput("malformed recording row: " + lines[i]);
        out.recording.samples.push_back(GazeSample{*t, *x, *y});
        if (with_labels) out.truth_labels->push_back(cells.size() > 3 ? cells[3] : "");
    }
    if (out.recording.empty()) throw EmptyAfterCleaning("recording file has no rows");
    out.report.input_rows = out.recording.size();
    out.report.kept = out.recording.size();
    return out;
}

void write_labels_csv(const std::filesystem::path& path, const LabeledSeries& series) {
    std::ofstream file(path, std::ios::binary);
    if (!file) throw Error("cannot write file: " + path.string());
    file << "time_s,label\n";
    for (std::size_t i = 0; i < series.size(); ++i)
        file << format_double(series.t[i]) << ',' << to_string(series.label[i]) << "\n";
}

LabeledSeries read_labels_csv(const std::filesystem::path& path) {
    DecodedText decoded = read_text_file(path);
    std::vector<std::string> lines = split_lines(decoded.text);
    if (lines.empty() || split_delimited(lines[0], ',', '"').size() < 2)
        throw UnreadableInput("not a labels file (expected time_s,label): " + path.string());
    LabeledSeries out;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (trim(lines[i]).empty()) continue;
        const std::vector<std::string> cells = split_delimited(lines[i], ',', '"');
        if (cells.size() < 2) throw UnreadableInput("malformed labels row: " + lines[i]);
        const auto t = parse_number(cells[0], '.', std::nullopt);
        const auto label = parse_event_label(trim(cells[1]));
        if (!t || !label) throw UnreadableInput("malformed labels row: " + lines[i]);
        out.t.push_back(*t);
        out.label.push_back(*label);
    }
    return out;
}

}  // namespace gazekit
